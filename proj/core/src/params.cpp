#include "tablefill/params.hpp"

#include <cmath>
#include <stdexcept>

namespace tablefill {

Param& ParamStore::add(std::string name, Matrix init, ParamGroup group, bool decay) {
  if (find(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  auto p = std::make_unique<Param>();
  p->name = std::move(name);
  p->grad = Matrix::Zero(init.rows(), init.cols());
  p->moment1 = Matrix::Zero(init.rows(), init.cols());
  p->moment2 = Matrix::Zero(init.rows(), init.cols());
  p->value = std::move(init);
  p->group = group;
  p->decay = decay;
  params_.push_back(std::move(p));
  return *params_.back();
}

Param* ParamStore::find(std::string_view name) {
  for (auto& p : params_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

const Param* ParamStore::find(std::string_view name) const {
  for (const auto& p : params_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

Param& ParamStore::at(std::string_view name) {
  if (Param* p = find(name)) return *p;
  throw std::out_of_range("no parameter named " + std::string(name));
}

const Param& ParamStore::at(std::string_view name) const {
  if (const Param* p = find(name)) return *p;
  throw std::out_of_range("no parameter named " + std::string(name));
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p->grad.setZero();
}

std::size_t ParamStore::num_scalars() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
  return n;
}

std::vector<Param*> ParamStore::all() {
  std::vector<Param*> out;
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Param*> ParamStore::all() const {
  std::vector<const Param*> out;
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<Matrix> ParamStore::snapshot() const {
  std::vector<Matrix> out;
  for (const auto& p : params_) out.push_back(p->value);
  return out;
}

void ParamStore::restore(const std::vector<Matrix>& values) {
  if (values.size() != params_.size()) throw std::invalid_argument("snapshot size mismatch");
  for (std::size_t k = 0; k < values.size(); ++k) params_[k]->value = values[k];
}

nlohmann::json ParamStore::to_json() const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& p : params_) {
    std::vector<double> data(static_cast<std::size_t>(p->value.size()));
    // row-major
    for (Eigen::Index r = 0; r < p->value.rows(); ++r) {
      for (Eigen::Index c = 0; c < p->value.cols(); ++c) data[r * p->value.cols() + c] = p->value(r, c);
    }
    out.push_back({{"name", p->name},
                   {"rows", p->value.rows()},
                   {"cols", p->value.cols()},
                   {"group", p->group == ParamGroup::kEncoder ? "encoder" : "heads"},
                   {"data", std::move(data)}});
  }
  return out;
}

void ParamStore::load_json(const nlohmann::json& j) {
  if (j.size() != params_.size()) {
    throw std::invalid_argument("checkpoint holds " + std::to_string(j.size()) + " tensors, model expects " +
                                std::to_string(params_.size()));
  }
  for (const auto& jp : j) {
    Param& p = at(jp.at("name").get<std::string>());
    const auto rows = jp.at("rows").get<Eigen::Index>();
    const auto cols = jp.at("cols").get<Eigen::Index>();
    if (rows != p.value.rows() || cols != p.value.cols()) {
      throw std::invalid_argument("shape mismatch for parameter " + p.name);
    }
    const auto data = jp.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
      throw std::invalid_argument("data size mismatch for parameter " + p.name);
    }
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) p.value(r, c) = data[r * cols + c];
    }
  }
}

Matrix random_normal(Eigen::Index rows, Eigen::Index cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = dist(rng);
  }
  return m;
}

Matrix xavier_uniform(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = dist(rng);
  }
  return m;
}

}  // namespace tablefill
