#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "tablefill/subword.hpp"

namespace tablefill {

// Optimizer parameter groups; each gets its own base learning rate.
enum class ParamGroup { kEncoder, kHeads };

struct Param {
  std::string name;
  Matrix value;
  Matrix grad;
  Matrix moment1;
  Matrix moment2;
  ParamGroup group = ParamGroup::kHeads;
  bool decay = true;  // receives decoupled weight decay

  Eigen::Index size() const { return value.size(); }
};

// Owns every trainable tensor. Params are heap-allocated so references handed
// to heads and encoders stay valid while the store lives.
class ParamStore {
 public:
  ParamStore() = default;
  ParamStore(const ParamStore&) = delete;
  ParamStore& operator=(const ParamStore&) = delete;
  ParamStore(ParamStore&&) = default;
  ParamStore& operator=(ParamStore&&) = default;

  Param& add(std::string name, Matrix init, ParamGroup group, bool decay = true);
  Param* find(std::string_view name);
  const Param* find(std::string_view name) const;
  Param& at(std::string_view name);
  const Param& at(std::string_view name) const;

  void zero_grad();
  std::size_t size() const { return params_.size(); }
  std::size_t num_scalars() const;

  std::vector<Param*> all();
  std::vector<const Param*> all() const;

  std::vector<Matrix> snapshot() const;
  void restore(const std::vector<Matrix>& values);

  // [{name, rows, cols, group, data}] in registration order.
  nlohmann::json to_json() const;
  // Overwrites values by name; names and shapes must match exactly.
  void load_json(const nlohmann::json& j);

 private:
  std::vector<std::unique_ptr<Param>> params_;
};

Matrix random_normal(Eigen::Index rows, Eigen::Index cols, double stddev, std::mt19937_64& rng);
// Glorot-uniform for a fan_out x fan_in weight.
Matrix xavier_uniform(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng);

}  // namespace tablefill
