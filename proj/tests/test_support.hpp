#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "tablefill/data_model.hpp"
#include "tablefill/label_table.hpp"
#include "tablefill/re_head.hpp"

namespace tablefill::testing {

inline Sentence example_sentence() {
  return Sentence{{"Johanson", "Smith", "lives", "in", "London"},
                  {{0, 2, "Person"}, {4, 5, "Location"}},
                  {{0, 1, "LiveIn"}}};
}

inline LabelSchema example_schema() { return LabelSchema({"Location", "Person"}, {"LiveIn"}); }

inline LabelSchema random_schema() { return LabelSchema({"Loc", "Org", "Per"}, {"Located", "Owns", "WorksFor"}); }

// Random flat entities plus at most one relation per entity pair, so gold cells never conflict.
inline Sentence random_sentence(std::mt19937_64& rng, const LabelSchema& schema, int max_n = 12) {
  std::uniform_int_distribution<int> len(1, max_n);
  const int n = len(rng);
  Sentence s;
  for (int i = 0; i < n; ++i) s.words.push_back("w" + std::to_string(rng() % 50));
  std::uniform_int_distribution<int> coin(0, 2);
  std::uniform_int_distribution<int> span_len(1, 3);
  std::uniform_int_distribution<int> etype(0, static_cast<int>(schema.entity_types().size()) - 1);
  int i = 0;
  while (i < n) {
    if (coin(rng) == 0) {
      const int end = std::min(n, i + span_len(rng));
      s.entities.push_back({i, end, schema.entity_types()[etype(rng)]});
      i = end;
    } else {
      ++i;
    }
  }
  const int m = static_cast<int>(s.entities.size());
  if (!schema.relation_types().empty()) {
    std::uniform_int_distribution<int> rtype(0, static_cast<int>(schema.relation_types().size()) - 1);
    for (int a = 0; a < m; ++a) {
      for (int b = a + 1; b < m; ++b) {
        const int pick = coin(rng);
        if (pick == 0) s.relations.push_back({a, b, schema.relation_types()[rtype(rng)]});
        if (pick == 1 && rng() % 2 == 0) s.relations.push_back({b, a, schema.relation_types()[rtype(rng)]});
      }
    }
  }
  return s;
}

inline std::vector<EntitySpan> random_spans(std::mt19937_64& rng, int n, int num_types) {
  std::vector<EntitySpan> spans;
  int i = 0;
  while (i < n) {
    if (rng() % 3 == 0) {
      const int end = std::min(n, i + 1 + static_cast<int>(rng() % 3));
      spans.push_back({i, end, static_cast<int>(rng() % num_types)});
      i = end;
    } else {
      ++i;
    }
  }
  return spans;
}

// Cell-by-cell reference for batched scoring.
inline std::vector<std::vector<std::vector<double>>> naive_probs(const Tensor3& q, const Tensor3& k) {
  const int n = q.n;
  std::vector<std::vector<std::vector<double>>> out(n, std::vector<std::vector<double>>(n));
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      std::vector<double> logits(q.labels);
      for (int r = 0; r < q.labels; ++r) {
        double dot = 0.0;
        for (int d = 0; d < q.dim; ++d) dot += q(i, r, d) * k(j, r, d);
        logits[r] = dot;
      }
      const double mx = *std::max_element(logits.begin(), logits.end());
      double z = 0.0;
      for (double& v : logits) z += (v = std::exp(v - mx));
      for (double& v : logits) v /= z;
      out[i][j] = logits;
    }
  }
  return out;
}

inline Tensor3 random_tensor(std::mt19937_64& rng, int n, int labels, int dim, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Tensor3 t(n, labels, dim);
  for (Eigen::Index i = 0; i < t.data.size(); ++i) t.data.data()[i] = nd(rng);
  return t;
}

inline Matrix random_matrix(std::mt19937_64& rng, int rows, int cols, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
  return m;
}

// Entities and relations as comparable sets.
inline std::set<std::tuple<int, int, std::string>> entity_set(const Sentence& s) {
  std::set<std::tuple<int, int, std::string>> out;
  for (const auto& e : s.entities) out.insert({e.start, e.end, e.etype});
  return out;
}

inline std::set<std::tuple<int, int, int, int, std::string>> relation_set(const Sentence& s) {
  std::set<std::tuple<int, int, int, int, std::string>> out;
  for (const auto& r : s.relations) {
    const auto& h = s.entities[r.head];
    const auto& t = s.entities[r.tail];
    out.insert({h.start, h.end, t.start, t.end, r.rtype});
  }
  return out;
}


class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("tablefill_test_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

  std::filesystem::path write(const std::string& name, const std::string& text) const {
    std::ofstream(path_ / name, std::ios::binary) << text;
    return path_ / name;
  }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace tablefill::testing
