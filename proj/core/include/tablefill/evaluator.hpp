#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "tablefill/data_model.hpp"
#include "tablefill/label_table.hpp"

namespace tablefill {

class Model;

// ace_boundary and conll_exact match argument spans and relation type;
// ace_strict additionally requires both argument entity types.
enum class Criterion { kConllExact, kAceBoundary, kAceStrict };

std::string to_string(Criterion c);
Criterion criterion_from_string(std::string_view s);

struct Metrics {
  long tp = 0;
  long fp = 0;
  long fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  static Metrics from_counts(long tp, long fp, long fn);
  Metrics& operator+=(const Metrics& other);
  nlohmann::json to_json() const;
};

Metrics entity_metrics(std::span<const EntitySpan> gold, std::span<const EntitySpan> pred);
Metrics entity_metrics(std::span<const std::vector<EntitySpan>> gold, std::span<const std::vector<EntitySpan>> pred);
Metrics relation_metrics(std::span<const RelationTriple> gold, std::span<const RelationTriple> pred, Criterion criterion);
Metrics relation_metrics(std::span<const std::vector<RelationTriple>> gold,
                         std::span<const std::vector<RelationTriple>> pred, Criterion criterion);

struct RunStat {
  double mean = 0.0;
  double sd = 0.0;  // population
};

struct MetricsSummary {
  int runs = 0;
  RunStat precision;
  RunStat recall;
  RunStat f1;
  RunStat tp;
  RunStat fp;
  RunStat fn;

  nlohmann::json to_json() const;
};

RunStat mean_sd(std::span<const double> values);
MetricsSummary aggregate_runs(std::span<const Metrics> runs);

class AlignmentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct EvaluationReport {
  Metrics entity;
  std::vector<std::pair<Criterion, Metrics>> relation;

  const Metrics& relation_for(Criterion c) const;
  nlohmann::json to_json() const;
};

// Sentence-by-sentence comparison; documents and word sequences must line up.
EvaluationReport evaluate_corpus(const Corpus& gold, const Corpus& pred, const LabelSchema& schema,
                                 std::span<const Criterion> criteria);
Corpus predict_corpus(const Model& model, const Corpus& corpus);
EvaluationReport evaluate_model(const Model& model, const Corpus& gold, std::span<const Criterion> criteria);

std::vector<Criterion> all_criteria();
std::string render_report(const EvaluationReport& report);
std::string render_summary(const MetricsSummary& entity, std::span<const std::pair<Criterion, MetricsSummary>> relation);

}  // namespace tablefill
