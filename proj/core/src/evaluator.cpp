#include "tablefill/evaluator.hpp"

#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>
#include <tuple>

#include "tablefill/model.hpp"

namespace tablefill {

std::string to_string(Criterion c) {
  switch (c) {
    case Criterion::kConllExact:
      return "conll_exact";
    case Criterion::kAceBoundary:
      return "ace_boundary";
    case Criterion::kAceStrict:
      return "ace_strict";
  }
  return "conll_exact";
}

Criterion criterion_from_string(std::string_view s) {
  if (s == "conll_exact") return Criterion::kConllExact;
  if (s == "ace_boundary") return Criterion::kAceBoundary;
  if (s == "ace_strict") return Criterion::kAceStrict;
  throw std::invalid_argument("unknown criterion: " + std::string(s));
}

std::vector<Criterion> all_criteria() { return {Criterion::kConllExact, Criterion::kAceBoundary, Criterion::kAceStrict}; }

Metrics Metrics::from_counts(long tp, long fp, long fn) {
  if (tp < 0 || fp < 0 || fn < 0) throw std::invalid_argument("metric counts must be non-negative");
  Metrics m;
  m.tp = tp;
  m.fp = fp;
  m.fn = fn;
  m.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  m.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  m.f1 = m.precision + m.recall == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

Metrics& Metrics::operator+=(const Metrics& other) {
  *this = from_counts(tp + other.tp, fp + other.fp, fn + other.fn);
  return *this;
}

nlohmann::json Metrics::to_json() const {
  return {{"tp", tp}, {"fp", fp}, {"fn", fn}, {"precision", precision}, {"recall", recall}, {"f1", f1}};
}

namespace {

template <typename Key>
Metrics count_sets(const std::set<Key>& gold, const std::set<Key>& pred) {
  long tp = 0;
  for (const Key& k : pred) tp += gold.count(k) ? 1 : 0;
  return Metrics::from_counts(tp, static_cast<long>(pred.size()) - tp, static_cast<long>(gold.size()) - tp);
}

using BoundaryKey = std::tuple<int, int, int, int, int>;

BoundaryKey boundary_key(const RelationTriple& t) { return {t.head.start, t.head.end, t.tail.start, t.tail.end, t.rtype}; }

}  // namespace

Metrics entity_metrics(std::span<const EntitySpan> gold, std::span<const EntitySpan> pred) {
  return count_sets(std::set<EntitySpan>(gold.begin(), gold.end()), std::set<EntitySpan>(pred.begin(), pred.end()));
}

Metrics entity_metrics(std::span<const std::vector<EntitySpan>> gold, std::span<const std::vector<EntitySpan>> pred) {
  if (gold.size() != pred.size()) throw AlignmentError("entity_metrics: sentence counts differ");
  Metrics total;
  for (std::size_t k = 0; k < gold.size(); ++k) total += entity_metrics(gold[k], pred[k]);
  return total;
}

Metrics relation_metrics(std::span<const RelationTriple> gold, std::span<const RelationTriple> pred,
                         Criterion criterion) {
  if (criterion == Criterion::kAceStrict) {
    return count_sets(std::set<RelationTriple>(gold.begin(), gold.end()),
                      std::set<RelationTriple>(pred.begin(), pred.end()));
  }
  std::set<BoundaryKey> g, p;
  for (const auto& t : gold) g.insert(boundary_key(t));
  for (const auto& t : pred) p.insert(boundary_key(t));
  return count_sets(g, p);
}

Metrics relation_metrics(std::span<const std::vector<RelationTriple>> gold,
                         std::span<const std::vector<RelationTriple>> pred, Criterion criterion) {
  if (gold.size() != pred.size()) throw AlignmentError("relation_metrics: sentence counts differ");
  Metrics total;
  for (std::size_t k = 0; k < gold.size(); ++k) total += relation_metrics(gold[k], pred[k], criterion);
  return total;
}

RunStat mean_sd(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("mean_sd: no values");
  RunStat s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - s.mean) * (v - s.mean);
  s.sd = std::sqrt(var / static_cast<double>(values.size()));
  return s;
}

MetricsSummary aggregate_runs(std::span<const Metrics> runs) {
  if (runs.empty()) throw std::invalid_argument("aggregate_runs: empty run list");
  auto field = [&](auto get) {
    std::vector<double> v;
    for (const Metrics& m : runs) v.push_back(static_cast<double>(get(m)));
    return mean_sd(v);
  };
  MetricsSummary s;
  s.runs = static_cast<int>(runs.size());
  s.precision = field([](const Metrics& m) { return m.precision; });
  s.recall = field([](const Metrics& m) { return m.recall; });
  s.f1 = field([](const Metrics& m) { return m.f1; });
  s.tp = field([](const Metrics& m) { return m.tp; });
  s.fp = field([](const Metrics& m) { return m.fp; });
  s.fn = field([](const Metrics& m) { return m.fn; });
  return s;
}

nlohmann::json MetricsSummary::to_json() const {
  auto stat = [](const RunStat& s) { return nlohmann::json{{"mean", s.mean}, {"sd", s.sd}}; };
  return {{"runs", runs},        {"precision", stat(precision)}, {"recall", stat(recall)}, {"f1", stat(f1)},
          {"tp", stat(tp)},      {"fp", stat(fp)},               {"fn", stat(fn)}};
}

const Metrics& EvaluationReport::relation_for(Criterion c) const {
  for (const auto& [criterion, m] : relation) {
    if (criterion == c) return m;
  }
  throw std::out_of_range("criterion not in report: " + to_string(c));
}

nlohmann::json EvaluationReport::to_json() const {
  nlohmann::json rel = nlohmann::json::object();
  for (const auto& [c, m] : relation) rel[to_string(c)] = m.to_json();
  return {{"entity", entity.to_json()}, {"relation", rel}};
}

EvaluationReport evaluate_corpus(const Corpus& gold, const Corpus& pred, const LabelSchema& schema,
                                 std::span<const Criterion> criteria) {
  if (gold.size() != pred.size()) {
    throw AlignmentError("document counts differ: gold " + std::to_string(gold.size()) + ", predicted " +
                         std::to_string(pred.size()));
  }
  std::vector<std::vector<EntitySpan>> ge, pe;
  std::vector<std::vector<RelationTriple>> gr, pr;
  for (std::size_t d = 0; d < gold.size(); ++d) {
    const Document& gd = gold[d];
    const Document& pd = pred[d];
    if (gd.id != pd.id) throw AlignmentError("document " + std::to_string(d) + ": id '" + gd.id + "' vs '" + pd.id + "'");
    if (gd.sentences.size() != pd.sentences.size()) {
      throw AlignmentError("document '" + gd.id + "': sentence counts differ");
    }
    for (std::size_t k = 0; k < gd.sentences.size(); ++k) {
      if (gd.sentences[k].words != pd.sentences[k].words) {
        throw AlignmentError("document '" + gd.id + "' sentence " + std::to_string(k) + ": words differ");
      }
      ge.push_back(entity_spans(gd.sentences[k], schema));
      pe.push_back(entity_spans(pd.sentences[k], schema));
      gr.push_back(relation_triples(gd.sentences[k], schema));
      pr.push_back(relation_triples(pd.sentences[k], schema));
    }
  }
  EvaluationReport r;
  r.entity = entity_metrics(ge, pe);
  for (Criterion c : criteria) r.relation.emplace_back(c, relation_metrics(gr, pr, c));
  return r;
}

Corpus predict_corpus(const Model& model, const Corpus& corpus) {
  Corpus out;
  out.reserve(corpus.size());
  for (const Document& doc : corpus) {
    DocumentPrediction p = model.predict(doc);
    Document d{doc.id, {}};
    for (std::size_t k = 0; k < doc.sentences.size(); ++k) {
      const auto& s = p.sentences[k];
      d.sentences.push_back(to_annotated_sentence(doc.sentences[k].words, s.spans, s.triples, model.schema()));
    }
    out.push_back(std::move(d));
  }
  return out;
}

EvaluationReport evaluate_model(const Model& model, const Corpus& gold, std::span<const Criterion> criteria) {
  return evaluate_corpus(gold, predict_corpus(model, gold), model.schema(), criteria);
}

namespace {

std::string pct(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(1) << 100.0 * v;
  return s.str();
}

}  // namespace

std::string render_report(const EvaluationReport& report) {
  std::ostringstream out;
  out << std::left << std::setw(22) << "" << std::right << std::setw(7) << "P" << std::setw(7) << "R" << std::setw(7)
      << "F1" << std::setw(8) << "tp" << std::setw(8) << "fp" << std::setw(8) << "fn" << '\n';
  auto row = [&](const std::string& name, const Metrics& m) {
    out << std::left << std::setw(22) << name << std::right << std::setw(7) << pct(m.precision) << std::setw(7)
        << pct(m.recall) << std::setw(7) << pct(m.f1) << std::setw(8) << m.tp << std::setw(8) << m.fp << std::setw(8)
        << m.fn << '\n';
  };
  row("entity", report.entity);
  for (const auto& [c, m] : report.relation) row("relation " + to_string(c), m);
  return out.str();
}

std::string render_summary(const MetricsSummary& entity,
                           std::span<const std::pair<Criterion, MetricsSummary>> relation) {
  std::ostringstream out;
  out << std::left << std::setw(22) << "" << std::right << std::setw(7) << "P" << std::setw(7) << "R" << std::setw(7)
      << "F1" << std::setw(8) << "SD" << "   (" << entity.runs << " runs)\n";
  auto row = [&](const std::string& name, const MetricsSummary& m) {
    out << std::left << std::setw(22) << name << std::right << std::setw(7) << pct(m.precision.mean) << std::setw(7)
        << pct(m.recall.mean) << std::setw(7) << pct(m.f1.mean) << std::setw(8) << pct(m.f1.sd) << '\n';
  };
  row("entity", entity);
  for (const auto& [c, m] : relation) row("relation " + to_string(c), m);
  return out.str();
}

}  // namespace tablefill
