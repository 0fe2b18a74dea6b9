// Acceptance checks. Prints one PASS/FAIL line per criterion; exits non-zero on any failure.
// Usage: tablefill_acceptance [criterion numbers...]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "tablefill/commands.hpp"
#include "tablefill/evaluator.hpp"
#include "tablefill/label_table.hpp"
#include "tablefill/model.hpp"
#include "tablefill/re_head.hpp"
#include "tablefill/trainer.hpp"
#include "test_support.hpp"

using namespace tablefill;
namespace tt = tablefill::testing;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && failures_++ < 5) notes_ << (notes_.tellp() > 0 ? "; " : "") << what;
  }
  Outcome done(const std::string& summary) const {
    if (failures_ == 0) return {true, summary};
    return {false, summary + " | " + std::to_string(failures_) + " failure(s): " + notes_.str()};
  }

 private:
  int failures_ = 0;
  std::ostringstream notes_;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

TrainConfig smoke_train(int epochs = 200) {
  TrainConfig t;
  t.epochs = epochs;
  t.batch_size = 4;
  t.lr_encoder = 1e-3;
  t.lr_heads = 1e-2;
  t.dropout = 0.1;
  t.warmup_fraction = 0.1;
  t.weight_decay = 0.0;
  return t;
}

// 1. Analytic gradients against central differences on a toy model.
Outcome gradient_correctness() {
  const Corpus corpus = sample_corpus();
  std::vector<Sentence> sample;
  for (const Document& d : corpus) {
    for (const Sentence& s : d.sentences) {
      if (s.size() >= 2 && s.size() <= 6 && sample.size() < 3) sample.push_back(s);
    }
  }
  Check c;
  double worst = 0.0;
  std::string worst_block;
  for (bool history : {false, true}) {
    ModelConfig mc = ModelConfig::toy();
    mc.history.enabled = history;
    Model m = Model::from_corpus(mc, corpus);
    if (history) m.re().history_weight()->value.setConstant(0.05);
    GradCheckReport r = grad_check(m, sample);
    c.expect(r.passed, std::string(history ? "history" : "once") + " variant: " + r.worst_block + " " +
                           fmt(r.max_rel_error));
    if (r.max_rel_error > worst) {
      worst = r.max_rel_error;
      worst_block = r.worst_block;
    }
  }
  return c.done("max relative error " + fmt(worst) + " (" + worst_block + ") over " + std::to_string(sample.size()) +
                " sentences, d_model 16");
}

// 2. Batched scoring against the per-cell loop; decoding against per-cell argmax.
Outcome scoring_oracle() {
  std::mt19937_64 rng(2024);
  Check c;
  double max_diff = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 8);
    const int labels = 1 + static_cast<int>(rng() % 7);
    const int dim = 1 + static_cast<int>(rng() % 6);
    Tensor3 q = tt::random_tensor(rng, n, labels, dim);
    Tensor3 k = tt::random_tensor(rng, n, labels, dim);
    // Integer-valued instances create exact ties.
    if (trial % 4 == 0) {
      for (Eigen::Index i = 0; i < q.data.size(); ++i) {
        q.data.data()[i] = std::round(q.data.data()[i]);
        k.data.data()[i] = std::round(k.data.data()[i]);
      }
    }
    RelScoreTable t = score_all(q, k);
    CellGrid grid = decode_relations_once(t);
    auto ref = tt::naive_probs(q, k);
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        int best = 0;
        for (int r = 0; r < labels; ++r) {
          max_diff = std::max(max_diff, std::abs(t.prob(i, j, r) - ref[i][j][r]));
          if (ref[i][j][r] > ref[i][j][best]) best = r;
        }
        c.expect(grid.at(i, j) == best, "argmax mismatch at trial " + std::to_string(trial));
      }
    }
  }
  c.expect(max_diff <= 1e-12, "max probability difference " + fmt(max_diff));
  return c.done("100 instances, max |diff| " + fmt(max_diff));
}

// 3. Annotation -> table -> annotation is the identity.
Outcome table_round_trip() {
  std::mt19937_64 rng(77);
  const LabelSchema schema = tt::random_schema();
  Check c;
  int relations = 0;
  for (int trial = 0; trial < 200; ++trial) {
    Sentence s = tt::random_sentence(rng, schema);
    relations += static_cast<int>(s.relations.size());
    LabelTable t = build_gold_table(s, schema);
    auto spans = spans_from_bilou(t.diag, schema);
    for (RelAggregation a : {RelAggregation::kLastLastCell, RelAggregation::kMajorityVote}) {
      auto triples = triples_from_cells(t.grid(), spans, schema, a);
      Sentence back = to_annotated_sentence(s.words, spans, triples, schema);
      c.expect(tt::entity_set(back) == tt::entity_set(s), "entities differ at sentence " + std::to_string(trial));
      c.expect(tt::relation_set(back) == tt::relation_set(s),
               "relations differ at sentence " + std::to_string(trial) + " under " + to_string(a));
    }
  }
  return c.done("200 sentences, " + std::to_string(relations) + " relations, both aggregation policies");
}

// 4. The worked example sentence.
Outcome worked_example() {
  const LabelSchema schema = tt::example_schema();
  const Sentence s = tt::example_sentence();
  LabelTable t = build_gold_table(s, schema);
  Check c;
  std::vector<std::string> diag;
  for (int l : t.diag) diag.push_back(schema.entity_label_name(l));
  c.expect(diag == std::vector<std::string>{"B-Person", "L-Person", "O", "O", "U-Location"}, "diagonal");
  const int live_in = schema.relation_label(0, Direction::kForward);
  c.expect(schema.relation_label_name(live_in) == "->LiveIn", "label name");
  for (int i = 0; i < 5; ++i) {
    for (int j = i + 1; j < 5; ++j) {
      const bool expected = (i == 0 || i == 1) && j == 4;
      c.expect(t.relation_at(i, j) == (expected ? live_in : LabelSchema::kNoRelation),
               "cell (" + std::to_string(i) + "," + std::to_string(j) + ")");
    }
  }
  SpanIndex idx = span_index(spans_from_bilou(t.diag, schema), 5);
  c.expect(idx.first == std::vector<int>{0, 0, 2, 3, 4}, "first");
  c.expect(idx.last == std::vector<int>{1, 1, 2, 3, 4}, "last");
  return c.done("diag B-Person L-Person O O U-Location, cells (0,4) (1,4) ->LiveIn");
}

// 5. The toy model memorises the smoke corpus.
Outcome overfit_smoke() {
  const Corpus corpus = sample_corpus();
  Model m = Model::from_corpus(ModelConfig::toy(), corpus);
  FitResult r = fit(m, corpus, &corpus, smoke_train());
  EvaluationReport e = evaluate_model(m, corpus, all_criteria());
  const double rel = e.relation_for(Criterion::kAceStrict).f1;
  Check c;
  c.expect(e.entity.f1 == 1.0, "entity F1 " + fmt(e.entity.f1));
  c.expect(rel >= 0.95, "relation F1 " + fmt(rel));
  return c.done("entity F1 " + fmt(e.entity.f1) + ", relation F1 (ace_strict) " + fmt(rel) + " at epoch " +
                std::to_string(r.best_epoch) + " of 200");
}

// 6. Warmup then cosine decay.
Outcome schedule_check() {
  Check c;
  const long total = 1000;
  const double base = 3e-4;
  c.expect(lr_at(0, total, base, 0.2) == 0.0, "step 0");
  c.expect(std::abs(lr_at(200, total, base, 0.2) - base) < 1e-15, "boundary");
  c.expect(std::abs(lr_at(total, total, base, 0.2)) < 1e-15, "end");
  c.expect(std::abs(lr_at(600, total, base, 0.2) - base / 2) < 1e-15, "cosine midpoint");
  // Continuity: both sides of the boundary approach base.
  const long fine = 10'000'000;
  const long boundary = fine / 5;
  const double left = lr_at(boundary - 1, fine, base, 0.2);
  const double right = lr_at(boundary + 1, fine, base, 0.2);
  c.expect(std::abs(left - base) < 1e-9 && std::abs(right - base) < 1e-9,
           "jump at boundary " + fmt(left) + " vs " + fmt(right));
  double prev = 0.0;
  for (long s = 1; s <= 200; ++s) {
    const double v = lr_at(s, total, base, 0.2);
    c.expect(v > prev, "warmup not increasing");
    prev = v;
  }
  for (long s = 201; s <= total; ++s) {
    const double v = lr_at(s, total, base, 0.2);
    c.expect(v < prev, "decay not decreasing");
    prev = v;
  }
  return c.done("0 -> base at 0.2 total -> 0, boundary gap " + fmt(std::abs(right - left)));
}

// 7. Hand-counted metric fixtures and the strict <= boundary property.
Outcome metric_correctness() {
  Check c;
  const EntitySpan per{0, 2, 1}, loc{4, 5, 0}, org{6, 7, 2};
  const std::vector<EntitySpan> gold{per, loc};
  Metrics half = entity_metrics(gold, std::vector<EntitySpan>{per, {3, 5, 0}});
  c.expect(half.precision == 0.5 && half.recall == 0.5 && half.f1 == 0.5, "half match");
  Metrics over = entity_metrics(std::vector<EntitySpan>{per}, std::vector<EntitySpan>{per, loc});
  c.expect(over.precision == 0.5 && over.recall == 1.0 && std::abs(over.f1 - 2.0 / 3.0) < 1e-15, "over-prediction");
  Metrics none = entity_metrics(std::vector<EntitySpan>{}, std::vector<EntitySpan>{});
  c.expect(none.precision == 0.0 && none.recall == 0.0 && none.f1 == 0.0, "empty");

  const std::vector<RelationTriple> g{{per, loc, 0}, {per, org, 1}};
  const std::vector<RelationTriple> p{{{0, 2, 2}, loc, 0}, {per, org, 1}};
  Metrics strict = relation_metrics(g, p, Criterion::kAceStrict);
  Metrics boundary = relation_metrics(g, p, Criterion::kAceBoundary);
  c.expect(strict.tp == 1 && strict.fp == 1 && strict.fn == 1 && strict.f1 == 0.5, "strict fixture");
  c.expect(boundary.tp == 2 && boundary.f1 == 1.0, "boundary fixture");

  std::mt19937_64 rng(31);
  const LabelSchema schema = tt::random_schema();
  int violations = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Sentence gs = tt::random_sentence(rng, schema);
    // Predictions share the words and perturb types and relations.
    Sentence ps = gs;
    for (auto& e : ps.entities) {
      if (rng() % 3 == 0) e.etype = schema.entity_types()[rng() % schema.entity_types().size()];
    }
    if (!ps.relations.empty() && rng() % 2 == 0) ps.relations.pop_back();
    const auto gt = relation_triples(gs, schema);
    const auto pt = relation_triples(ps, schema);
    if (relation_metrics(gt, pt, Criterion::kAceStrict).f1 > relation_metrics(gt, pt, Criterion::kAceBoundary).f1) {
      ++violations;
    }
  }
  c.expect(violations == 0, std::to_string(violations) + " strict > boundary");
  return c.done("fixtures exact, strict <= boundary on 100 random pairs");
}

// 8. Packing documents into segments.
Outcome multi_sentence_packing() {
  std::mt19937_64 rng(8);
  const LabelSchema schema = tt::random_schema();
  Check c;
  Corpus docs;
  for (int d = 0; d < 25; ++d) {
    Document doc{"doc" + std::to_string(d), {}};
    const int k = 1 + static_cast<int>(rng() % 20);
    for (int i = 0; i < k; ++i) doc.sentences.push_back(tt::random_sentence(rng, schema, 30));
    docs.push_back(doc);
  }
  ModelConfig mc = ModelConfig::toy();
  mc.encoder.max_positions = 256;
  mc.multi_sentence = true;
  mc.max_segment_tokens = 256;
  Model m = Model::from_corpus(mc, docs);
  int segments = 0, largest = 0;
  for (const Document& doc : docs) {
    SegmentPlan plan = segment_document(doc, 256, m.encoder().splitter());
    c.expect(plan.warnings.empty(), "unexpected over-length sentence");
    std::vector<int> order;
    for (const Segment& seg : plan.segments) {
      ++segments;
      largest = std::max(largest, seg.size());
      c.expect(seg.size() <= 256, "segment of " + std::to_string(seg.size()) + " tokens");
      for (std::size_t k = 0; k < seg.sentence_ids.size(); ++k) {
        const int sid = seg.sentence_ids[k];
        order.push_back(sid);
        const AlignedSentence& a = seg.aligned[k];
        c.expect(a.words == doc.sentences[sid].words, "aligned words differ");
        for (int w = 0; w < static_cast<int>(a.words.size()); ++w) {
          RowRange rows = seg.word_rows(static_cast<int>(k), w);
          for (int r = rows.begin; r < rows.end; ++r) {
            const TokenOrigin& o = seg.origin[r];
            const int sub = a.spans[w].first + (r - rows.begin);
            c.expect(o.sentence == sid && o.subword == sub, "origin mismatch");
            c.expect(seg.position_of(sid, sub) == r, "position_of mismatch");
          }
        }
      }
    }
    std::vector<int> expected(doc.sentences.size());
    for (std::size_t i = 0; i < expected.size(); ++i) expected[i] = static_cast<int>(i);
    c.expect(order == expected, "sentence order");

    DocumentPrediction p = m.predict(doc);
    c.expect(p.sentences.size() == doc.sentences.size(), "prediction count");
    for (std::size_t k = 0; k < p.sentences.size() && k < doc.sentences.size(); ++k) {
      c.expect(static_cast<int>(p.sentences[k].entity_labels.size()) == doc.sentences[k].size(),
               "label count differs from word count");
      for (const EntitySpan& e : p.sentences[k].spans) c.expect(e.end <= doc.sentences[k].size(), "span overflow");
    }
  }
  return c.done(std::to_string(docs.size()) + " documents, " + std::to_string(segments) + " segments, largest " +
                std::to_string(largest) + " tokens");
}

// 9. Training uses per-word features, prediction pools over the span.
Outcome train_predict_asymmetry() {
  Matrix words(4, 3);
  words << 1.0, 0.0, 2.0,  //
      0.5, 3.0, -1.0,      //
      0.0, 0.0, 0.0,       //
      -2.0, 1.0, 1.0;
  const LabelSchema schema = tt::example_schema();
  const Sentence s{{"Johanson", "Smith", "lives", "here"}, {{0, 2, "Person"}}, {}};
  SpanIndex idx = span_index(entity_spans(s, schema), 4);
  Check c;
  RowVector t0 = ReHead::span_feature(0, words, idx, Phase::kTrain);
  RowVector t1 = ReHead::span_feature(1, words, idx, Phase::kTrain);
  RowVector p0 = ReHead::span_feature(0, words, idx, Phase::kPredict);
  RowVector p1 = ReHead::span_feature(1, words, idx, Phase::kPredict);
  c.expect(t0 != t1, "training features coincide");
  c.expect(t0 == words.row(0) && t1 == words.row(1), "training feature is not the word row");
  c.expect(p0 == p1, "prediction features differ inside the span");
  c.expect(p0 == RowVector(words.topRows(2).colwise().maxCoeff()), "prediction feature is not the span max");
  c.expect(ReHead::span_feature(3, words, idx, Phase::kPredict) == words.row(3), "unit span");
  return c.done("train z differ inside the span, predict z identical (span max)");
}

// 10. Feature ablations change the NER input width and still train.
Outcome ablation_plumbing() {
  const Corpus corpus = sample_corpus();
  Check c;
  std::ostringstream summary;
  const int d_model = ModelConfig::toy().encoder.d_model;
  const int d_label = ModelConfig::toy().d_label;
  struct Variant {
    const char* name;
    NerFlags flags;
    int width;
  };
  const Variant variants[] = {{"full", {true, true}, 2 * d_model + d_label},
                              {"-Label", {false, true}, 2 * d_model},
                              {"-Span", {true, false}, d_model + d_label},
                              {"-Both", {false, false}, d_model}};
  for (const Variant& v : variants) {
    ModelConfig mc = ModelConfig::toy();
    mc.ner_flags = v.flags;
    Model m = Model::from_corpus(mc, corpus);
    c.expect(m.ner().feature_dim() == v.width, std::string(v.name) + " width " + std::to_string(m.ner().feature_dim()));
    c.expect(m.ner().weight().value.cols() == v.width, std::string(v.name) + " weight shape");
    FitResult r = fit(m, corpus, &corpus, smoke_train());
    EvaluationReport e = evaluate_model(m, corpus, all_criteria());
    const double rel = e.relation_for(Criterion::kAceStrict).f1;
    const double first = r.epochs.front().train_loss;
    const double last = r.epochs.back().train_loss;
    c.expect(last < 0.1 * first, std::string(v.name) + " loss " + fmt(first) + " -> " + fmt(last));
    c.expect(e.entity.f1 >= 0.95 && rel >= 0.9,
             std::string(v.name) + " entity F1 " + fmt(e.entity.f1) + " relation F1 " + fmt(rel));
    summary << (summary.tellp() > 0 ? ", " : "") << v.name << " d_ent " << v.width << " ent " << fmt(e.entity.f1)
            << " rel " << fmt(rel);
  }
  return c.done(summary.str());
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"gradient correctness", gradient_correctness},
      {"scoring oracle equivalence", scoring_oracle},
      {"table round-trip", table_round_trip},
      {"worked example table", worked_example},
      {"overfit smoke test", overfit_smoke},
      {"learning-rate schedule", schedule_check},
      {"metric correctness", metric_correctness},
      {"multi-sentence packing", multi_sentence_packing},
      {"train/predict span asymmetry", train_predict_asymmetry},
      {"ablation plumbing", ablation_plumbing},
  };
  // Runtime budgets in seconds; 0 means none.
  const double budgets[] = {60, 10, 10, 0, 300, 0, 0, 0, 0, 0};

  std::set<int> selected;
  for (int a = 1; a < argc; ++a) selected.insert(std::atoi(argv[a]));

  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (budgets[k] > 0 && secs > budgets[k]) {
      o.pass = false;
      o.detail += " | over the " + fmt(budgets[k]) + " s budget";
    }
    if (!o.pass) ++failed;
    std::printf("%s  %2d  %-30s %7.2fs  %s\n", o.pass ? "PASS" : "FAIL", id, criteria[k].first, secs,
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
