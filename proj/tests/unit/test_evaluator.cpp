#include <gtest/gtest.h>

#include <random>

#include "tablefill/evaluator.hpp"
#include "test_support.hpp"

using namespace tablefill;

namespace {

RelationTriple triple(EntitySpan h, EntitySpan t, int r) { return {h, t, r}; }

}  // namespace

TEST(Metrics, FromCounts) {
  Metrics m = Metrics::from_counts(1, 1, 1);
  EXPECT_DOUBLE_EQ(m.precision, 0.5);
  EXPECT_DOUBLE_EQ(m.recall, 0.5);
  EXPECT_DOUBLE_EQ(m.f1, 0.5);
  Metrics z = Metrics::from_counts(0, 0, 0);
  EXPECT_EQ(z.precision, 0.0);
  EXPECT_EQ(z.recall, 0.0);
  EXPECT_EQ(z.f1, 0.0);
  Metrics sum = m;
  sum += Metrics::from_counts(1, 0, 0);
  EXPECT_EQ(sum.tp, 2);
  EXPECT_NEAR(sum.f1, 2.0 / 3.0, 1e-12);
}

TEST(EntityMetrics, HandFixtures) {
  const std::vector<EntitySpan> gold{{0, 2, 1}, {4, 5, 0}};
  const std::vector<EntitySpan> half{{0, 2, 1}, {3, 5, 0}};
  Metrics m = entity_metrics(gold, half);
  EXPECT_DOUBLE_EQ(m.f1, 0.5);

  const std::vector<EntitySpan> one{{0, 2, 1}};
  const std::vector<EntitySpan> two{{0, 2, 1}, {3, 4, 0}};
  Metrics p = entity_metrics(one, two);
  EXPECT_DOUBLE_EQ(p.precision, 0.5);
  EXPECT_DOUBLE_EQ(p.recall, 1.0);
  EXPECT_NEAR(p.f1, 2.0 / 3.0, 1e-12);

  // Type mismatch is a miss; duplicates count once.
  const std::vector<EntitySpan> wrong_type{{0, 2, 0}, {0, 2, 0}};
  EXPECT_EQ(entity_metrics(one, wrong_type).tp, 0);
  EXPECT_EQ(entity_metrics(one, wrong_type).fp, 1);
}

TEST(RelationMetrics, StrictNeedsArgumentTypes) {
  const EntitySpan per{0, 2, 1}, loc{4, 5, 0};
  const std::vector<RelationTriple> gold{triple(per, loc, 0)};
  const std::vector<RelationTriple> retyped{triple({0, 2, 2}, loc, 0)};
  EXPECT_EQ(relation_metrics(gold, retyped, Criterion::kAceBoundary).tp, 1);
  EXPECT_EQ(relation_metrics(gold, retyped, Criterion::kConllExact).tp, 1);
  EXPECT_EQ(relation_metrics(gold, retyped, Criterion::kAceStrict).tp, 0);

  const std::vector<RelationTriple> other_rel{triple(per, loc, 1)};
  for (Criterion c : all_criteria()) EXPECT_EQ(relation_metrics(gold, other_rel, c).tp, 0);
  const std::vector<RelationTriple> swapped{triple(loc, per, 0)};
  for (Criterion c : all_criteria()) EXPECT_EQ(relation_metrics(gold, swapped, c).tp, 0);
}

TEST(RelationMetrics, Properties) {
  std::mt19937_64 rng(12);
  const LabelSchema schema = tablefill::testing::random_schema();
  for (int trial = 0; trial < 100; ++trial) {
    Sentence g = tablefill::testing::random_sentence(rng, schema, 10);
    Sentence p = tablefill::testing::random_sentence(rng, schema, 10);
    const auto gt = relation_triples(g, schema);
    const auto pt = relation_triples(p, schema);
    for (Criterion c : all_criteria()) {
      Metrics a = relation_metrics(gt, pt, c);
      Metrics b = relation_metrics(pt, gt, c);
      EXPECT_EQ(a.tp, b.tp);
      EXPECT_EQ(a.fp, b.fn);
      EXPECT_DOUBLE_EQ(a.f1, b.f1);
      EXPECT_GE(a.f1, 0.0);
      EXPECT_LE(a.f1, 1.0);
    }
    EXPECT_LE(relation_metrics(gt, pt, Criterion::kAceStrict).f1,
              relation_metrics(gt, pt, Criterion::kAceBoundary).f1 + 1e-15);
    EXPECT_DOUBLE_EQ(relation_metrics(gt, gt, Criterion::kAceStrict).f1, gt.empty() ? 0.0 : 1.0);
    const auto ge = entity_spans(g, schema);
    EXPECT_DOUBLE_EQ(entity_metrics(ge, ge).f1, ge.empty() ? 0.0 : 1.0);
  }
}

TEST(Aggregate, MeanAndPopulationSd) {
  const std::vector<double> v{0.70, 0.74};
  RunStat s = mean_sd(v);
  EXPECT_NEAR(s.mean, 0.72, 1e-12);
  EXPECT_NEAR(s.sd, 0.02, 1e-12);
  std::vector<Metrics> runs{Metrics::from_counts(7, 3, 3), Metrics::from_counts(9, 1, 1)};
  MetricsSummary m = aggregate_runs(runs);
  EXPECT_EQ(m.runs, 2);
  EXPECT_NEAR(m.f1.mean, 0.8, 1e-12);
  EXPECT_NEAR(m.f1.sd, 0.1, 1e-12);
  EXPECT_THROW(aggregate_runs(std::vector<Metrics>{}), std::invalid_argument);
  EXPECT_EQ(mean_sd(std::vector<double>{0.5}).sd, 0.0);
}

TEST(EvaluateCorpus, PerfectAndMisaligned) {
  Corpus gold{{"a", {tablefill::testing::example_sentence()}}};
  const LabelSchema schema = tablefill::testing::example_schema();
  EvaluationReport r = evaluate_corpus(gold, gold, schema, all_criteria());
  EXPECT_DOUBLE_EQ(r.entity.f1, 1.0);
  for (Criterion c : all_criteria()) EXPECT_DOUBLE_EQ(r.relation_for(c).f1, 1.0);

  Corpus empty_pred{{"a", {Sentence{tablefill::testing::example_sentence().words, {}, {}}}}};
  EvaluationReport e = evaluate_corpus(gold, empty_pred, schema, all_criteria());
  EXPECT_EQ(e.entity.fn, 2);
  EXPECT_EQ(e.entity.f1, 0.0);

  Corpus other_id{{"b", {tablefill::testing::example_sentence()}}};
  EXPECT_THROW(evaluate_corpus(gold, other_id, schema, all_criteria()), AlignmentError);
  Corpus other_words{{"a", {Sentence{{"x"}, {}, {}}}}};
  EXPECT_THROW(evaluate_corpus(gold, other_words, schema, all_criteria()), AlignmentError);
  Corpus extra{{"a", {tablefill::testing::example_sentence(), tablefill::testing::example_sentence()}}};
  EXPECT_THROW(evaluate_corpus(gold, extra, schema, all_criteria()), AlignmentError);
}

TEST(Criterion, StringConversion) {
  for (Criterion c : all_criteria()) EXPECT_EQ(criterion_from_string(to_string(c)), c);
  EXPECT_THROW(criterion_from_string("loose"), std::invalid_argument);
}
