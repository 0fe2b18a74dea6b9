#include <gtest/gtest.h>

#include <random>

#include "tablefill/label_table.hpp"
#include "test_support.hpp"

using namespace tablefill;
using tablefill::testing::example_schema;
using tablefill::testing::example_sentence;

namespace {

std::vector<int> labels(const LabelSchema& s, std::initializer_list<const char*> names) {
  std::vector<int> out;
  for (const char* n : names) out.push_back(s.entity_label_id(n));
  return out;
}

}  // namespace

TEST(GoldTable, WorkedExample) {
  const LabelSchema s = example_schema();
  LabelTable t = build_gold_table(example_sentence(), s);
  EXPECT_EQ(t.n, 5);
  EXPECT_EQ(t.diag, labels(s, {"B-Person", "L-Person", "O", "O", "U-Location"}));
  const int live_in = s.relation_label_id("->LiveIn");
  ASSERT_EQ(t.rel.size(), 2u);
  EXPECT_EQ(t.relation_at(0, 4), live_in);
  EXPECT_EQ(t.relation_at(1, 4), live_in);
  for (int i = 0; i < 5; ++i) {
    for (int j = i + 1; j < 5; ++j) {
      if (j != 4 || i > 1) EXPECT_EQ(t.relation_at(i, j), LabelSchema::kNoRelation) << i << "," << j;
    }
  }
}

TEST(GoldTable, NoAnnotations) {
  Sentence s{{"a", "b", "c"}, {}, {}};
  LabelTable t = build_gold_table(s, example_schema());
  EXPECT_EQ(t.diag, (std::vector<int>{0, 0, 0}));
  EXPECT_TRUE(t.rel.empty());
}

TEST(GoldTable, CrossProductOfSpans) {
  LabelSchema schema({"X"}, {"r"});
  Sentence s{{"a", "b", "c", "d", "e"}, {{0, 2, "X"}, {3, 5, "X"}}, {{0, 1, "r"}}};
  LabelTable t = build_gold_table(s, schema);
  std::set<std::pair<int, int>> cells;
  for (const auto& [cell, label] : t.rel) {
    cells.insert(cell);
    EXPECT_EQ(label, schema.relation_label(0, Direction::kForward));
  }
  EXPECT_EQ(cells, (std::set<std::pair<int, int>>{{0, 3}, {0, 4}, {1, 3}, {1, 4}}));
}

TEST(GoldTable, BackwardRelationPointsLeft) {
  LabelSchema schema({"X"}, {"r"});
  Sentence s{{"a", "b", "c"}, {{0, 1, "X"}, {2, 3, "X"}}, {{1, 0, "r"}}};
  LabelTable t = build_gold_table(s, schema);
  EXPECT_EQ(t.relation_at(0, 2), schema.relation_label(0, Direction::kBackward));
  const auto triples = triples_from_cells(t.grid(), entity_spans(s, schema), schema);
  ASSERT_EQ(triples.size(), 1u);
  EXPECT_EQ(triples[0].head, (EntitySpan{2, 3, 0}));
  EXPECT_EQ(triples[0].tail, (EntitySpan{0, 1, 0}));
}

TEST(GoldTable, ConflictingCellsAreRejected) {
  LabelSchema schema({"X"}, {"r", "s"});
  Sentence s{{"a", "b"}, {{0, 1, "X"}, {1, 2, "X"}}, {{0, 1, "r"}, {0, 1, "s"}}};
  try {
    build_gold_table(s, schema);
    FAIL() << "expected a conflict";
  } catch (const TableError& e) {
    EXPECT_EQ(e.kind(), TableError::Kind::kConflictingCell);
  }
}

TEST(GoldTable, NeverStoresLowerTriangle) {
  std::mt19937_64 rng(2);
  const LabelSchema schema = tablefill::testing::random_schema();
  for (int trial = 0; trial < 200; ++trial) {
    LabelTable t = build_gold_table(tablefill::testing::random_sentence(rng, schema), schema);
    for (const auto& [cell, label] : t.rel) {
      EXPECT_LT(cell.first, cell.second);
      EXPECT_NE(label, LabelSchema::kNoRelation);
    }
  }
}

TEST(SpansFromBilou, Examples) {
  const LabelSchema s = example_schema();
  const int per = *s.entity_type_id("Person");
  const int loc = *s.entity_type_id("Location");
  EXPECT_EQ(spans_from_bilou(labels(s, {"B-Person", "L-Person", "O", "O", "U-Location"}), s),
            (std::vector<EntitySpan>{{0, 2, per}, {4, 5, loc}}));
  EXPECT_TRUE(spans_from_bilou(labels(s, {"O", "O", "O"}), s).empty());

  const auto broken = labels(s, {"B-Person", "O", "L-Person"});
  EXPECT_TRUE(spans_from_bilou(broken, s, BilouRepair::kStrictDrop).empty());
  EXPECT_EQ(spans_from_bilou(broken, s, BilouRepair::kGreedyRepair),
            (std::vector<EntitySpan>{{0, 1, per}, {2, 3, per}}));
}

TEST(SpansFromBilou, RepairCases) {
  const LabelSchema s = example_schema();
  const int per = *s.entity_type_id("Person");
  const int loc = *s.entity_type_id("Location");
  auto greedy = [&](std::initializer_list<const char*> names) {
    return spans_from_bilou(labels(s, names), s, BilouRepair::kGreedyRepair);
  };
  auto strict = [&](std::initializer_list<const char*> names) {
    return spans_from_bilou(labels(s, names), s, BilouRepair::kStrictDrop);
  };
  EXPECT_EQ(greedy({"I-Person", "L-Person"}), (std::vector<EntitySpan>{{0, 2, per}}));
  EXPECT_TRUE(strict({"I-Person", "L-Person"}).empty());
  EXPECT_EQ(greedy({"B-Person", "I-Location", "L-Location"}), (std::vector<EntitySpan>{{0, 1, per}, {1, 3, loc}}));
  EXPECT_EQ(strict({"B-Person", "I-Location", "L-Location"}), (std::vector<EntitySpan>{}));
  EXPECT_EQ(greedy({"B-Person", "B-Person", "L-Person"}), (std::vector<EntitySpan>{{0, 1, per}, {1, 3, per}}));
  EXPECT_EQ(strict({"B-Person", "B-Person", "L-Person"}), (std::vector<EntitySpan>{{1, 3, per}}));
  EXPECT_EQ(greedy({"B-Person", "I-Person"}), (std::vector<EntitySpan>{{0, 2, per}}));
  EXPECT_EQ(greedy({"U-Person", "U-Person"}), (std::vector<EntitySpan>{{0, 1, per}, {1, 2, per}}));
  EXPECT_EQ(strict({"B-Person", "I-Person", "I-Person", "L-Person", "U-Location"}),
            (std::vector<EntitySpan>{{0, 4, per}, {4, 5, loc}}));
}

TEST(SpansFromBilou, TotalOnRandomLabels) {
  const LabelSchema s = tablefill::testing::random_schema();
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 10);
    std::vector<int> ls(n);
    for (int& l : ls) l = static_cast<int>(rng() % s.num_entity_labels());
    for (auto policy : {BilouRepair::kStrictDrop, BilouRepair::kGreedyRepair}) {
      auto spans = spans_from_bilou(ls, s, policy);
      for (std::size_t k = 0; k < spans.size(); ++k) {
        EXPECT_LT(spans[k].start, spans[k].end);
        EXPECT_LE(spans[k].end, n);
        if (k > 0) EXPECT_LE(spans[k - 1].end, spans[k].start);
      }
    }
  }
}

TEST(SpansFromBilou, InvertsEncoding) {
  const LabelSchema s = tablefill::testing::random_schema();
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 12);
    auto spans = tablefill::testing::random_spans(rng, n, 3);
    auto encoded = bilou_encode(spans, n, s);
    EXPECT_EQ(spans_from_bilou(encoded, s, BilouRepair::kGreedyRepair), spans);
    EXPECT_EQ(spans_from_bilou(encoded, s, BilouRepair::kStrictDrop), spans);
  }
}

TEST(SpanIndex, Examples) {
  SpanIndex idx = span_index(std::vector<EntitySpan>{{0, 2, 1}, {4, 5, 0}}, 5);
  EXPECT_EQ(idx.first, (std::vector<int>{0, 0, 2, 3, 4}));
  EXPECT_EQ(idx.last, (std::vector<int>{1, 1, 2, 3, 4}));

  SpanIndex none = span_index(std::vector<EntitySpan>{}, 3);
  EXPECT_EQ(none.first, (std::vector<int>{0, 1, 2}));
  EXPECT_EQ(none.last, (std::vector<int>{0, 1, 2}));

  SpanIndex all = span_index(std::vector<EntitySpan>{{0, 4, 0}}, 4);
  EXPECT_EQ(all.first, (std::vector<int>{0, 0, 0, 0}));
  EXPECT_EQ(all.last, (std::vector<int>{3, 3, 3, 3}));

  EXPECT_THROW(span_index(std::vector<EntitySpan>{{2, 5, 0}}, 4), TableError);
}

TEST(TriplesFromCells, AggregationPolicies) {
  LabelSchema schema({"X"}, {"r"});
  const int fwd = schema.relation_label(0, Direction::kForward);
  std::vector<EntitySpan> spans{{0, 2, 0}, {3, 4, 0}};
  CellGrid cells(4);
  cells.set(0, 3, fwd);
  EXPECT_TRUE(triples_from_cells(cells, spans, schema, RelAggregation::kLastLastCell).empty());
  auto voted = triples_from_cells(cells, spans, schema, RelAggregation::kMajorityVote);
  ASSERT_EQ(voted.size(), 1u);
  EXPECT_EQ(voted[0], (RelationTriple{spans[0], spans[1], 0}));

  EXPECT_TRUE(triples_from_cells(CellGrid(4), spans, schema, RelAggregation::kMajorityVote).empty());
}

TEST(TriplesFromCells, VoteTiesGoToLowestId) {
  LabelSchema schema({"X"}, {"a", "b"});
  std::vector<EntitySpan> spans{{0, 2, 0}, {2, 3, 0}};
  CellGrid cells(3);
  cells.set(0, 2, schema.relation_label(1, Direction::kForward));
  cells.set(1, 2, schema.relation_label(0, Direction::kForward));
  auto t = triples_from_cells(cells, spans, schema, RelAggregation::kMajorityVote);
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t[0].rtype, 0);
}

TEST(TriplesFromCells, WorkedExampleGoldCells) {
  const LabelSchema s = example_schema();
  const Sentence sent = example_sentence();
  const auto spans = entity_spans(sent, s);
  const auto triples = triples_from_cells(build_gold_table(sent, s).grid(), spans, s);
  ASSERT_EQ(triples.size(), 1u);
  EXPECT_EQ(triples[0].head, (EntitySpan{0, 2, *s.entity_type_id("Person")}));
  EXPECT_EQ(triples[0].tail, (EntitySpan{4, 5, *s.entity_type_id("Location")}));
  EXPECT_EQ(triples[0].rtype, 0);
}

TEST(TableRoundTrip, RandomSentences) {
  const LabelSchema schema = tablefill::testing::random_schema();
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    const Sentence s = tablefill::testing::random_sentence(rng, schema);
    const LabelTable t = build_gold_table(s, schema);
    const auto spans = spans_from_bilou(t.diag, schema);
    for (auto agg : {RelAggregation::kLastLastCell, RelAggregation::kMajorityVote}) {
      const auto triples = triples_from_cells(t.grid(), spans, schema, agg);
      const Sentence back = to_annotated_sentence(s.words, spans, triples, schema);
      EXPECT_EQ(tablefill::testing::entity_set(back), tablefill::testing::entity_set(s));
      EXPECT_EQ(tablefill::testing::relation_set(back), tablefill::testing::relation_set(s));
    }
  }
}

TEST(RenderTable, WorkedExampleLayout) {
  const LabelSchema s = example_schema();
  const Sentence sent = example_sentence();
  const std::string text = render_table(build_gold_table(sent, s), sent.words, s);
  const std::string expected =
      "          Johanson  Smith     lives  in  London\n"
      "Johanson  B-Person  .         .      .   ->LiveIn\n"
      "Smith               L-Person  .      .   ->LiveIn\n"
      "lives                         O      .   .\n"
      "in                                   O   .\n"
      "London                                   U-Location\n";
  EXPECT_EQ(text, expected);
}

TEST(CellGrid, RejectsInvalidCells) {
  CellGrid g(3);
  EXPECT_THROW(g.at(1, 1), std::out_of_range);
  EXPECT_THROW(g.set(2, 1, 1), std::out_of_range);
  EXPECT_THROW(g.at(0, 3), std::out_of_range);
}

TEST(DecodePolicy, Names) {
  EXPECT_EQ(rel_aggregation_from_string("last"), RelAggregation::kLastLastCell);
  EXPECT_EQ(rel_aggregation_from_string("vote"), RelAggregation::kMajorityVote);
  EXPECT_EQ(rel_aggregation_from_string(to_string(RelAggregation::kMajorityVote)), RelAggregation::kMajorityVote);
  EXPECT_EQ(bilou_repair_from_string(to_string(BilouRepair::kStrictDrop)), BilouRepair::kStrictDrop);
  EXPECT_THROW(rel_aggregation_from_string("first"), std::invalid_argument);
}
