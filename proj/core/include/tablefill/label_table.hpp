#pragma once

#include <compare>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tablefill/data_model.hpp"

namespace tablefill {

struct EntitySpan {
  int start = 0;
  int end = 0;  // exclusive
  int type = 0;

  int last() const { return end - 1; }
  auto operator<=>(const EntitySpan&) const = default;
};

struct RelationTriple {
  EntitySpan head;
  EntitySpan tail;
  int rtype = 0;

  auto operator<=>(const RelationTriple&) const = default;
};

// first[i] / last[i]: inclusive bounds of the entity span containing position i.
// Positions outside any entity are unit spans.
struct SpanIndex {
  std::vector<int> first;
  std::vector<int> last;

  int size() const { return static_cast<int>(first.size()); }
  bool operator==(const SpanIndex&) const = default;
};

enum class BilouRepair { kStrictDrop, kGreedyRepair };
enum class RelAggregation { kLastLastCell, kMajorityVote };

struct DecodePolicy {
  BilouRepair bilou_repair = BilouRepair::kGreedyRepair;
  RelAggregation rel_aggregation = RelAggregation::kLastLastCell;
};

std::string to_string(BilouRepair r);
std::string to_string(RelAggregation a);
BilouRepair bilou_repair_from_string(std::string_view s);
RelAggregation rel_aggregation_from_string(std::string_view s);

// Dense n x n grid of relation label ids; only cells with i < j are meaningful.
class CellGrid {
 public:
  CellGrid() = default;
  explicit CellGrid(int n, int fill = LabelSchema::kNoRelation) : n_(n), cells_(static_cast<std::size_t>(n) * n, fill) {}

  int size() const { return n_; }
  int at(int i, int j) const;
  void set(int i, int j, int label);

  bool operator==(const CellGrid&) const = default;

 private:
  void check(int i, int j) const;

  int n_ = 0;
  std::vector<int> cells_;
};

class TableError : public std::invalid_argument {
 public:
  enum class Kind { kOverlappingSpans, kInterleavedSpans, kConflictingCell, kOutOfRange };
  TableError(Kind kind, const std::string& what) : std::invalid_argument(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// Upper-triangular label table: diagonal entity labels plus sparse relation cells (absent = NONE).
struct LabelTable {
  int n = 0;
  std::vector<int> diag;
  std::map<std::pair<int, int>, int> rel;

  int relation_at(int i, int j) const;
  CellGrid grid() const;
};

std::vector<EntitySpan> entity_spans(const Sentence& sentence, const LabelSchema& schema);
std::vector<RelationTriple> relation_triples(const Sentence& sentence, const LabelSchema& schema);

std::vector<int> bilou_encode(std::span<const EntitySpan> spans, int n, const LabelSchema& schema);

// Relations are copied onto every cell of the cross product of their argument spans,
// pointing forward when the head precedes the tail and backward otherwise.
LabelTable build_gold_table(const Sentence& sentence, const LabelSchema& schema);

// Total function. Output is sorted and non-overlapping.
std::vector<EntitySpan> spans_from_bilou(std::span<const int> labels, const LabelSchema& schema,
                                         BilouRepair repair = BilouRepair::kGreedyRepair);

SpanIndex span_index(std::span<const EntitySpan> spans, int n);

std::vector<RelationTriple> triples_from_cells(const CellGrid& cells, std::span<const EntitySpan> spans,
                                               const LabelSchema& schema,
                                               RelAggregation aggregation = RelAggregation::kLastLastCell);

// Plain-text rendering: one row per word, NONE cells shown as ".".
std::string render_table(const LabelTable& table, std::span<const std::string> words, const LabelSchema& schema);

// Back to annotation form (entities in span order, relations sorted).
Sentence to_annotated_sentence(std::vector<std::string> words, std::span<const EntitySpan> spans,
                               std::span<const RelationTriple> triples, const LabelSchema& schema);

}  // namespace tablefill
