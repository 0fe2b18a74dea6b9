#include "tablefill/label_table.hpp"
#include "tablefill/subword.hpp"

#include <algorithm>
#include <optional>
#include <sstream>

namespace tablefill {

std::string to_string(BilouRepair r) { return r == BilouRepair::kStrictDrop ? "strict_drop" : "greedy_repair"; }

std::string to_string(RelAggregation a) {
  return a == RelAggregation::kLastLastCell ? "last_last_cell" : "majority_vote";
}

BilouRepair bilou_repair_from_string(std::string_view s) {
  if (s == "strict_drop" || s == "strict") return BilouRepair::kStrictDrop;
  if (s == "greedy_repair" || s == "greedy") return BilouRepair::kGreedyRepair;
  throw std::invalid_argument("unknown BILOU repair policy: " + std::string(s));
}

RelAggregation rel_aggregation_from_string(std::string_view s) {
  if (s == "last_last_cell" || s == "last") return RelAggregation::kLastLastCell;
  if (s == "majority_vote" || s == "vote") return RelAggregation::kMajorityVote;
  throw std::invalid_argument("unknown relation aggregation: " + std::string(s));
}

void CellGrid::check(int i, int j) const {
  if (!(0 <= i && i < j && j < n_)) {
    throw std::out_of_range("relation cell (" + std::to_string(i) + "," + std::to_string(j) +
                            ") is not in the strict upper triangle of size " + std::to_string(n_));
  }
}

int CellGrid::at(int i, int j) const {
  check(i, j);
  return cells_[static_cast<std::size_t>(i) * n_ + j];
}

void CellGrid::set(int i, int j, int label) {
  check(i, j);
  cells_[static_cast<std::size_t>(i) * n_ + j] = label;
}

int LabelTable::relation_at(int i, int j) const {
  if (!(0 <= i && i < j && j < n)) throw std::out_of_range("relation cell outside the strict upper triangle");
  auto it = rel.find({i, j});
  return it == rel.end() ? LabelSchema::kNoRelation : it->second;
}

CellGrid LabelTable::grid() const {
  CellGrid g(n);
  for (const auto& [cell, label] : rel) g.set(cell.first, cell.second, label);
  return g;
}

std::vector<EntitySpan> entity_spans(const Sentence& sentence, const LabelSchema& schema) {
  std::vector<EntitySpan> spans;
  for (const auto& e : sentence.entities) {
    auto type = schema.entity_type_id(e.etype);
    if (!type) throw std::invalid_argument("unknown entity type: " + e.etype);
    spans.push_back({e.start, e.end, *type});
  }
  std::sort(spans.begin(), spans.end());
  return spans;
}

std::vector<RelationTriple> relation_triples(const Sentence& sentence, const LabelSchema& schema) {
  std::vector<RelationTriple> out;
  auto span_of = [&](int k) {
    const auto& e = sentence.entities.at(k);
    auto type = schema.entity_type_id(e.etype);
    if (!type) throw std::invalid_argument("unknown entity type: " + e.etype);
    return EntitySpan{e.start, e.end, *type};
  };
  for (const auto& r : sentence.relations) {
    auto rtype = schema.relation_type_id(r.rtype);
    if (!rtype) throw std::invalid_argument("unknown relation type: " + r.rtype);
    out.push_back({span_of(r.head), span_of(r.tail), *rtype});
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<int> bilou_encode(std::span<const EntitySpan> spans, int n, const LabelSchema& schema) {
  std::vector<int> labels(n, LabelSchema::kOutside);
  for (const auto& s : spans) {
    if (!(0 <= s.start && s.start < s.end && s.end <= n)) {
      throw TableError(TableError::Kind::kOutOfRange, "entity span out of range");
    }
    for (int i = s.start; i < s.end; ++i) {
      if (labels[i] != LabelSchema::kOutside) {
        throw TableError(TableError::Kind::kOverlappingSpans, "overlapping entity spans at position " + std::to_string(i));
      }
    }
    if (s.end - s.start == 1) {
      labels[s.start] = schema.entity_label(Bilou::kUnit, s.type);
      continue;
    }
    labels[s.start] = schema.entity_label(Bilou::kBegin, s.type);
    for (int i = s.start + 1; i < s.end - 1; ++i) labels[i] = schema.entity_label(Bilou::kInside, s.type);
    labels[s.end - 1] = schema.entity_label(Bilou::kLast, s.type);
  }
  return labels;
}

LabelTable build_gold_table(const Sentence& sentence, const LabelSchema& schema) {
  LabelTable table;
  table.n = sentence.size();
  std::vector<EntitySpan> spans;
  for (const auto& e : sentence.entities) {
    auto type = schema.entity_type_id(e.etype);
    if (!type) throw std::invalid_argument("unknown entity type: " + e.etype);
    spans.push_back({e.start, e.end, *type});
  }
  table.diag = bilou_encode(spans, table.n, schema);

  for (const auto& r : sentence.relations) {
    const EntitySpan& a = spans.at(r.head);
    const EntitySpan& b = spans.at(r.tail);
    auto rtype = schema.relation_type_id(r.rtype);
    if (!rtype) throw std::invalid_argument("unknown relation type: " + r.rtype);

    const EntitySpan* row = nullptr;
    const EntitySpan* col = nullptr;
    Direction dir{};
    if (a.end <= b.start) {
      row = &a, col = &b, dir = Direction::kForward;
    } else if (b.end <= a.start) {
      row = &b, col = &a, dir = Direction::kBackward;
    } else {
      throw TableError(TableError::Kind::kInterleavedSpans, "relation arguments are not ordered spans");
    }
    const int label = schema.relation_label(*rtype, dir);
    for (int i = row->start; i < row->end; ++i) {
      for (int j = col->start; j < col->end; ++j) {
        auto [it, inserted] = table.rel.emplace(std::make_pair(i, j), label);
        if (!inserted && it->second != label) {
          throw TableError(TableError::Kind::kConflictingCell,
                           "conflicting relation labels for cell (" + std::to_string(i) + "," + std::to_string(j) +
                               "): " + schema.relation_label_name(it->second) + " vs " +
                               schema.relation_label_name(label));
        }
      }
    }
  }
  return table;
}

std::vector<EntitySpan> spans_from_bilou(std::span<const int> labels, const LabelSchema& schema, BilouRepair repair) {
  std::vector<EntitySpan> spans;
  const int n = static_cast<int>(labels.size());

  if (repair == BilouRepair::kStrictDrop) {
    int i = 0;
    while (i < n) {
      auto tag = schema.tag_of(labels[i]);
      if (!tag) {
        ++i;
        continue;
      }
      const int type = schema.type_of(labels[i]);
      if (*tag == Bilou::kUnit) {
        spans.push_back({i, i + 1, type});
        ++i;
        continue;
      }
      if (*tag != Bilou::kBegin) {
        ++i;
        continue;
      }
      int j = i + 1;
      while (j < n && labels[j] == schema.entity_label(Bilou::kInside, type)) ++j;
      if (j < n && labels[j] == schema.entity_label(Bilou::kLast, type)) {
        spans.push_back({i, j + 1, type});
        i = j + 1;
      } else {
        // Ill-formed; resume at the first label that broke the pattern.
        i = j;
      }
    }
    return spans;
  }

  std::optional<EntitySpan> open;
  auto close = [&] {
    if (open) spans.push_back(*open);
    open.reset();
  };
  for (int i = 0; i < n; ++i) {
    auto tag = schema.tag_of(labels[i]);
    if (!tag) {
      close();
      continue;
    }
    const int type = schema.type_of(labels[i]);
    switch (*tag) {
      case Bilou::kBegin:
        close();
        open = EntitySpan{i, i + 1, type};
        break;
      case Bilou::kInside:
        if (open && open->type == type) {
          open->end = i + 1;
        } else {
          close();
          open = EntitySpan{i, i + 1, type};
        }
        break;
      case Bilou::kLast:
        if (open && open->type == type) {
          open->end = i + 1;
          close();
        } else {
          close();
          spans.push_back({i, i + 1, type});
        }
        break;
      case Bilou::kUnit:
        close();
        spans.push_back({i, i + 1, type});
        break;
    }
  }
  close();
  return spans;
}

SpanIndex span_index(std::span<const EntitySpan> spans, int n) {
  SpanIndex idx;
  idx.first.resize(n);
  idx.last.resize(n);
  for (int i = 0; i < n; ++i) idx.first[i] = idx.last[i] = i;
  std::vector<bool> covered(n, false);
  for (const auto& s : spans) {
    if (!(0 <= s.start && s.start < s.end && s.end <= n)) {
      throw TableError(TableError::Kind::kOutOfRange, "span (" + std::to_string(s.start) + "," +
                                                          std::to_string(s.end) + ") out of range for n=" +
                                                          std::to_string(n));
    }
    for (int i = s.start; i < s.end; ++i) {
      if (covered[i]) throw TableError(TableError::Kind::kOverlappingSpans, "overlapping spans in span index");
      covered[i] = true;
      idx.first[i] = s.start;
      idx.last[i] = s.end - 1;
    }
  }
  return idx;
}

std::vector<RelationTriple> triples_from_cells(const CellGrid& cells, std::span<const EntitySpan> spans,
                                               const LabelSchema& schema, RelAggregation aggregation) {
  std::vector<EntitySpan> ordered(spans.begin(), spans.end());
  std::sort(ordered.begin(), ordered.end());
  std::vector<RelationTriple> out;
  std::vector<int> votes(schema.num_relation_labels());

  for (std::size_t a = 0; a < ordered.size(); ++a) {
    for (std::size_t b = a + 1; b < ordered.size(); ++b) {
      const EntitySpan& s1 = ordered[a];
      const EntitySpan& s2 = ordered[b];
      int label = LabelSchema::kNoRelation;
      if (aggregation == RelAggregation::kLastLastCell) {
        label = cells.at(s1.last(), s2.last());
      } else {
        std::fill(votes.begin(), votes.end(), 0);
        for (int i = s1.start; i < s1.end; ++i) {
          for (int j = s2.start; j < s2.end; ++j) ++votes[cells.at(i, j)];
        }
        int best = 0;
        for (int r = 1; r < static_cast<int>(votes.size()); ++r) {
          if (votes[r] > best) best = votes[r], label = r;
        }
      }
      auto rel = schema.relation_of(label);
      if (!rel) continue;
      if (rel->second == Direction::kForward) {
        out.push_back({s1, s2, rel->first});
      } else {
        out.push_back({s2, s1, rel->first});
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string render_table(const LabelTable& table, std::span<const std::string> words, const LabelSchema& schema) {
  const int n = table.n;
  std::vector<std::vector<std::string>> cells(n, std::vector<std::string>(n));
  for (int i = 0; i < n; ++i) {
    cells[i][i] = schema.entity_label_name(table.diag.at(i));
    for (int j = i + 1; j < n; ++j) {
      const int label = table.relation_at(i, j);
      cells[i][j] = label == LabelSchema::kNoRelation ? "." : schema.relation_label_name(label);
    }
  }
  std::size_t head_width = 0;
  for (const auto& w : words) head_width = std::max(head_width, utf8_length(w));
  std::vector<std::size_t> width(n);
  for (int j = 0; j < n; ++j) {
    width[j] = utf8_length(words[j]);
    for (int i = 0; i <= j; ++i) width[j] = std::max(width[j], cells[i][j].size());
  }
  auto pad = [](std::ostringstream& os, const std::string& s, std::size_t w) {
    os << s;
    for (std::size_t k = utf8_length(s); k < w; ++k) os << ' ';
  };

  std::ostringstream os;
  pad(os, "", head_width);
  for (int j = 0; j < n; ++j) {
    os << "  ";
    pad(os, words[j], width[j]);
  }
  os << '\n';
  for (int i = 0; i < n; ++i) {
    pad(os, words[i], head_width);
    for (int j = 0; j < n; ++j) {
      os << "  ";
      pad(os, cells[i][j], width[j]);
    }
    os << '\n';
  }
  std::string text = os.str();
  // Trim trailing blanks on each line.
  std::string trimmed;
  std::istringstream lines(text);
  for (std::string line; std::getline(lines, line);) {
    line.erase(line.find_last_not_of(' ') + 1);
    trimmed += line + '\n';
  }
  return trimmed;
}

Sentence to_annotated_sentence(std::vector<std::string> words, std::span<const EntitySpan> spans,
                               std::span<const RelationTriple> triples, const LabelSchema& schema) {
  Sentence s;
  s.words = std::move(words);
  std::vector<EntitySpan> ordered(spans.begin(), spans.end());
  std::sort(ordered.begin(), ordered.end());
  for (const auto& sp : ordered) s.entities.push_back({sp.start, sp.end, schema.entity_types().at(sp.type)});
  auto index_of = [&](const EntitySpan& sp) {
    auto it = std::find(ordered.begin(), ordered.end(), sp);
    if (it == ordered.end()) throw std::invalid_argument("relation argument is not among the entity spans");
    return static_cast<int>(it - ordered.begin());
  };
  for (const auto& t : triples) {
    s.relations.push_back({index_of(t.head), index_of(t.tail), schema.relation_types().at(t.rtype)});
  }
  return s;
}

}  // namespace tablefill
