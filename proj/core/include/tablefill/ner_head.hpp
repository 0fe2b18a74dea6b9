#pragma once

#include <random>
#include <span>
#include <vector>

#include "tablefill/data_model.hpp"
#include "tablefill/graph.hpp"
#include "tablefill/label_table.hpp"
#include "tablefill/params.hpp"

namespace tablefill {

// Feature ablations of the entity representation; both on is the full model.
struct NerFlags {
  bool use_label_feature = true;
  bool use_span_feature = true;

  bool operator==(const NerFlags&) const = default;
};

enum class LossReduction { kSum, kMean };

std::string to_string(LossReduction r);
LossReduction loss_reduction_from_string(std::string_view s);

// Inverted dropout. A rate of 0 or a null generator makes it the identity.
class Dropout {
 public:
  Dropout() = default;
  Dropout(double rate, std::mt19937_64* rng);

  bool active() const { return rng_ != nullptr && rate_ > 0.0; }
  Matrix mask(Eigen::Index rows, Eigen::Index cols) const;
  Var apply(Graph& g, Var x) const;

 private:
  double rate_ = 0.0;
  std::mt19937_64* rng_ = nullptr;
};

// Tracks first(i) while labels are produced left to right: O, U and L close
// the current span, B opens one, I extends a span of the same type (and opens
// a new one on a type change).
class OnlineSpanTracker {
 public:
  explicit OnlineSpanTracker(const LabelSchema& schema) : schema_(&schema) {}

  // Records the label at the next position and returns first() for it.
  int push(int label);
  int position() const { return next_; }

 private:
  const LabelSchema* schema_;
  int next_ = 0;
  int open_start_ = -1;
  int open_type_ = -1;
};

struct NerDecodeResult {
  std::vector<int> labels;
  std::vector<EntitySpan> spans;
  SpanIndex span_index;
};

// Diagonal of the table: greedy left-to-right BILOU labeling with the current
// word, the previous label embedding and the max-pooled previous span as features.
class NerHead {
 public:
  NerHead(ParamStore& store, int num_labels, int d_model, Param& label_embeddings, NerFlags flags,
          std::mt19937_64& rng);

  int num_labels() const { return num_labels_; }
  int d_model() const { return d_model_; }
  int d_label() const { return static_cast<int>(label_embeddings_->value.cols()); }
  int feature_dim() const;
  const NerFlags& flags() const { return flags_; }

  Param& weight() { return *weight_; }
  Param& bias() { return *bias_; }
  const Param& weight() const { return *weight_; }
  const Param& bias() const { return *bias_; }

  // Feature for position i given labels and first() of positions < i.
  // `start` stands in for the word before position 0; the label before it is O.
  RowVector feature(int i, const Matrix& words, const RowVector& start, std::span<const int> prev_labels,
                    std::span<const int> prev_first) const;

  // Label distribution for one feature vector.
  Eigen::VectorXd step(const RowVector& feature) const;

  NerDecodeResult decode(const Matrix& words, const RowVector& start, const LabelSchema& schema,
                         BilouRepair repair = BilouRepair::kGreedyRepair) const;

  // Teacher-forced logits for every position (n x |labels|), features built from gold history.
  Var logits(Graph& g, Var words, Var start, std::span<const int> gold_labels, const SpanIndex& gold_spans,
             const Dropout& dropout = {}) const;

  // Cross-entropy of the gold labels under teacher forcing.
  Var loss(Graph& g, Var words, Var start, std::span<const int> gold_labels, const SpanIndex& gold_spans,
           LossReduction reduction = LossReduction::kSum, const Dropout& dropout = {}) const;

 private:
  int num_labels_;
  int d_model_;
  NerFlags flags_;
  Param* label_embeddings_;
  Param* weight_;
  Param* bias_;
};

}  // namespace tablefill
