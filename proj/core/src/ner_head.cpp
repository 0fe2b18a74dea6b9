#include "tablefill/ner_head.hpp"

#include <stdexcept>

namespace tablefill {

std::string to_string(LossReduction r) { return r == LossReduction::kSum ? "sum" : "mean"; }

LossReduction loss_reduction_from_string(std::string_view s) {
  if (s == "sum") return LossReduction::kSum;
  if (s == "mean") return LossReduction::kMean;
  throw std::invalid_argument("unknown loss reduction: " + std::string(s));
}

Dropout::Dropout(double rate, std::mt19937_64* rng) : rate_(rate), rng_(rng) {
  if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout rate must lie in [0, 1)");
}

Matrix Dropout::mask(Eigen::Index rows, Eigen::Index cols) const {
  if (!active()) return Matrix::Ones(rows, cols);
  std::bernoulli_distribution keep(1.0 - rate_);
  const double scale = 1.0 / (1.0 - rate_);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = keep(*rng_) ? scale : 0.0;
  }
  return m;
}

Var Dropout::apply(Graph& g, Var x) const {
  if (!active()) return x;
  return ops::mul_const(g, x, mask(g.value(x).rows(), g.value(x).cols()));
}

int OnlineSpanTracker::push(int label) {
  const int i = next_++;
  auto tag = schema_->tag_of(label);
  auto close = [&] { open_start_ = open_type_ = -1; };
  if (!tag) {
    close();
    return i;
  }
  const int type = schema_->type_of(label);
  switch (*tag) {
    case Bilou::kBegin:
      open_start_ = i;
      open_type_ = type;
      return i;
    case Bilou::kInside:
      if (open_start_ < 0 || open_type_ != type) {
        open_start_ = i;
        open_type_ = type;
      }
      return open_start_;
    case Bilou::kLast: {
      const int first = (open_start_ >= 0 && open_type_ == type) ? open_start_ : i;
      close();
      return first;
    }
    case Bilou::kUnit:
      close();
      return i;
  }
  return i;
}

NerHead::NerHead(ParamStore& store, int num_labels, int d_model, Param& label_embeddings, NerFlags flags,
                 std::mt19937_64& rng)
    : num_labels_(num_labels), d_model_(d_model), flags_(flags), label_embeddings_(&label_embeddings) {
  if (label_embeddings.value.rows() != num_labels) {
    throw std::invalid_argument("label embedding table must have one row per entity label");
  }
  weight_ = &store.add("ner.W_ent", xavier_uniform(num_labels, feature_dim(), rng), ParamGroup::kHeads);
  bias_ = &store.add("ner.b_ent", Matrix::Zero(1, num_labels), ParamGroup::kHeads, false);
}

int NerHead::feature_dim() const {
  return d_model_ + (flags_.use_label_feature ? d_label() : 0) + (flags_.use_span_feature ? d_model_ : 0);
}

RowVector NerHead::feature(int i, const Matrix& words, const RowVector& start, std::span<const int> prev_labels,
                           std::span<const int> prev_first) const {
  const int n = static_cast<int>(words.rows());
  if (i < 0 || i >= n) throw std::out_of_range("NER feature index out of range");
  if (words.cols() != d_model_ || start.size() != d_model_) throw std::invalid_argument("NER feature: width mismatch");
  if (static_cast<int>(prev_labels.size()) < i || static_cast<int>(prev_first.size()) < i) {
    throw std::invalid_argument("NER feature: history shorter than the position");
  }

  RowVector h(feature_dim());
  int c = 0;
  h.segment(c, d_model_) = words.row(i);
  c += d_model_;
  if (flags_.use_label_feature) {
    const int prev = i == 0 ? LabelSchema::kOutside : prev_labels[i - 1];
    h.segment(c, d_label()) = label_embeddings_->value.row(prev);
    c += d_label();
  }
  if (flags_.use_span_feature) {
    if (i == 0) {
      h.segment(c, d_model_) = start;
    } else {
      const int first = prev_first[i - 1];
      h.segment(c, d_model_) = pool_word(words.middleRows(first, i - first), PoolingMode::kMax);
    }
  }
  return h;
}

Eigen::VectorXd NerHead::step(const RowVector& feature) const {
  if (feature.size() != feature_dim()) throw std::invalid_argument("NER step: feature dimension mismatch");
  Eigen::VectorXd logits = weight_->value * feature.transpose() + bias_->value.transpose();
  const double mx = logits.maxCoeff();
  Eigen::VectorXd p = (logits.array() - mx).exp();
  return p / p.sum();
}

NerDecodeResult NerHead::decode(const Matrix& words, const RowVector& start, const LabelSchema& schema,
                                BilouRepair repair) const {
  if (schema.num_entity_labels() != num_labels_) throw std::invalid_argument("schema does not match the NER head");
  const int n = static_cast<int>(words.rows());
  NerDecodeResult out;
  std::vector<int> firsts;
  OnlineSpanTracker tracker(schema);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd p = step(feature(i, words, start, out.labels, firsts));
    Eigen::Index best = 0;
    p.maxCoeff(&best);  // first maximum, i.e. lowest label id on ties
    out.labels.push_back(static_cast<int>(best));
    firsts.push_back(tracker.push(static_cast<int>(best)));
  }
  out.spans = spans_from_bilou(out.labels, schema, repair);
  out.span_index = span_index(out.spans, n);
  return out;
}

Var NerHead::logits(Graph& g, Var words, Var start, std::span<const int> gold_labels, const SpanIndex& gold_spans,
                    const Dropout& dropout) const {
  using namespace ops;
  const int n = static_cast<int>(g.value(words).rows());
  if (g.value(words).cols() != d_model_) throw std::invalid_argument("NER loss: word embedding width mismatch");
  if (static_cast<int>(gold_labels.size()) != n || gold_spans.size() != n) {
    throw std::invalid_argument("NER loss: gold labels do not match the sentence length");
  }

  std::vector<Var> parts{dropout.apply(g, words)};
  if (flags_.use_label_feature) {
    std::vector<int> prev(n, LabelSchema::kOutside);
    for (int i = 1; i < n; ++i) prev[i] = gold_labels[i - 1];
    parts.push_back(gather_rows(g, g.param(*label_embeddings_), prev));
  }
  if (flags_.use_span_feature) {
    // Row 0 is the start marker, row k + 1 is word k.
    std::vector<Var> rows{start, words};
    Var padded = concat_rows(g, rows);
    std::vector<RowRange> ranges(n);
    ranges[0] = {0, 1};
    for (int i = 1; i < n; ++i) ranges[i] = {gold_spans.first[i - 1] + 1, i + 1};
    parts.push_back(dropout.apply(g, pool_rows(g, padded, ranges, PoolingMode::kMax)));
  }
  Var h = parts.size() == 1 ? parts.front() : concat_cols(g, parts);
  return add_row(g, matmul_nt(g, h, g.param(*weight_)), g.param(*bias_));
}

Var NerHead::loss(Graph& g, Var words, Var start, std::span<const int> gold_labels, const SpanIndex& gold_spans,
                  LossReduction reduction, const Dropout& dropout) const {
  Var l = ops::softmax_cross_entropy(g, logits(g, words, start, gold_labels, gold_spans, dropout), gold_labels);
  if (reduction == LossReduction::kMean) l = ops::scale(g, l, 1.0 / static_cast<double>(gold_labels.size()));
  return l;
}

}  // namespace tablefill
