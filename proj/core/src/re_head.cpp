#include "tablefill/re_head.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tablefill {

namespace {

void softmax_inplace(Eigen::Ref<Eigen::VectorXd> v) {
  const double mx = v.maxCoeff();
  v = (v.array() - mx).exp();
  v /= v.sum();
}

int argmax_lowest(const Eigen::Ref<const Eigen::VectorXd>& v) {
  Eigen::Index best = 0;
  v.maxCoeff(&best);
  return static_cast<int>(best);
}

}  // namespace

RelScoreTable::RelScoreTable(int n, int labels)
    : n_(n), labels_(labels), probs_(static_cast<std::size_t>(n) * n * labels, 0.0) {}

std::size_t RelScoreTable::offset(int i, int j) const {
  if (!(0 <= i && i < j && j < n_)) {
    throw std::out_of_range("masked relation cell (" + std::to_string(i) + "," + std::to_string(j) + ")");
  }
  return (static_cast<std::size_t>(i) * n_ + j) * labels_;
}

double RelScoreTable::prob(int i, int j, int r) const {
  if (r < 0 || r >= labels_) throw std::out_of_range("relation label out of range");
  return probs_[offset(i, j) + r];
}

Eigen::Map<const Eigen::VectorXd> RelScoreTable::slice(int i, int j) const {
  return Eigen::Map<const Eigen::VectorXd>(probs_.data() + offset(i, j), labels_);
}

Eigen::Map<Eigen::VectorXd> RelScoreTable::slice(int i, int j) {
  return Eigen::Map<Eigen::VectorXd>(probs_.data() + offset(i, j), labels_);
}

std::vector<Matrix> relation_logits(const Matrix& q, const Matrix& k, int labels, int dim) {
  if (q.rows() != k.rows() || q.cols() != labels * dim || k.cols() != labels * dim) {
    throw std::invalid_argument("query/key tensors are not conformant");
  }
  std::vector<Matrix> out(labels);
  for (int r = 0; r < labels; ++r) {
    out[r].noalias() = q.middleCols(r * dim, dim) * k.middleCols(r * dim, dim).transpose();
  }
  return out;
}

RelScoreTable score_all(const Tensor3& q, const Tensor3& k) {
  if (q.n != k.n || q.labels != k.labels || q.dim != k.dim) throw std::invalid_argument("score_all: shape mismatch");
  const auto logits = relation_logits(q.data, k.data, q.labels, q.dim);
  RelScoreTable table(q.n, q.labels);
  for (int i = 0; i < q.n; ++i) {
    for (int j = i + 1; j < q.n; ++j) {
      auto cell = table.slice(i, j);
      for (int r = 0; r < q.labels; ++r) cell(r) = logits[r](i, j);
      softmax_inplace(cell);
    }
  }
  return table;
}

double re_loss(const RelScoreTable& scores, const LabelTable& gold) {
  if (scores.size() != gold.n) throw std::invalid_argument("re_loss: table sizes differ");
  double loss = 0.0;
  for (int i = 0; i < gold.n; ++i) {
    for (int j = i + 1; j < gold.n; ++j) loss -= std::log(scores.prob(i, j, gold.relation_at(i, j)));
  }
  return loss;
}

CellGrid decode_relations_once(const RelScoreTable& scores) {
  CellGrid grid(scores.size());
  for (int i = 0; i < scores.size(); ++i) {
    for (int j = i + 1; j < scores.size(); ++j) grid.set(i, j, argmax_lowest(scores.slice(i, j)));
  }
  return grid;
}

std::vector<RelationTriple> triples_from_scores(const RelScoreTable& scores, std::span<const EntitySpan> spans,
                                                const LabelSchema& schema, RelAggregation aggregation) {
  return triples_from_cells(decode_relations_once(scores), spans, schema, aggregation);
}

std::vector<std::pair<int, int>> history_order(int n) {
  std::vector<std::pair<int, int>> order;
  for (int d = 1; d < n; ++d) {
    for (int i = 0; i + d < n; ++i) order.emplace_back(i, i + d);
  }
  return order;
}

Var relation_cell_loss(Graph& g, Var q, Var k, int labels, int dim, const CellGrid& gold, Var extra_logits) {
  const Matrix& qv = g.value(q);
  const Matrix& kv = g.value(k);
  const int n = static_cast<int>(qv.rows());
  if (gold.size() != n) throw std::invalid_argument("relation loss: gold table size differs from the sentence");
  const auto logits = relation_logits(qv, kv, labels, dim);
  const int cells = n * (n - 1) / 2;
  if (extra_logits.valid() && (g.value(extra_logits).rows() != cells || g.value(extra_logits).cols() != labels)) {
    throw std::invalid_argument("relation loss: extra logits have the wrong shape");
  }

  Matrix delta(cells, labels);
  double loss = 0.0;
  int c = 0;
  Eigen::VectorXd cell(labels);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j, ++c) {
      for (int r = 0; r < labels; ++r) cell(r) = logits[r](i, j);
      if (extra_logits.valid()) cell += g.value(extra_logits).row(c).transpose();
      const double mx = cell.maxCoeff();
      const double lse = mx + std::log((cell.array() - mx).exp().sum());
      const int target = gold.at(i, j);
      loss += lse - cell(target);
      delta.row(c) = (cell.array() - lse).exp().transpose();
      delta(c, target) -= 1.0;
    }
  }

  std::vector<Var> inputs{q, k};
  if (extra_logits.valid()) inputs.push_back(extra_logits);
  return g.emit(Matrix::Constant(1, 1, loss), inputs,
                [q, k, labels, dim, n, delta, extra_logits](Graph& gr, const Matrix& G) {
                  const double s = G(0, 0);
                  if (extra_logits.valid()) gr.accumulate(extra_logits, s * delta);
                  const Matrix& qv = gr.value(q);
                  const Matrix& kv = gr.value(k);
                  Matrix dq = Matrix::Zero(qv.rows(), qv.cols());
                  Matrix dk = Matrix::Zero(kv.rows(), kv.cols());
                  Matrix gr_r(n, n);
                  for (int r = 0; r < labels; ++r) {
                    gr_r.setZero();
                    int c = 0;
                    for (int i = 0; i < n; ++i) {
                      for (int j = i + 1; j < n; ++j, ++c) gr_r(i, j) = s * delta(c, r);
                    }
                    dq.middleCols(r * dim, dim).noalias() += gr_r * kv.middleCols(r * dim, dim);
                    dk.middleCols(r * dim, dim).noalias() += gr_r.transpose() * qv.middleCols(r * dim, dim);
                  }
                  gr.accumulate(q, dq);
                  gr.accumulate(k, dk);
                });
}

ReHead::ReHead(ParamStore& store, int num_labels, int d_model, Param& label_embeddings, int d_att,
               HistoryOptions history, std::mt19937_64& rng)
    : num_labels_(num_labels), d_model_(d_model), d_att_(d_att), label_embeddings_(&label_embeddings) {
  if (d_att < 1) throw std::invalid_argument("d_att must be positive");
  const int rows = num_labels * d_att;
  wq_ = &store.add("re.W_q", xavier_uniform(rows, d_rel(), rng), ParamGroup::kHeads);
  bq_ = &store.add("re.b_q", Matrix::Zero(1, rows), ParamGroup::kHeads, false);
  wk_ = &store.add("re.W_k", xavier_uniform(rows, d_rel(), rng), ParamGroup::kHeads);
  bk_ = &store.add("re.b_k", Matrix::Zero(1, rows), ParamGroup::kHeads, false);
  if (history.enabled) {
    if (history.d_hist < 1) throw std::invalid_argument("d_hist must be positive");
    hist_embeddings_ = &store.add("re.history.label_embeddings",
                                  random_normal(num_labels + 1, history.d_hist, 0.1, rng), ParamGroup::kHeads);
    hist_weight_ = &store.add("re.history.W", Matrix::Zero(num_labels, 2 * history.d_hist), ParamGroup::kHeads);
  }
}

RowVector ReHead::span_feature(int i, const Matrix& words, const SpanIndex& spans, Phase phase) {
  if (i < 0 || i >= words.rows() || i >= spans.size()) throw std::out_of_range("span feature index out of range");
  if (phase == Phase::kTrain) return words.row(i);
  const int first = spans.first[i];
  const int last = spans.last[i];
  if (!(0 <= first && first <= i && i <= last && last < words.rows())) {
    throw std::out_of_range("span index inconsistent with position");
  }
  return pool_word(words.middleRows(first, last - first + 1), PoolingMode::kMax);
}

RowVector ReHead::rel_input(const RowVector& z, int entity_label) const {
  if (entity_label < 0 || entity_label >= label_embeddings_->value.rows()) {
    throw std::out_of_range("unknown entity label id " + std::to_string(entity_label));
  }
  if (z.size() != d_model_) throw std::invalid_argument("rel_input: span feature width mismatch");
  RowVector h(d_rel());
  h << z, label_embeddings_->value.row(entity_label);
  return h;
}

Matrix ReHead::rel_inputs(const Matrix& words, std::span<const int> entity_labels, const SpanIndex& spans,
                          Phase phase) const {
  const int n = static_cast<int>(words.rows());
  if (static_cast<int>(entity_labels.size()) != n) throw std::invalid_argument("rel_inputs: label count mismatch");
  Matrix h(n, d_rel());
  for (int i = 0; i < n; ++i) h.row(i) = rel_input(span_feature(i, words, spans, phase), entity_labels[i]);
  return h;
}

std::pair<Tensor3, Tensor3> ReHead::build_qk(const Matrix& h) const {
  if (h.cols() != d_rel()) throw std::invalid_argument("build_qk: relation input width mismatch");
  const int n = static_cast<int>(h.rows());
  Tensor3 q(n, num_labels_, d_att_);
  Tensor3 k(n, num_labels_, d_att_);
  q.data = h * wq_->value.transpose();
  q.data.rowwise() += Eigen::Map<const RowVector>(bq_->value.data(), bq_->value.size());
  k.data = h * wk_->value.transpose();
  k.data.rowwise() += Eigen::Map<const RowVector>(bk_->value.data(), bk_->value.size());
  return {std::move(q), std::move(k)};
}

RelScoreTable ReHead::score(const Matrix& h) const {
  auto [q, k] = build_qk(h);
  return score_all(q, k);
}

CellGrid ReHead::decode_history(const Matrix& h) const {
  if (!has_history()) throw std::logic_error("history-based relation decoding is not enabled for this model");
  auto [q, k] = build_qk(h);
  const auto logits = relation_logits(q.data, k.data, num_labels_, d_att_);
  const int n = static_cast<int>(h.rows());
  const int null_row = num_labels_;
  const Matrix& emb = hist_embeddings_->value;
  const int dh = static_cast<int>(emb.cols());
  CellGrid grid(n);
  Eigen::VectorXd cell(num_labels_);
  RowVector neighbours(2 * dh);
  for (auto [i, j] : history_order(n)) {
    const int left = j - 1 > i ? grid.at(i, j - 1) : null_row;
    const int below = i + 1 < j ? grid.at(i + 1, j) : null_row;
    neighbours << emb.row(left), emb.row(below);
    for (int r = 0; r < num_labels_; ++r) cell(r) = logits[r](i, j);
    cell += hist_weight_->value * neighbours.transpose();
    grid.set(i, j, argmax_lowest(cell));
  }
  return grid;
}

Var ReHead::loss(Graph& g, Var words, std::span<const int> gold_entity_labels, const LabelTable& gold,
                 LossReduction reduction, const Dropout& dropout) const {
  using namespace ops;
  const int n = static_cast<int>(g.value(words).rows());
  if (n < 2) throw std::invalid_argument("relation loss needs at least two words");
  if (static_cast<int>(gold_entity_labels.size()) != n || gold.n != n) {
    throw std::invalid_argument("relation loss: gold table does not match the sentence");
  }
  std::vector<Var> parts{dropout.apply(g, words), gather_rows(g, g.param(*label_embeddings_), gold_entity_labels)};
  Var h = concat_cols(g, parts);
  Var q = add_row(g, matmul_nt(g, h, g.param(*wq_)), g.param(*bq_));
  Var k = add_row(g, matmul_nt(g, h, g.param(*wk_)), g.param(*bk_));
  const CellGrid grid = gold.grid();

  Var extra;
  if (has_history()) {
    const int null_row = num_labels_;
    std::vector<int> left;
    std::vector<int> below;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        left.push_back(j - 1 > i ? grid.at(i, j - 1) : null_row);
        below.push_back(i + 1 < j ? grid.at(i + 1, j) : null_row);
      }
    }
    Var table = g.param(*hist_embeddings_);
    std::vector<Var> nb{gather_rows(g, table, left), gather_rows(g, table, below)};
    extra = matmul_nt(g, concat_cols(g, nb), g.param(*hist_weight_));
  }

  Var l = relation_cell_loss(g, q, k, num_labels_, d_att_, grid, extra);
  if (reduction == LossReduction::kMean) l = scale(g, l, 2.0 / (static_cast<double>(n) * (n - 1)));
  return l;
}

}  // namespace tablefill
