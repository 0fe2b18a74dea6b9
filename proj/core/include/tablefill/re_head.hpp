#pragma once

#include <random>
#include <span>
#include <utility>
#include <vector>

#include "tablefill/data_model.hpp"
#include "tablefill/graph.hpp"
#include "tablefill/label_table.hpp"
#include "tablefill/ner_head.hpp"
#include "tablefill/params.hpp"

namespace tablefill {

// n x labels x dim tensor stored as an n x (labels * dim) matrix; slice (i, r, :)
// occupies columns [r * dim, (r + 1) * dim) of row i.
struct Tensor3 {
  int n = 0;
  int labels = 0;
  int dim = 0;
  Matrix data;

  Tensor3() = default;
  Tensor3(int n, int labels, int dim) : n(n), labels(labels), dim(dim), data(Matrix::Zero(n, labels * dim)) {}

  double& operator()(int i, int r, int k) { return data(i, r * dim + k); }
  double operator()(int i, int r, int k) const { return data(i, r * dim + k); }
};

// Softmax over relation labels for every cell i < j; other cells are masked out.
class RelScoreTable {
 public:
  RelScoreTable() = default;
  RelScoreTable(int n, int labels);

  int size() const { return n_; }
  int num_labels() const { return labels_; }
  static bool valid(int i, int j) { return i < j; }
  int num_valid_cells() const { return n_ * (n_ - 1) / 2; }

  double prob(int i, int j, int r) const;
  Eigen::Map<const Eigen::VectorXd> slice(int i, int j) const;
  Eigen::Map<Eigen::VectorXd> slice(int i, int j);

 private:
  std::size_t offset(int i, int j) const;

  int n_ = 0;
  int labels_ = 0;
  std::vector<double> probs_;
};

enum class Phase { kTrain, kPredict };

// Per-label logits Q_r K_r^T (n x n each) in one pass over the label axis.
std::vector<Matrix> relation_logits(const Matrix& q, const Matrix& k, int labels, int dim);

RelScoreTable score_all(const Tensor3& q, const Tensor3& k);
// Summed cross-entropy over all i < j cells; NONE cells count as the negative class.
double re_loss(const RelScoreTable& scores, const LabelTable& gold);
// Per-cell argmax; ties go to the lowest label id.
CellGrid decode_relations_once(const RelScoreTable& scores);
std::vector<RelationTriple> triples_from_scores(const RelScoreTable& scores, std::span<const EntitySpan> spans,
                                                const LabelSchema& schema,
                                                RelAggregation aggregation = RelAggregation::kLastLastCell);

// Cells by distance from the diagonal, then top-left to bottom-right.
std::vector<std::pair<int, int>> history_order(int n);

// Training-time loss over all cells with optional additive per-cell logits
// (m x labels, cells enumerated row-major over i < j). Returns 1x1.
Var relation_cell_loss(Graph& g, Var q, Var k, int labels, int dim, const CellGrid& gold, Var extra_logits = {});

struct HistoryOptions {
  bool enabled = false;
  int d_hist = 20;
};

// Off-diagonal cells: per-label query/key projections of [z_i ; l_{y_i}] scored
// by dot products, all cells at once.
class ReHead {
 public:
  ReHead(ParamStore& store, int num_labels, int d_model, Param& label_embeddings, int d_att, HistoryOptions history,
         std::mt19937_64& rng);

  int num_labels() const { return num_labels_; }
  int d_model() const { return d_model_; }
  int d_att() const { return d_att_; }
  int d_rel() const { return d_model_ + static_cast<int>(label_embeddings_->value.cols()); }
  bool has_history() const { return hist_embeddings_ != nullptr; }

  Param& query_weight() { return *wq_; }
  Param& key_weight() { return *wk_; }
  Param& query_bias() { return *bq_; }
  Param& key_bias() { return *bk_; }
  Param* history_weight() { return hist_weight_; }
  Param* history_embeddings() { return hist_embeddings_; }

  // Training: z_i = e_i. Prediction: z_i = max over the span containing i.
  static RowVector span_feature(int i, const Matrix& words, const SpanIndex& spans, Phase phase);
  RowVector rel_input(const RowVector& z, int entity_label) const;
  Matrix rel_inputs(const Matrix& words, std::span<const int> entity_labels, const SpanIndex& spans,
                    Phase phase) const;

  std::pair<Tensor3, Tensor3> build_qk(const Matrix& h) const;
  RelScoreTable score(const Matrix& h) const;
  // Sequential variant conditioned on already-decoded neighbours (i, j-1) and (i+1, j).
  CellGrid decode_history(const Matrix& h) const;

  // Teacher-forced loss: gold entity labels, z_i = e_i, gold neighbours for the history variant.
  Var loss(Graph& g, Var words, std::span<const int> gold_entity_labels, const LabelTable& gold,
           LossReduction reduction = LossReduction::kSum, const Dropout& dropout = {}) const;

 private:
  int num_labels_;
  int d_model_;
  int d_att_;
  Param* label_embeddings_;
  Param* wq_;
  Param* bq_;
  Param* wk_;
  Param* bk_;
  Param* hist_embeddings_ = nullptr;  // (labels + 1) x d_hist, last row is the null neighbour
  Param* hist_weight_ = nullptr;      // labels x 2 d_hist
};

}  // namespace tablefill
