#pragma once

#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "tablefill/subword.hpp"

namespace tablefill {

struct Param;

// Handle to a node in a Graph.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Half-open range of rows [begin, end).
struct RowRange {
  int begin = 0;
  int end = 0;
};

// Tape-based reverse-mode differentiation over dense double matrices.
// Nodes are appended in evaluation order; backward() walks them in reverse.
// A Graph is single-use and not thread-safe; build one per forward pass.
class Graph {
 public:
  Var constant(Matrix value);
  // Leaf bound to a parameter. backward() accumulates into param.grad.
  Var param(Param& p);

  const Matrix& value(Var v) const { return nodes_.at(v.id).value; }
  double scalar(Var v) const;
  const Matrix& grad(Var v) const { return nodes_.at(v.id).grad; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  int size() const { return static_cast<int>(nodes_.size()); }

  // Seeds d(out)/d(out) = 1 for a 1x1 node and propagates to every parameter leaf.
  void backward(Var out);

  // Low-level node construction used by the op functions below.
  using Backprop = std::function<void(Graph&, const Matrix& out_grad)>;
  Var emit(Matrix value, std::initializer_list<Var> inputs, Backprop backprop);
  Var emit(Matrix value, std::span<const Var> inputs, Backprop backprop);
  // Adds `g` into the gradient of v (no-op when v does not require gradients).
  void accumulate(Var v, const Matrix& g);
  template <typename F>
  void accumulate_with(Var v, F&& fill) {
    if (!requires_grad(v)) return;
    Node& n = nodes_[v.id];
    if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    fill(n.grad);
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backprop backprop;
    Param* param = nullptr;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
};

namespace ops {

Var matmul(Graph& g, Var a, Var b);
// a * b^T
Var matmul_nt(Graph& g, Var a, Var b);
Var add(Graph& g, Var a, Var b);
// Adds a 1 x c row (or a flat vector shaped c x 1) to every row of a.
Var add_row(Graph& g, Var a, Var row);
Var scale(Graph& g, Var a, double factor);
Var gelu(Graph& g, Var a);
Var layer_norm(Graph& g, Var a, Var gain, Var bias, double eps = 1e-12);
Var softmax_rows(Graph& g, Var a);
Var gather_rows(Graph& g, Var table, std::span<const int> rows);
Var concat_cols(Graph& g, std::span<const Var> parts);
Var concat_rows(Graph& g, std::span<const Var> parts);
Var slice_cols(Graph& g, Var a, int begin, int count);
Var slice_rows(Graph& g, Var a, int begin, int count);
// One output row per range, pooled with the given mode; max routes the gradient
// to the first row attaining the maximum.
Var pool_rows(Graph& g, Var a, std::span<const RowRange> ranges, PoolingMode mode);
// Elementwise product with a constant (dropout masks).
Var mul_const(Graph& g, Var a, const Matrix& mask);
// Sum over rows of -log softmax(logits)[row, target[row]]; returns 1x1.
Var softmax_cross_entropy(Graph& g, Var logits, std::span<const int> targets);
Var sum(Graph& g, std::span<const Var> scalars);

}  // namespace ops

}  // namespace tablefill
