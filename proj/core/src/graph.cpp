#include "tablefill/graph.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "tablefill/params.hpp"

namespace tablefill {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

Var Graph::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Graph::param(Param& p) {
  Node n;
  n.value = p.value;
  n.param = &p;
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

double Graph::scalar(Var v) const {
  const Matrix& m = value(v);
  if (m.rows() != 1 || m.cols() != 1) throw std::invalid_argument("node is not a scalar");
  return m(0, 0);
}

Var Graph::emit(Matrix value, std::initializer_list<Var> inputs, Backprop backprop) {
  return emit(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backprop));
}

Var Graph::emit(Matrix value, std::span<const Var> inputs, Backprop backprop) {
  Node n;
  n.value = std::move(value);
  for (Var in : inputs) {
    if (nodes_.at(in.id).requires_grad) {
      n.requires_grad = true;
      break;
    }
  }
  if (n.requires_grad) n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

void Graph::accumulate(Var v, const Matrix& g) {
  accumulate_with(v, [&](Matrix& grad) { grad += g; });
}

void Graph::backward(Var out) {
  Node& root = nodes_.at(out.id);
  if (root.value.size() != 1) throw std::invalid_argument("backward() needs a scalar output");
  if (!root.requires_grad) return;
  root.grad = Matrix::Ones(1, 1);
  for (int id = out.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.param) n.param->grad += n.grad;
    if (n.backprop) n.backprop(*this, n.grad);
  }
}

namespace ops {

Var matmul(Graph& g, Var a, Var b) {
  require(g.value(a).cols() == g.value(b).rows(), "matmul: inner dimensions differ");
  Matrix out = g.value(a) * g.value(b);
  return g.emit(std::move(out), {a, b}, [a, b](Graph& gr, const Matrix& G) {
    gr.accumulate_with(a, [&](Matrix& d) { d.noalias() += G * gr.value(b).transpose(); });
    gr.accumulate_with(b, [&](Matrix& d) { d.noalias() += gr.value(a).transpose() * G; });
  });
}

Var matmul_nt(Graph& g, Var a, Var b) {
  require(g.value(a).cols() == g.value(b).cols(), "matmul_nt: inner dimensions differ");
  Matrix out = g.value(a) * g.value(b).transpose();
  return g.emit(std::move(out), {a, b}, [a, b](Graph& gr, const Matrix& G) {
    gr.accumulate_with(a, [&](Matrix& d) { d.noalias() += G * gr.value(b); });
    gr.accumulate_with(b, [&](Matrix& d) { d.noalias() += G.transpose() * gr.value(a); });
  });
}

Var add(Graph& g, Var a, Var b) {
  require(g.value(a).rows() == g.value(b).rows() && g.value(a).cols() == g.value(b).cols(), "add: shape mismatch");
  Matrix out = g.value(a) + g.value(b);
  return g.emit(std::move(out), {a, b}, [a, b](Graph& gr, const Matrix& G) {
    gr.accumulate(a, G);
    gr.accumulate(b, G);
  });
}

Var add_row(Graph& g, Var a, Var row) {
  const Matrix& r = g.value(row);
  require(r.size() == g.value(a).cols(), "add_row: width mismatch");
  const bool column_shaped = r.cols() == 1 && r.rows() != 1;
  Matrix out = g.value(a);
  const RowVector rv = Eigen::Map<const RowVector>(r.data(), r.size());
  out.rowwise() += rv;
  return g.emit(std::move(out), {a, row}, [a, row, column_shaped](Graph& gr, const Matrix& G) {
    gr.accumulate(a, G);
    gr.accumulate_with(row, [&](Matrix& d) {
      RowVector s = G.colwise().sum();
      if (column_shaped) {
        d += s.transpose();
      } else {
        d += s;
      }
    });
  });
}

Var scale(Graph& g, Var a, double factor) {
  Matrix out = g.value(a) * factor;
  return g.emit(std::move(out), {a}, [a, factor](Graph& gr, const Matrix& G) {
    gr.accumulate_with(a, [&](Matrix& d) { d += G * factor; });
  });
}

Var gelu(Graph& g, Var a) {
  const Matrix& x = g.value(a);
  Matrix out = x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v / std::numbers::sqrt2)); });
  return g.emit(std::move(out), {a}, [a](Graph& gr, const Matrix& G) {
    gr.accumulate_with(a, [&](Matrix& d) {
      const Matrix& xv = gr.value(a);
      const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
      Matrix deriv = xv.unaryExpr([&](double v) {
        const double cdf = 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2));
        const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
        return cdf + v * pdf;
      });
      d += G.cwiseProduct(deriv);
    });
  });
}

Var layer_norm(Graph& g, Var a, Var gain, Var bias, double eps) {
  const Matrix& x = g.value(a);
  const Eigen::Index cols = x.cols();
  require(g.value(gain).size() == cols && g.value(bias).size() == cols, "layer_norm: parameter width mismatch");
  const RowVector gv = Eigen::Map<const RowVector>(g.value(gain).data(), cols);
  const RowVector bv = Eigen::Map<const RowVector>(g.value(bias).data(), cols);

  Matrix xhat(x.rows(), cols);
  Eigen::VectorXd inv_sigma(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mu = x.row(r).mean();
    const double var = (x.row(r).array() - mu).square().mean();
    inv_sigma(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (x.row(r).array() - mu) * inv_sigma(r);
  }
  Matrix out = xhat.array().rowwise() * gv.array();
  out.rowwise() += bv;

  const bool gain_column = g.value(gain).cols() == 1 && cols != 1;
  const bool bias_column = g.value(bias).cols() == 1 && cols != 1;
  return g.emit(std::move(out), {a, gain, bias},
                [a, gain, bias, xhat, inv_sigma, gv, gain_column, bias_column](Graph& gr, const Matrix& G) {
                  gr.accumulate_with(gain, [&](Matrix& d) {
                    RowVector s = G.cwiseProduct(xhat).colwise().sum();
                    if (gain_column) d += s.transpose(); else d += s;
                  });
                  gr.accumulate_with(bias, [&](Matrix& d) {
                    RowVector s = G.colwise().sum();
                    if (bias_column) d += s.transpose(); else d += s;
                  });
                  gr.accumulate_with(a, [&](Matrix& d) {
                    Matrix dxhat = G.array().rowwise() * gv.array();
                    for (Eigen::Index r = 0; r < dxhat.rows(); ++r) {
                      const double m1 = dxhat.row(r).mean();
                      const double m2 = dxhat.row(r).cwiseProduct(xhat.row(r)).mean();
                      d.row(r).array() +=
                          inv_sigma(r) * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
                    }
                  });
                });
}

Var softmax_rows(Graph& g, Var a) {
  const Matrix& x = g.value(a);
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mx = x.row(r).maxCoeff();
    y.row(r) = (x.row(r).array() - mx).exp();
    y.row(r) /= y.row(r).sum();
  }
  Matrix yc = y;
  return g.emit(std::move(y), {a}, [a, yc](Graph& gr, const Matrix& G) {
    gr.accumulate_with(a, [&](Matrix& d) {
      for (Eigen::Index r = 0; r < G.rows(); ++r) {
        const double dot = G.row(r).dot(yc.row(r));
        d.row(r).array() += yc.row(r).array() * (G.row(r).array() - dot);
      }
    });
  });
}

Var gather_rows(Graph& g, Var table, std::span<const int> rows) {
  const Matrix& t = g.value(table);
  Matrix out(static_cast<Eigen::Index>(rows.size()), t.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] < 0 || rows[k] >= t.rows()) throw std::out_of_range("gather_rows: row index out of range");
    out.row(static_cast<Eigen::Index>(k)) = t.row(rows[k]);
  }
  std::vector<int> idx(rows.begin(), rows.end());
  return g.emit(std::move(out), {table}, [table, idx](Graph& gr, const Matrix& G) {
    gr.accumulate_with(table, [&](Matrix& d) {
      for (std::size_t k = 0; k < idx.size(); ++k) d.row(idx[k]) += G.row(static_cast<Eigen::Index>(k));
    });
  });
}

Var concat_cols(Graph& g, std::span<const Var> parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  const Eigen::Index rows = g.value(parts[0]).rows();
  Eigen::Index cols = 0;
  for (Var p : parts) {
    require(g.value(p).rows() == rows, "concat_cols: row count mismatch");
    cols += g.value(p).cols();
  }
  Matrix out(rows, cols);
  std::vector<Eigen::Index> offsets;
  Eigen::Index c = 0;
  for (Var p : parts) {
    offsets.push_back(c);
    out.middleCols(c, g.value(p).cols()) = g.value(p);
    c += g.value(p).cols();
  }
  std::vector<Var> ins(parts.begin(), parts.end());
  return g.emit(std::move(out), parts, [ins, offsets](Graph& gr, const Matrix& G) {
    for (std::size_t k = 0; k < ins.size(); ++k) {
      gr.accumulate_with(ins[k], [&](Matrix& d) { d += G.middleCols(offsets[k], d.cols()); });
    }
  });
}

Var concat_rows(Graph& g, std::span<const Var> parts) {
  require(!parts.empty(), "concat_rows: no inputs");
  const Eigen::Index cols = g.value(parts[0]).cols();
  Eigen::Index rows = 0;
  for (Var p : parts) {
    require(g.value(p).cols() == cols, "concat_rows: column count mismatch");
    rows += g.value(p).rows();
  }
  Matrix out(rows, cols);
  std::vector<Eigen::Index> offsets;
  Eigen::Index r = 0;
  for (Var p : parts) {
    offsets.push_back(r);
    out.middleRows(r, g.value(p).rows()) = g.value(p);
    r += g.value(p).rows();
  }
  std::vector<Var> ins(parts.begin(), parts.end());
  return g.emit(std::move(out), parts, [ins, offsets](Graph& gr, const Matrix& G) {
    for (std::size_t k = 0; k < ins.size(); ++k) {
      gr.accumulate_with(ins[k], [&](Matrix& d) { d += G.middleRows(offsets[k], d.rows()); });
    }
  });
}

Var slice_cols(Graph& g, Var a, int begin, int count) {
  require(begin >= 0 && count >= 0 && begin + count <= g.value(a).cols(), "slice_cols: out of range");
  Matrix out = g.value(a).middleCols(begin, count);
  return g.emit(std::move(out), {a}, [a, begin, count](Graph& gr, const Matrix& G) {
    gr.accumulate_with(a, [&](Matrix& d) { d.middleCols(begin, count) += G; });
  });
}

Var slice_rows(Graph& g, Var a, int begin, int count) {
  require(begin >= 0 && count >= 0 && begin + count <= g.value(a).rows(), "slice_rows: out of range");
  Matrix out = g.value(a).middleRows(begin, count);
  return g.emit(std::move(out), {a}, [a, begin, count](Graph& gr, const Matrix& G) {
    gr.accumulate_with(a, [&](Matrix& d) { d.middleRows(begin, count) += G; });
  });
}

Var pool_rows(Graph& g, Var a, std::span<const RowRange> ranges, PoolingMode mode) {
  const Matrix& x = g.value(a);
  const Eigen::Index cols = x.cols();
  Matrix out(static_cast<Eigen::Index>(ranges.size()), cols);
  // For max pooling: source row of each output coordinate.
  Eigen::MatrixXi argmax;
  if (mode == PoolingMode::kMax) argmax.resize(out.rows(), cols);
  for (std::size_t k = 0; k < ranges.size(); ++k) {
    const RowRange rg = ranges[k];
    if (rg.begin < 0 || rg.end > x.rows() || rg.begin >= rg.end) throw std::out_of_range("pool_rows: bad row range");
    const auto block = x.middleRows(rg.begin, rg.end - rg.begin);
    const auto row = static_cast<Eigen::Index>(k);
    out.row(row) = pool_word(block, mode);
    if (mode == PoolingMode::kMax) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        Eigen::Index best = 0;
        block.col(c).maxCoeff(&best);
        argmax(row, c) = rg.begin + static_cast<int>(best);
      }
    }
  }
  std::vector<RowRange> rs(ranges.begin(), ranges.end());
  return g.emit(std::move(out), {a}, [a, rs, argmax, mode](Graph& gr, const Matrix& G) {
    gr.accumulate_with(a, [&](Matrix& d) {
      for (std::size_t k = 0; k < rs.size(); ++k) {
        const auto row = static_cast<Eigen::Index>(k);
        switch (mode) {
          case PoolingMode::kFirst:
            d.row(rs[k].begin) += G.row(row);
            break;
          case PoolingMode::kMean: {
            const double inv = 1.0 / (rs[k].end - rs[k].begin);
            for (int r = rs[k].begin; r < rs[k].end; ++r) d.row(r) += G.row(row) * inv;
            break;
          }
          case PoolingMode::kMax:
            for (Eigen::Index c = 0; c < G.cols(); ++c) d(argmax(row, c), c) += G(row, c);
            break;
        }
      }
    });
  });
}

Var mul_const(Graph& g, Var a, const Matrix& mask) {
  require(mask.rows() == g.value(a).rows() && mask.cols() == g.value(a).cols(), "mul_const: shape mismatch");
  Matrix out = g.value(a).cwiseProduct(mask);
  return g.emit(std::move(out), {a}, [a, mask](Graph& gr, const Matrix& G) {
    gr.accumulate_with(a, [&](Matrix& d) { d += G.cwiseProduct(mask); });
  });
}

Var softmax_cross_entropy(Graph& g, Var logits, std::span<const int> targets) {
  const Matrix& x = g.value(logits);
  require(static_cast<Eigen::Index>(targets.size()) == x.rows(), "softmax_cross_entropy: target count mismatch");
  Matrix probs(x.rows(), x.cols());
  double loss = 0.0;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const int t = targets[static_cast<std::size_t>(r)];
    if (t < 0 || t >= x.cols()) throw std::out_of_range("softmax_cross_entropy: target out of range");
    const double mx = x.row(r).maxCoeff();
    const double lse = mx + std::log((x.row(r).array() - mx).exp().sum());
    probs.row(r) = (x.row(r).array() - lse).exp();
    loss += lse - x(r, t);
  }
  std::vector<int> ts(targets.begin(), targets.end());
  return g.emit(Matrix::Constant(1, 1, loss), {logits}, [logits, probs, ts](Graph& gr, const Matrix& G) {
    gr.accumulate_with(logits, [&](Matrix& d) {
      Matrix delta = probs;
      for (std::size_t r = 0; r < ts.size(); ++r) delta(static_cast<Eigen::Index>(r), ts[r]) -= 1.0;
      d += G(0, 0) * delta;
    });
  });
}

Var sum(Graph& g, std::span<const Var> scalars) {
  double total = 0.0;
  for (Var s : scalars) total += g.scalar(s);
  std::vector<Var> ins(scalars.begin(), scalars.end());
  return g.emit(Matrix::Constant(1, 1, total), scalars, [ins](Graph& gr, const Matrix& G) {
    for (Var s : ins) gr.accumulate(s, G);
  });
}

}  // namespace ops

}  // namespace tablefill
