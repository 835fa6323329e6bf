#include "lipnovo/autodiff.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace lipnovo::ad {

const Eigen::MatrixXd& Var::value() const { return *g_->node(idx_).value; }

const Eigen::MatrixXd& Var::grad() const { return g_->node(idx_).grad; }

Var Graph::leaf(const Eigen::MatrixXd* value, bool requires_grad) {
  Node n;
  n.value = value;
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Graph::constant(Eigen::MatrixXd value) {
  Node n;
  n.storage = std::move(value);
  n.value = &n.storage;
  nodes_.push_back(std::move(n));
  int idx = static_cast<int>(nodes_.size()) - 1;
  nodes_[idx].value = &nodes_[idx].storage;  // storage moved; re-point
  return Var(this, idx);
}

Var Graph::make(Eigen::MatrixXd value, bool requires_grad,
                std::function<void(Graph&)> fn) {
  Node n;
  n.storage = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  int idx = static_cast<int>(nodes_.size()) - 1;
  nodes_[idx].value = &nodes_[idx].storage;
  return Var(this, idx);
}

void Graph::accum(int idx, const Eigen::MatrixXd& g) {
  Node& n = nodes_[idx];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

Var Graph::matmul(Var a, Var b) {
  const int ia = a.idx_, ib = b.idx_;
  Eigen::MatrixXd v = *node(ia).value * *node(ib).value;
  bool rg = node(ia).requires_grad || node(ib).requires_grad;
  int out = static_cast<int>(nodes_.size());
  return make(std::move(v), rg, [ia, ib, out](Graph& g) {
    const Eigen::MatrixXd& go = g.node(out).grad;
    if (g.node(ia).requires_grad) g.accum(ia, go * g.node(ib).value->transpose());
    if (g.node(ib).requires_grad) g.accum(ib, g.node(ia).value->transpose() * go);
  });
}

Var Graph::matmul_nt(Var a, Var b) {
  const int ia = a.idx_, ib = b.idx_;
  Eigen::MatrixXd v = *node(ia).value * node(ib).value->transpose();
  bool rg = node(ia).requires_grad || node(ib).requires_grad;
  int out = static_cast<int>(nodes_.size());
  return make(std::move(v), rg, [ia, ib, out](Graph& g) {
    const Eigen::MatrixXd& go = g.node(out).grad;
    if (g.node(ia).requires_grad) g.accum(ia, go * *g.node(ib).value);
    if (g.node(ib).requires_grad) g.accum(ib, go.transpose() * *g.node(ia).value);
  });
}

Var Graph::add(Var a, Var b) {
  const int ia = a.idx_, ib = b.idx_;
  Eigen::MatrixXd v = *node(ia).value + *node(ib).value;
  bool rg = node(ia).requires_grad || node(ib).requires_grad;
  int out = static_cast<int>(nodes_.size());
  return make(std::move(v), rg, [ia, ib, out](Graph& g) {
    const Eigen::MatrixXd& go = g.node(out).grad;
    g.accum(ia, go);
    g.accum(ib, go);
  });
}

Var Graph::sub(Var a, Var b) {
  const int ia = a.idx_, ib = b.idx_;
  Eigen::MatrixXd v = *node(ia).value - *node(ib).value;
  bool rg = node(ia).requires_grad || node(ib).requires_grad;
  int out = static_cast<int>(nodes_.size());
  return make(std::move(v), rg, [ia, ib, out](Graph& g) {
    const Eigen::MatrixXd& go = g.node(out).grad;
    g.accum(ia, go);
    if (g.node(ib).requires_grad) g.accum(ib, -go);
  });
}

Var Graph::scale(Var a, double s) {
  const int ia = a.idx_;
  Eigen::MatrixXd v = *node(ia).value * s;
  int out = static_cast<int>(nodes_.size());
  return make(std::move(v), node(ia).requires_grad, [ia, s, out](Graph& g) {
    g.accum(ia, g.node(out).grad * s);
  });
}

Var Graph::add_rowvec(Var a, Var row) {
  const int ia = a.idx_, ir = row.idx_;
  Eigen::MatrixXd v = node(ia).value->rowwise() + node(ir).value->row(0);
  bool rg = node(ia).requires_grad || node(ir).requires_grad;
  int out = static_cast<int>(nodes_.size());
  return make(std::move(v), rg, [ia, ir, out](Graph& g) {
    const Eigen::MatrixXd& go = g.node(out).grad;
    g.accum(ia, go);
    if (g.node(ir).requires_grad) g.accum(ir, go.colwise().sum());
  });
}

Var Graph::hadamard(Var a, Var b) {
  const int ia = a.idx_, ib = b.idx_;
  Eigen::MatrixXd v = node(ia).value->cwiseProduct(*node(ib).value);
  bool rg = node(ia).requires_grad || node(ib).requires_grad;
  int out = static_cast<int>(nodes_.size());
  return make(std::move(v), rg, [ia, ib, out](Graph& g) {
    const Eigen::MatrixXd& go = g.node(out).grad;
    if (g.node(ia).requires_grad) g.accum(ia, go.cwiseProduct(*g.node(ib).value));
    if (g.node(ib).requires_grad) g.accum(ib, go.cwiseProduct(*g.node(ia).value));
  });
}

Var Graph::relu(Var a) {
  const int ia = a.idx_;
  Eigen::MatrixXd v = node(ia).value->cwiseMax(0.0);
  int out = static_cast<int>(nodes_.size());
  return make(std::move(v), node(ia).requires_grad, [ia, out](Graph& g) {
    const Eigen::MatrixXd& go = g.node(out).grad;
    const Eigen::MatrixXd& x = *g.node(ia).value;
    Eigen::MatrixXd gi = ((x.array() > 0.0).cast<double>() * go.array()).matrix();
    g.accum(ia, gi);
  });
}

Var Graph::sigmoid(Var a) {
  const int ia = a.idx_;
  Eigen::MatrixXd v =
      node(ia).value->unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
  int out = static_cast<int>(nodes_.size());
  return make(std::move(v), node(ia).requires_grad, [ia, out](Graph& g) {
    const Eigen::MatrixXd& go = g.node(out).grad;
    const Eigen::MatrixXd& s = *g.node(out).value;
    Eigen::MatrixXd gi = (go.array() * s.array() * (1.0 - s.array())).matrix();
    g.accum(ia, gi);
  });
}

Var Graph::log(Var a) {
  const int ia = a.idx_;
  Eigen::MatrixXd v = node(ia).value->array().log();
  int out = static_cast<int>(nodes_.size());
  return make(std::move(v), node(ia).requires_grad, [ia, out](Graph& g) {
    const Eigen::MatrixXd& go = g.node(out).grad;
    g.accum(ia, (go.array() / g.node(ia).value->array()).matrix());
  });
}

Var Graph::clamp(Var a, double lo, double hi) {
  const int ia = a.idx_;
  Eigen::MatrixXd v = node(ia).value->cwiseMax(lo).cwiseMin(hi);
  int out = static_cast<int>(nodes_.size());
  return make(std::move(v), node(ia).requires_grad, [ia, lo, hi, out](Graph& g) {
    const Eigen::MatrixXd& go = g.node(out).grad;
    const Eigen::MatrixXd& x = *g.node(ia).value;
    Eigen::MatrixXd gi =
        (x.array() >= lo && x.array() <= hi)
            .select(go, Eigen::MatrixXd::Zero(go.rows(), go.cols()));
    g.accum(ia, gi);
  });
}

Var Graph::softmax_rows(
    Var a, const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>* allowed) {
  const int ia = a.idx_;
  const Eigen::MatrixXd& x = *node(ia).value;
  Eigen::MatrixXd y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      if (allowed && !(*allowed)(r, c)) continue;
      mx = std::max(mx, x(r, c));
    }
    double sum = 0.0;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      if (allowed && !(*allowed)(r, c)) {
        y(r, c) = 0.0;
      } else {
        y(r, c) = std::exp(x(r, c) - mx);
        sum += y(r, c);
      }
    }
    y.row(r) /= sum;
  }
  int out = static_cast<int>(nodes_.size());
  return make(std::move(y), node(ia).requires_grad, [ia, out](Graph& g) {
    const Eigen::MatrixXd& go = g.node(out).grad;
    const Eigen::MatrixXd& yv = *g.node(out).value;
    Eigen::MatrixXd gi(go.rows(), go.cols());
    for (Eigen::Index r = 0; r < go.rows(); ++r) {
      const double dot = go.row(r).dot(yv.row(r));
      gi.row(r) = yv.row(r).cwiseProduct(go.row(r).array().matrix() -
                                         Eigen::RowVectorXd::Constant(go.cols(), dot));
    }
    g.accum(ia, gi);
  });
}

Var Graph::layer_norm(Var a, Var gain, Var bias, double eps) {
  const int ia = a.idx_, ig = gain.idx_, ib = bias.idx_;
  const Eigen::MatrixXd& x = *node(ia).value;
  const Eigen::Index R = x.rows(), C = x.cols();
  Eigen::MatrixXd xhat(R, C);
  Eigen::VectorXd inv_std(R);
  for (Eigen::Index r = 0; r < R; ++r) {
    const double mu = x.row(r).mean();
    const double var = (x.row(r).array() - mu).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (x.row(r).array() - mu) * inv_std(r);
  }
  Eigen::MatrixXd y =
      (xhat.array().rowwise() * node(ig).value->row(0).array()).rowwise() +
      node(ib).value->row(0).array();
  bool rg = node(ia).requires_grad || node(ig).requires_grad || node(ib).requires_grad;
  int out = static_cast<int>(nodes_.size());
  // Cache xhat and inv_std in the closure for the backward pass.
  return make(std::move(y), rg,
              [ia, ig, ib, out, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                  Graph& g) {
                const Eigen::MatrixXd& go = g.node(out).grad;
                const Eigen::Index C = go.cols();
                if (g.node(ig).requires_grad) {
                  g.accum(ig, (go.array() * xhat.array()).colwise().sum().matrix());
                }
                if (g.node(ib).requires_grad) g.accum(ib, go.colwise().sum());
                if (g.node(ia).requires_grad) {
                  const Eigen::RowVectorXd& gain_row = g.node(ig).value->row(0);
                  Eigen::MatrixXd gi(go.rows(), C);
                  for (Eigen::Index r = 0; r < go.rows(); ++r) {
                    Eigen::RowVectorXd dxhat = go.row(r).cwiseProduct(gain_row);
                    const double m1 = dxhat.mean();
                    const double m2 = dxhat.cwiseProduct(xhat.row(r)).mean();
                    gi.row(r) =
                        inv_std(r) * (dxhat.array() - m1 - xhat.row(r).array() * m2);
                  }
                  g.accum(ia, gi);
                }
              });
}

Var Graph::concat_rows(Var a, Var b) {
  const int ia = a.idx_, ib = b.idx_;
  const Eigen::MatrixXd& va = *node(ia).value;
  const Eigen::MatrixXd& vb = *node(ib).value;
  Eigen::MatrixXd v(va.rows() + vb.rows(), va.cols());
  v.topRows(va.rows()) = va;
  v.bottomRows(vb.rows()) = vb;
  bool rg = node(ia).requires_grad || node(ib).requires_grad;
  int out = static_cast<int>(nodes_.size());
  const int ra = static_cast<int>(va.rows());
  return make(std::move(v), rg, [ia, ib, ra, out](Graph& g) {
    const Eigen::MatrixXd& go = g.node(out).grad;
    if (g.node(ia).requires_grad) g.accum(ia, go.topRows(ra));
    if (g.node(ib).requires_grad) g.accum(ib, go.bottomRows(go.rows() - ra));
  });
}

Var Graph::concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: empty input");
  Eigen::Index rows = parts[0].rows(), cols = 0;
  bool rg = false;
  std::vector<int> idx;
  std::vector<int> offsets;
  for (const Var& p : parts) {
    idx.push_back(p.idx_);
    offsets.push_back(static_cast<int>(cols));
    cols += p.cols();
    rg = rg || node(p.idx_).requires_grad;
  }
  Eigen::MatrixXd v(rows, cols);
  for (size_t i = 0; i < idx.size(); ++i) {
    v.middleCols(offsets[i], node(idx[i]).value->cols()) = *node(idx[i]).value;
  }
  int out = static_cast<int>(nodes_.size());
  return make(std::move(v), rg, [idx, offsets, out](Graph& g) {
    const Eigen::MatrixXd& go = g.node(out).grad;
    for (size_t i = 0; i < idx.size(); ++i) {
      if (!g.node(idx[i]).requires_grad) continue;
      g.accum(idx[i], go.middleCols(offsets[i], g.node(idx[i]).value->cols()));
    }
  });
}

Var Graph::slice_rows(Var a, int start, int count) {
  const int ia = a.idx_;
  Eigen::MatrixXd v = node(ia).value->middleRows(start, count);
  int out = static_cast<int>(nodes_.size());
  return make(std::move(v), node(ia).requires_grad, [ia, start, count, out](Graph& g) {
    const Eigen::MatrixXd& go = g.node(out).grad;
    Eigen::MatrixXd gi = Eigen::MatrixXd::Zero(g.node(ia).value->rows(),
                                               g.node(ia).value->cols());
    gi.middleRows(start, count) = go;
    g.accum(ia, gi);
  });
}

Var Graph::slice_cols(Var a, int start, int count) {
  const int ia = a.idx_;
  Eigen::MatrixXd v = node(ia).value->middleCols(start, count);
  int out = static_cast<int>(nodes_.size());
  return make(std::move(v), node(ia).requires_grad, [ia, start, count, out](Graph& g) {
    const Eigen::MatrixXd& go = g.node(out).grad;
    Eigen::MatrixXd gi = Eigen::MatrixXd::Zero(g.node(ia).value->rows(),
                                               g.node(ia).value->cols());
    gi.middleCols(start, count) = go;
    g.accum(ia, gi);
  });
}

Var Graph::gather_rows(Var a, std::vector<int> indices) {
  const int ia = a.idx_;
  const Eigen::MatrixXd& x = *node(ia).value;
  Eigen::MatrixXd v(static_cast<Eigen::Index>(indices.size()), x.cols());
  for (size_t i = 0; i < indices.size(); ++i) v.row(i) = x.row(indices[i]);
  int out = static_cast<int>(nodes_.size());
  return make(std::move(v), node(ia).requires_grad,
              [ia, out, indices = std::move(indices)](Graph& g) {
                const Eigen::MatrixXd& go = g.node(out).grad;
                Eigen::MatrixXd gi = Eigen::MatrixXd::Zero(g.node(ia).value->rows(),
                                                           g.node(ia).value->cols());
                for (size_t i = 0; i < indices.size(); ++i) gi.row(indices[i]) += go.row(i);
                g.accum(ia, gi);
              });
}

Var Graph::sum_squares(Var a) {
  const int ia = a.idx_;
  Eigen::MatrixXd v(1, 1);
  v(0, 0) = node(ia).value->squaredNorm();
  int out = static_cast<int>(nodes_.size());
  return make(std::move(v), node(ia).requires_grad, [ia, out](Graph& g) {
    const double go = g.node(out).grad(0, 0);
    g.accum(ia, 2.0 * go * *g.node(ia).value);
  });
}

Var Graph::sum_all(Var a) {
  const int ia = a.idx_;
  Eigen::MatrixXd v(1, 1);
  v(0, 0) = node(ia).value->sum();
  int out = static_cast<int>(nodes_.size());
  return make(std::move(v), node(ia).requires_grad, [ia, out](Graph& g) {
    const double go = g.node(out).grad(0, 0);
    g.accum(ia, Eigen::MatrixXd::Constant(g.node(ia).value->rows(),
                                          g.node(ia).value->cols(), go));
  });
}

Var Graph::mean_all(Var a) {
  const double inv = 1.0 / static_cast<double>(node(a.idx_).value->size());
  return scale(sum_all(a), inv);
}

Var Graph::cross_entropy_rows(Var logits, std::vector<int> targets,
                              double label_smoothing) {
  const int ia = logits.idx_;
  const Eigen::MatrixXd& x = *node(ia).value;
  const Eigen::Index R = x.rows(), K = x.cols();
  if (static_cast<Eigen::Index>(targets.size()) != R) {
    throw std::invalid_argument("cross_entropy_rows: targets/rows mismatch");
  }
  const double eps = label_smoothing;
  double total = 0.0;
  Eigen::VectorXd lse(R);
  for (Eigen::Index r = 0; r < R; ++r) {
    const double mx = x.row(r).maxCoeff();
    const double s = (x.row(r).array() - mx).exp().sum();
    lse(r) = mx + std::log(s);
    total += lse(r) - (1.0 - eps) * x(r, targets[r]) -
             (eps / static_cast<double>(K)) * x.row(r).sum();
  }
  Eigen::MatrixXd v(1, 1);
  v(0, 0) = total / static_cast<double>(R);
  int out = static_cast<int>(nodes_.size());
  return make(std::move(v), node(ia).requires_grad,
              [ia, out, eps, targets = std::move(targets), lse = std::move(lse)](Graph& g) {
                const double go = g.node(out).grad(0, 0);
                const Eigen::MatrixXd& x = *g.node(ia).value;
                const Eigen::Index R = x.rows(), K = x.cols();
                const double w = go / static_cast<double>(R);
                Eigen::MatrixXd gi(R, K);
                for (Eigen::Index r = 0; r < R; ++r) {
                  gi.row(r) = (x.row(r).array() - lse(r)).exp() * w;
                  gi.row(r).array() -= w * eps / static_cast<double>(K);
                  gi(r, targets[r]) -= w * (1.0 - eps);
                }
                g.accum(ia, gi);
              });
}

Var Graph::dropout(Var a, double p, Rng& rng) {
  if (p <= 0.0) return a;
  const int ia = a.idx_;
  const Eigen::MatrixXd& x = *node(ia).value;
  Eigen::MatrixXd mask(x.rows(), x.cols());
  const double keep_scale = 1.0 / (1.0 - p);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      mask(r, c) = rng.bernoulli(p) ? 0.0 : keep_scale;
    }
  }
  Eigen::MatrixXd v = x.cwiseProduct(mask);
  int out = static_cast<int>(nodes_.size());
  return make(std::move(v), node(ia).requires_grad,
              [ia, out, mask = std::move(mask)](Graph& g) {
                g.accum(ia, g.node(out).grad.cwiseProduct(mask));
              });
}

Var Graph::detach(Var a) {
  Node n;
  n.value = node(a.idx_).value;  // same storage, no gradient path
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Graph::backward(Var root) {
  Node& r = nodes_[root.idx_];
  if (r.value->rows() != 1 || r.value->cols() != 1) {
    throw std::invalid_argument("backward: root must be a 1x1 scalar");
  }
  if (!r.requires_grad) return;
  r.grad = Eigen::MatrixXd::Ones(1, 1);
  for (int i = root.idx_; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.grad.size() == 0 || !n.backward) continue;
    n.backward(*this);
  }
}

}  // namespace lipnovo::ad
