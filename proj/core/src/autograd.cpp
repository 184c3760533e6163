// Copyright 2026 The surgvl Authors
// SPDX-License-Identifier: Apache-2.0

#include "surgvl/autograd.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <unordered_set>

namespace surgvl::ag {

using detail::Node;

namespace {

void accumulate(Node& n, const Matrix& g) {
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

template <typename Expr>
void accumulate_expr(Node& n, const Expr& g) {
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

Var Var::constant(Matrix value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return Var(std::move(n));
}

Var Var::parameter(Matrix value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  return Var(std::move(n));
}

Matrix Var::grad() const {
  if (node_->grad.size() == 0) {
    return Matrix::Zero(node_->value.rows(), node_->value.cols());
  }
  return node_->grad;
}

Var make_result(Matrix value, std::vector<Var> parents,
                std::function<void(Node&)> backward) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  for (const auto& p : parents) {
    if (p.requires_grad()) n->requires_grad = true;
  }
  if (n->requires_grad) {
    n->parents.reserve(parents.size());
    for (auto& p : parents) n->parents.push_back(p.node());
    n->backward = std::move(backward);
  }
  return Var(std::move(n));
}

void Var::backward() const {
  require(node_->value.rows() == 1 && node_->value.cols() == 1,
          "backward() requires a scalar");
  if (!node_->requires_grad) return;

  // Iterative post-order DFS to get a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) {
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  accumulate(*node_, Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->grad.size() != 0) n->backward(*n);
  }
}

Var matmul(const Var& a, const Var& b) {
  require(a.cols() == b.rows(), "matmul: inner dimension mismatch");
  return make_result(a.value() * b.value(), {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) accumulate_expr(pa, self.grad * pb.value.transpose());
    if (pb.requires_grad) accumulate_expr(pb, pa.value.transpose() * self.grad);
  });
}

Var transpose(const Var& a) {
  return make_result(a.value().transpose(), {a}, [](Node& self) {
    accumulate_expr(*self.parents[0], self.grad.transpose());
  });
}

Var add(const Var& a, const Var& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch");
  return make_result(a.value() + b.value(), {a, b}, [](Node& self) {
    accumulate(*self.parents[0], self.grad);
    accumulate(*self.parents[1], self.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "sub: shape mismatch");
  return make_result(a.value() - b.value(), {a, b}, [](Node& self) {
    accumulate(*self.parents[0], self.grad);
    accumulate_expr(*self.parents[1], -self.grad);
  });
}

Var hadamard(const Var& a, const Var& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(),
          "hadamard: shape mismatch");
  return make_result(a.value().cwiseProduct(b.value()), {a, b},
                     [](Node& self) {
                       Node& pa = *self.parents[0];
                       Node& pb = *self.parents[1];
                       accumulate_expr(pa, self.grad.cwiseProduct(pb.value));
                       accumulate_expr(pb, self.grad.cwiseProduct(pa.value));
                     });
}

Var scale(const Var& a, double s) {
  return make_result(a.value() * s, {a}, [s](Node& self) {
    accumulate_expr(*self.parents[0], self.grad * s);
  });
}

Var add_row(const Var& a, const Var& row) {
  require(row.rows() == 1 && row.cols() == a.cols(),
          "add_row: row width mismatch");
  Matrix out = a.value().rowwise() + row.value().row(0);
  return make_result(std::move(out), {a, row}, [](Node& self) {
    accumulate(*self.parents[0], self.grad);
    accumulate_expr(*self.parents[1], self.grad.colwise().sum());
  });
}

Var sum(const Var& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return make_result(std::move(out), {a}, [](Node& self) {
    Node& p = *self.parents[0];
    accumulate_expr(p, Matrix::Constant(p.value.rows(), p.value.cols(),
                                        self.grad(0, 0)));
  });
}

Var gelu(const Var& a) {
  static constexpr double c = 0.7978845608028654;  // sqrt(2/pi)
  static constexpr double k = 0.044715;
  const Matrix& x = a.value();
  Matrix inner = (x.array() + k * x.array().cube()) * c;
  Matrix t = inner.array().tanh();
  Matrix out = 0.5 * x.array() * (1.0 + t.array());
  return make_result(std::move(out), {a}, [t = std::move(t)](Node& self) {
    const Matrix& xv = self.parents[0]->value;
    Matrix dt = (1.0 - t.array().square()) *
                (c * (1.0 + 3.0 * k * xv.array().square()));
    Matrix d = 0.5 * (1.0 + t.array()) + 0.5 * xv.array() * dt.array();
    accumulate_expr(*self.parents[0], self.grad.cwiseProduct(d));
  });
}

namespace {

Matrix softmax_values(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    out.row(r) = (x.row(r).array() - m).exp();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

Matrix log_softmax_values(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    const double lse = m + std::log((x.row(r).array() - m).exp().sum());
    out.row(r) = x.row(r).array() - lse;
  }
  return out;
}

}  // namespace

Var softmax_rows(const Var& a) {
  Matrix p = softmax_values(a.value());
  return make_result(p, {a}, [](Node& self) {
    const Matrix& pv = self.value;
    Eigen::VectorXd dots = (self.grad.cwiseProduct(pv)).rowwise().sum();
    Matrix d = pv.cwiseProduct(self.grad - dots.replicate(1, pv.cols()));
    accumulate(*self.parents[0], d);
  });
}

Var log_softmax_rows(const Var& a) {
  Matrix out = log_softmax_values(a.value());
  return make_result(out, {a}, [](Node& self) {
    Matrix p = self.value.array().exp();
    Eigen::VectorXd gs = self.grad.rowwise().sum();
    Matrix d = self.grad - p.cwiseProduct(gs.replicate(1, p.cols()));
    accumulate(*self.parents[0], d);
  });
}

Var layer_norm_rows(const Var& a, const Var& gamma, const Var& beta,
                    double eps) {
  const Matrix& x = a.value();
  const Eigen::Index n = x.cols();
  require(gamma.rows() == 1 && gamma.cols() == n && beta.rows() == 1 &&
              beta.cols() == n,
          "layer_norm_rows: gamma/beta width mismatch");
  Matrix xhat(x.rows(), n);
  Eigen::VectorXd inv_std(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mu = x.row(r).mean();
    const double var = (x.row(r).array() - mu).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (x.row(r).array() - mu) * inv_std(r);
  }
  Matrix out = (xhat.array().rowwise() * gamma.value().row(0).array())
                   .rowwise() +
               beta.value().row(0).array();
  return make_result(
      std::move(out), {a, gamma, beta},
      [xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
        Node& px = *self.parents[0];
        Node& pg = *self.parents[1];
        Node& pb = *self.parents[2];
        const Matrix& g = self.grad;
        accumulate_expr(pg, (g.cwiseProduct(xhat)).colwise().sum());
        accumulate_expr(pb, g.colwise().sum());
        if (px.requires_grad) {
          Matrix gh = g.array().rowwise() * pg.value.row(0).array();
          Matrix dx(g.rows(), g.cols());
          for (Eigen::Index r = 0; r < g.rows(); ++r) {
            const double mg = gh.row(r).mean();
            const double mgx = gh.row(r).dot(xhat.row(r)) /
                               static_cast<double>(g.cols());
            dx.row(r) = (gh.row(r).array() - mg - xhat.row(r).array() * mgx) *
                        inv_std(r);
          }
          accumulate(px, dx);
        }
      });
}

Var normalize_rows(const Var& a) {
  const Matrix& x = a.value();
  Eigen::VectorXd norms = x.rowwise().norm();
  Matrix y = x.array().colwise() / norms.array();
  return make_result(y, {a}, [norms = std::move(norms)](Node& self) {
    const Matrix& yv = self.value;
    Eigen::VectorXd dots = (self.grad.cwiseProduct(yv)).rowwise().sum();
    Matrix d = (self.grad - yv.cwiseProduct(dots.replicate(1, yv.cols())))
                   .array()
                   .colwise() /
               norms.array();
    accumulate(*self.parents[0], d);
  });
}

Var gather_rows(const Var& table, std::span<const int> ids) {
  const Matrix& t = table.value();
  Matrix out(static_cast<Eigen::Index>(ids.size()), t.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    require(ids[i] >= 0 && ids[i] < t.rows(), "gather_rows: id out of range");
    out.row(static_cast<Eigen::Index>(i)) = t.row(ids[i]);
  }
  std::vector<int> idx(ids.begin(), ids.end());
  return make_result(std::move(out), {table},
                     [idx = std::move(idx)](Node& self) {
                       Node& p = *self.parents[0];
                       if (p.grad.size() == 0) {
                         p.grad = Matrix::Zero(p.value.rows(), p.value.cols());
                       }
                       for (std::size_t i = 0; i < idx.size(); ++i) {
                         p.grad.row(idx[i]) +=
                             self.grad.row(static_cast<Eigen::Index>(i));
                       }
                     });
}

Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count) {
  require(start >= 0 && count >= 0 && start + count <= a.rows(),
          "slice_rows: out of range");
  Matrix out = a.value().middleRows(start, count);
  return make_result(std::move(out), {a}, [start, count](Node& self) {
    Node& p = *self.parents[0];
    if (p.grad.size() == 0) {
      p.grad = Matrix::Zero(p.value.rows(), p.value.cols());
    }
    p.grad.middleRows(start, count) += self.grad;
  });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  require(start >= 0 && count >= 0 && start + count <= a.cols(),
          "slice_cols: out of range");
  Matrix out = a.value().middleCols(start, count);
  return make_result(std::move(out), {a}, [start, count](Node& self) {
    Node& p = *self.parents[0];
    if (p.grad.size() == 0) {
      p.grad = Matrix::Zero(p.value.rows(), p.value.cols());
    }
    p.grad.middleCols(start, count) += self.grad;
  });
}

Var concat_rows(std::span<const Var> parts) {
  require(!parts.empty(), "concat_rows: no inputs");
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    require(p.cols() == cols, "concat_rows: width mismatch");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<Eigen::Index> offsets;
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    out.middleRows(off, p.rows()) = p.value();
    off += p.rows();
  }
  return make_result(std::move(out), {parts.begin(), parts.end()},
                     [offsets = std::move(offsets)](Node& self) {
                       for (std::size_t i = 0; i < self.parents.size(); ++i) {
                         Node& p = *self.parents[i];
                         if (!p.requires_grad) continue;
                         accumulate_expr(
                             p, self.grad.middleRows(offsets[i], p.value.rows()));
                       }
                     });
}

Var concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    require(p.rows() == rows, "concat_cols: height mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<Eigen::Index> offsets;
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    out.middleCols(off, p.cols()) = p.value();
    off += p.cols();
  }
  return make_result(std::move(out), {parts.begin(), parts.end()},
                     [offsets = std::move(offsets)](Node& self) {
                       for (std::size_t i = 0; i < self.parents.size(); ++i) {
                         Node& p = *self.parents[i];
                         if (!p.requires_grad) continue;
                         accumulate_expr(
                             p, self.grad.middleCols(offsets[i], p.value.cols()));
                       }
                     });
}

Var mean_rows(const Var& a) {
  require(a.rows() >= 1, "mean_rows: empty input");
  Matrix out = a.value().colwise().mean();
  const double inv = 1.0 / static_cast<double>(a.rows());
  return make_result(std::move(out), {a}, [inv](Node& self) {
    Node& p = *self.parents[0];
    accumulate_expr(p, (self.grad * inv).replicate(p.value.rows(), 1));
  });
}

Var average(std::span<const Var> parts) {
  require(!parts.empty(), "average: no inputs");
  const Eigen::Index rows = parts.front().rows();
  const Eigen::Index cols = parts.front().cols();
  Matrix acc = Matrix::Zero(rows, cols);
  for (const auto& p : parts) {
    require(p.rows() == rows && p.cols() == cols, "average: shape mismatch");
    acc += p.value();
  }
  const double inv = 1.0 / static_cast<double>(parts.size());
  acc *= inv;
  return make_result(std::move(acc), {parts.begin(), parts.end()},
                     [inv](Node& self) {
                       for (auto& p : self.parents) {
                         accumulate_expr(*p, self.grad * inv);
                       }
                     });
}

Var cross_entropy_rows(const Var& logits, std::span<const int> targets,
                       std::span<const double> weights) {
  const Matrix& x = logits.value();
  require(static_cast<Eigen::Index>(targets.size()) == x.rows() &&
              static_cast<Eigen::Index>(weights.size()) == x.rows(),
          "cross_entropy_rows: targets/weights length mismatch");
  double wsum = 0.0;
  for (double w : weights) wsum += w;
  require(wsum > 0.0, "cross_entropy_rows: zero total weight");

  double loss = 0.0;
  Matrix probs = Matrix::Zero(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    if (weights[r] == 0.0) continue;
    const int t = targets[r];
    require(t >= 0 && t < x.cols(), "cross_entropy_rows: target out of range");
    const double m = x.row(r).maxCoeff();
    probs.row(r) = (x.row(r).array() - m).exp();
    const double z = probs.row(r).sum();
    probs.row(r) /= z;
    loss += weights[r] * -(x(r, t) - m - std::log(z));
  }
  Matrix out(1, 1);
  out(0, 0) = loss / wsum;
  std::vector<int> tg(targets.begin(), targets.end());
  std::vector<double> wt(weights.begin(), weights.end());
  return make_result(
      std::move(out), {logits},
      [probs = std::move(probs), tg = std::move(tg), wt = std::move(wt),
       wsum](Node& self) {
        const double up = self.grad(0, 0);
        Matrix d = Matrix::Zero(probs.rows(), probs.cols());
        for (Eigen::Index r = 0; r < probs.rows(); ++r) {
          if (wt[r] == 0.0) continue;
          const double c = up * wt[r] / wsum;
          d.row(r) = probs.row(r) * c;
          d(r, tg[r]) -= c;
        }
        accumulate(*self.parents[0], d);
      });
}

}  // namespace surgvl::ag
