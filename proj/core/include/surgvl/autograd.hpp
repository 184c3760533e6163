// Copyright 2026 The surgvl Authors
// SPDX-License-Identifier: Apache-2.0
//
// Minimal reverse-mode automatic differentiation over dense float64
// matrices. Graphs are built eagerly by the free functions below and torn
// down when the last Var referencing them goes out of scope. Parameters are
// long-lived leaf Vars whose gradients accumulate until zero_grad().

#pragma once

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace surgvl::ag {

using Matrix = Eigen::MatrixXd;

namespace detail {

struct Node {
  Matrix value;
  Matrix grad;  // empty until something flows in
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into its parents.
  std::function<void(Node&)> backward;
};

}  // namespace detail

class Var {
 public:
  Var() = default;

  static Var constant(Matrix value);
  static Var parameter(Matrix value);

  bool valid() const noexcept { return node_ != nullptr; }
  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }

  /// Accumulated gradient; zeros of the value's shape if nothing flowed in.
  Matrix grad() const;
  bool has_grad() const { return node_->grad.size() != 0; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  void zero_grad() { node_->grad.resize(0, 0); }

  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }

  /// Back-propagate from a 1x1 value with seed gradient 1.
  void backward() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  explicit Var(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
  friend Var make_result(Matrix value, std::vector<Var> parents,
                         std::function<void(detail::Node&)> backward);

  std::shared_ptr<detail::Node> node_;
};

Var make_result(Matrix value, std::vector<Var> parents,
                std::function<void(detail::Node&)> backward);

// Linear algebra.
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var hadamard(const Var& a, const Var& b);
Var scale(const Var& a, double s);
/// a (R x C) + row (1 x C) broadcast over rows.
Var add_row(const Var& a, const Var& row);
Var sum(const Var& a);

// Nonlinearities (tanh-approximated GELU).
Var gelu(const Var& a);
Var softmax_rows(const Var& a);
Var log_softmax_rows(const Var& a);
Var layer_norm_rows(const Var& a, const Var& gamma, const Var& beta,
                    double eps = 1e-5);
Var normalize_rows(const Var& a);

// Shape manipulation.
Var gather_rows(const Var& table, std::span<const int> ids);
Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
/// 1 x C mean over rows.
Var mean_rows(const Var& a);
/// Elementwise arithmetic mean of equally shaped matrices.
Var average(std::span<const Var> parts);

/// Weighted mean negative log-likelihood of targets[i] under row i's
/// softmax: sum_i w_i * -log p_i(t_i) / sum_i w_i. Rows with zero weight
/// receive exactly zero gradient.
Var cross_entropy_rows(const Var& logits, std::span<const int> targets,
                       std::span<const double> weights);

}  // namespace surgvl::ag
