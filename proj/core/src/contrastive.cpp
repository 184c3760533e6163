// Copyright 2026 The surgvl Authors
// SPDX-License-Identifier: Apache-2.0

#include "surgvl/contrastive.hpp"

#include <cmath>
#include <numeric>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "surgvl/errors.hpp"
#include "surgvl/rng.hpp"

namespace surgvl {

std::string to_string(TextPooling p) {
  return p == TextPooling::mean ? "mean" : "last_token";
}

TextPooling text_pooling_from_string(const std::string& s) {
  if (s == "mean") return TextPooling::mean;
  if (s == "last_token") return TextPooling::last_token;
  throw ConfigError(fmt::format("unknown text pooling '{}'", s));
}

Matrix normalize_embeddings(const Matrix& vecs) {
  Matrix out(vecs.rows(), vecs.cols());
  for (Eigen::Index r = 0; r < vecs.rows(); ++r) {
    const double n = vecs.row(r).norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
      throw DegenerateInputError(
          fmt::format("cannot normalize row {}: norm is {}", r, n), r);
    }
    out.row(r) = vecs.row(r) / n;
  }
  return out;
}

namespace {

void check_batch(const EmbeddingBatch& b) {
  if (b.modality_vecs.rows() < 1) {
    throw ContractViolation("embedding batch must hold at least one pair");
  }
  if (b.modality_vecs.rows() != b.text_vecs.rows() ||
      b.modality_vecs.cols() != b.text_vecs.cols()) {
    throw ContractViolation(fmt::format(
        "modality batch {}x{} and text batch {}x{} differ in shape",
        b.modality_vecs.rows(), b.modality_vecs.cols(), b.text_vecs.rows(),
        b.text_vecs.cols()));
  }
  if (!(b.temperature > 0.0)) {
    throw ContractViolation(fmt::format("temperature must be > 0, got {}", b.temperature));
  }
  auto check_rows = [](const Matrix& m, const char* which) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      const double n = m.row(r).norm();
      if (std::abs(n - 1.0) > kUnitNormTolerance) {
        throw ContractViolation(fmt::format(
            "{} row {} has norm {:.6f}; normalize before computing the loss",
            which, r, n));
      }
    }
  };
  check_rows(b.modality_vecs, "modality");
  check_rows(b.text_vecs, "text");
}

// Row-wise softmax of x y^T / tau plus the loss value.
double softmax_similarities(const EmbeddingBatch& b, Matrix& probs) {
  const Matrix logits = (b.modality_vecs * b.text_vecs.transpose()) / b.temperature;
  const Eigen::Index k = logits.rows();
  probs.resize(k, k);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    const double m = logits.row(i).maxCoeff();
    probs.row(i) = (logits.row(i).array() - m).exp();
    const double z = probs.row(i).sum();
    probs.row(i) /= z;
    loss -= logits(i, i) - m - std::log(z);
  }
  return loss / static_cast<double>(k);
}

}  // namespace

double m2t_loss(const EmbeddingBatch& batch) {
  check_batch(batch);
  Matrix probs;
  return softmax_similarities(batch, probs);
}

M2TLossGradient m2t_loss_and_gradient(const EmbeddingBatch& batch) {
  check_batch(batch);
  M2TLossGradient out;
  Matrix probs;
  out.loss = softmax_similarities(batch, probs);
  const Eigen::Index k = probs.rows();
  const double c = 1.0 / (static_cast<double>(k) * batch.temperature);
  Matrix residual = probs - Matrix::Identity(k, k);
  out.d_modality = c * residual * batch.text_vecs;
  out.d_text = c * residual.transpose() * batch.modality_vecs;
  return out;
}

ag::Var m2t_loss(const ag::Var& modality, const ag::Var& text,
                 double temperature, bool symmetric) {
  if (!(temperature > 0.0)) throw ContractViolation("temperature must be > 0");
  const auto k = modality.rows();
  ag::Var logits =
      ag::scale(ag::matmul(modality, ag::transpose(text)), 1.0 / temperature);
  std::vector<int> targets(static_cast<std::size_t>(k));
  std::iota(targets.begin(), targets.end(), 0);
  std::vector<double> weights(static_cast<std::size_t>(k), 1.0);
  ag::Var forward = ag::cross_entropy_rows(logits, targets, weights);
  if (!symmetric) return forward;
  ag::Var backward = ag::cross_entropy_rows(ag::transpose(logits), targets, weights);
  return ag::scale(ag::add(forward, backward), 0.5);
}

PooledTextEmbedding pool_text(const Matrix& states, TextPooling mode) {
  if (states.rows() < 1) throw InvalidInputError("cannot pool an empty sequence (L = 0)");
  PooledTextEmbedding out;
  out.pooling_mode = mode;
  out.vec = mode == TextPooling::mean ? Eigen::RowVectorXd(states.colwise().mean())
                                      : Eigen::RowVectorXd(states.row(states.rows() - 1));
  return out;
}

ag::Var pool_text(const ag::Var& states, TextPooling mode) {
  if (states.rows() < 1) throw InvalidInputError("cannot pool an empty sequence (L = 0)");
  if (mode == TextPooling::mean) return ag::mean_rows(states);
  return ag::slice_rows(states, states.rows() - 1, 1);
}

JointBatch build_joint_batch(std::span<const AlignmentSample> samples,
                             std::size_t k, std::uint64_t seed) {
  if (k == 0) throw InvalidInputError("batch size K must be >= 1");
  if (samples.size() < k) {
    throw InsufficientDataError(fmt::format(
        "need at least {} samples for a joint batch, pool has {}", k, samples.size()));
  }
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  // Partial Fisher-Yates: the first k slots are a uniform k-subset in
  // uniform order.
  Rng rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(order.size() - i));
    std::swap(order[i], order[j]);
  }
  JointBatch batch;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < k; ++i) {
    const auto& s = samples[order[i]];
    batch.indices.push_back(order[i]);
    batch.sample_ids.push_back(s.sample_id);
    batch.source_ids.push_back(s.source_id);
    batch.modalities.push_back(s.modality());
    if (!seen.insert(s.source_id).second) batch.has_duplicate_sources = true;
  }
  if (batch.has_duplicate_sources) {
    spdlog::warn(
        "joint batch (seed {}) holds several samples from one source video; "
        "they are scored as in-batch negatives",
        seed);
  }
  return batch;
}

}  // namespace surgvl
