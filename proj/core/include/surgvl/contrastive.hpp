// Copyright 2026 The surgvl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "surgvl/autograd.hpp"
#include "surgvl/visual_encoding.hpp"

namespace surgvl {

/// K paired embeddings for the modality-to-text loss. Row i of
/// modality_vecs is the positive for row i of text_vecs; every other text
/// row is a negative.
struct EmbeddingBatch {
  Matrix modality_vecs;  // K x E
  Matrix text_vecs;      // K x E
  double temperature = 1.0;
  std::vector<std::string> pair_source_ids;
};

enum class TextPooling { mean, last_token };
std::string to_string(TextPooling p);
TextPooling text_pooling_from_string(const std::string& s);

struct PooledTextEmbedding {
  Eigen::RowVectorXd vec;
  TextPooling pooling_mode = TextPooling::mean;
};

/// Divide each row by its Euclidean norm. A zero row raises
/// DegenerateInputError carrying the row index.
Matrix normalize_embeddings(const Matrix& vecs);

/// Tolerance on row norms accepted by m2t_loss.
inline constexpr double kUnitNormTolerance = 1e-3;

/// -1/K sum_i log softmax_j(x_i . y_j / tau)[i], with max-subtracted
/// log-sum-exp. Requires unit rows (ContractViolation otherwise).
double m2t_loss(const EmbeddingBatch& batch);

struct M2TLossGradient {
  double loss = 0.0;
  Matrix d_modality;  // dL/dx, K x E
  Matrix d_text;      // dL/dy, K x E
};

/// Closed-form gradient of the loss above with respect to the raw rows:
///   dL/dx_i = (sum_j p_ij y_j - y_i) / (K tau)
///   dL/dy_j = (sum_i (p_ij - [i == j]) x_i) / (K tau)
M2TLossGradient m2t_loss_and_gradient(const EmbeddingBatch& batch);

/// Differentiable form used by the trainer. Inputs are already normalized.
/// With symmetric=true the text-to-modality direction is averaged in.
ag::Var m2t_loss(const ag::Var& modality, const ag::Var& text,
                 double temperature, bool symmetric = false);

PooledTextEmbedding pool_text(const Matrix& states, TextPooling mode);
ag::Var pool_text(const ag::Var& states, TextPooling mode);

/// One visual sample with its caption. Image samples are frames taken from
/// the source video named by source_id.
struct AlignmentSample {
  std::string sample_id;
  std::string source_id;
  Visual visual;
  std::string caption;

  Modality modality() const { return modality_of(visual); }
};

struct JointBatch {
  std::vector<std::size_t> indices;  // into the sample pool
  std::vector<std::string> sample_ids;
  std::vector<std::string> source_ids;
  std::vector<Modality> modalities;
  bool has_duplicate_sources = false;
};

/// Seeded uniform draw of k distinct samples from a pool that mixes images
/// and videos. Two samples from the same source video are kept and treated
/// as in-batch negatives of each other; a warning is logged.
JointBatch build_joint_batch(std::span<const AlignmentSample> samples,
                             std::size_t k, std::uint64_t seed);

}  // namespace surgvl
