// Copyright 2026 The surgvl Authors
// SPDX-License-Identifier: Apache-2.0
//
// Straight-line reference computations. None of these call into the
// library's numeric code; they are written from the formulas with plain
// loops and long double accumulation so they can serve as test oracles.

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace surgvl::oracle {

using Matrix = Eigen::MatrixXd;

/// -1/K sum_i log(exp(x_i.y_i/tau) / sum_j exp(x_i.y_j/tau)), no
/// stabilisation.
inline double m2t_loss(const Matrix& x, const Matrix& y, double tau) {
  const Eigen::Index k = x.rows();
  long double total = 0.0L;
  for (Eigen::Index i = 0; i < k; ++i) {
    long double denom = 0.0L;
    long double pos = 0.0L;
    for (Eigen::Index j = 0; j < k; ++j) {
      long double dot = 0.0L;
      for (Eigen::Index e = 0; e < x.cols(); ++e) dot += (long double)x(i, e) * y(j, e);
      const long double s = std::exp(dot / tau);
      denom += s;
      if (i == j) pos = s;
    }
    total += -std::log(pos / denom);
  }
  return static_cast<double>(total / k);
}

/// Mean of -log softmax(logits row i)[target i] over rows with mask 1.
inline double masked_nll(const Matrix& logits, std::span<const int> targets,
                         std::span<const std::uint8_t> mask) {
  long double total = 0.0L;
  long count = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    if (!mask[static_cast<std::size_t>(i)]) continue;
    long double z = 0.0L;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) z += std::exp((long double)logits(i, c));
    total += -((long double)logits(i, targets[static_cast<std::size_t>(i)]) - std::log(z));
    ++count;
  }
  return static_cast<double>(total / count);
}

/// Frame-axis mean of T matrices of shape N x D.
inline Matrix mean_over_frames(const std::vector<Matrix>& frames) {
  const Eigen::Index n = frames.front().rows();
  const Eigen::Index d = frames.front().cols();
  Matrix out(n, d);
  for (Eigen::Index p = 0; p < n; ++p) {
    for (Eigen::Index c = 0; c < d; ++c) {
      long double s = 0.0L;
      for (const Matrix& f : frames) s += f(p, c);
      out(p, c) = static_cast<double>(s / frames.size());
    }
  }
  return out;
}

/// Patch-axis mean: row t is the mean of frame t's N rows.
inline Matrix mean_over_patches(const std::vector<Matrix>& frames) {
  const Eigen::Index d = frames.front().cols();
  Matrix out(static_cast<Eigen::Index>(frames.size()), d);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    for (Eigen::Index c = 0; c < d; ++c) {
      long double s = 0.0L;
      for (Eigen::Index p = 0; p < frames[t].rows(); ++p) s += frames[t](p, c);
      out(static_cast<Eigen::Index>(t), c) = static_cast<double>(s / frames[t].rows());
    }
  }
  return out;
}

/// Uniform [lo, hi) from the top 53 bits of mt19937_64, the documented
/// draw behind the toy encoder's initialisation.
inline double uniform_draw(std::mt19937_64& eng, double lo, double hi) {
  const double u = static_cast<double>(eng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

struct PatchEmbedderWeights {
  Matrix weight;  // P x D
  Matrix bias;    // 1 x D
};

inline PatchEmbedderWeights patch_embedder_init(int pixels_per_patch, int dim, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  const double b = 1.0 / std::sqrt(static_cast<double>(pixels_per_patch));
  PatchEmbedderWeights w{Matrix(pixels_per_patch, dim), Matrix(1, dim)};
  for (int r = 0; r < pixels_per_patch; ++r)
    for (int c = 0; c < dim; ++c) w.weight(r, c) = uniform_draw(eng, -b, b);
  for (int c = 0; c < dim; ++c) w.bias(0, c) = uniform_draw(eng, -b, b);
  return w;
}

/// Patch embedding of an H x W x C row-major (channel innermost) buffer:
/// patch (gy, gx) flattened as (y, x, c), times W, plus b.
inline Matrix patch_embed(const std::vector<double>& pixels, int h, int w, int channels, int grid,
                          const PatchEmbedderWeights& weights) {
  const int ph = h / grid;
  const int pw = w / grid;
  const Eigen::Index dim = weights.weight.cols();
  Matrix out(grid * grid, dim);
  for (int gy = 0; gy < grid; ++gy) {
    for (int gx = 0; gx < grid; ++gx) {
      for (Eigen::Index d = 0; d < dim; ++d) {
        long double acc = weights.bias(0, d);
        int k = 0;
        for (int y = 0; y < ph; ++y) {
          for (int x = 0; x < pw; ++x) {
            for (int c = 0; c < channels; ++c) {
              const int yy = gy * ph + y;
              const int xx = gx * pw + x;
              acc += (long double)pixels[(static_cast<std::size_t>(yy) * w + xx) * channels + c] *
                     weights.weight(k++, d);
            }
          }
        }
        out(gy * grid + gx, d) = static_cast<double>(acc);
      }
    }
  }
  return out;
}

/// Central differences of f with respect to every entry of m (restored
/// afterwards).
inline Matrix finite_difference(const std::function<double()>& f, Matrix& m, double h = 1e-5) {
  Matrix g(m.rows(), m.cols());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double keep = m(r, c);
      m(r, c) = keep + h;
      const double up = f();
      m(r, c) = keep - h;
      const double down = f();
      m(r, c) = keep;
      g(r, c) = (up - down) / (2.0 * h);
    }
  }
  return g;
}

/// ||a - b|| / max(||a|| + ||b||, floor).
inline double relative_error(const Matrix& a, const Matrix& b, double floor = 1e-12) {
  const double denom = std::max(a.norm() + b.norm(), floor);
  return (a - b).norm() / denom;
}

}  // namespace surgvl::oracle
