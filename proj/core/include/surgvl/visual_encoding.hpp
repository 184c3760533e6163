// Copyright 2026 The surgvl Authors
// SPDX-License-Identifier: Apache-2.0
//
// Images and videos to projected visual tokens: a pluggable frame encoder
// produces per-frame patch embeddings, videos are pooled along the frame
// axis (one row per patch) and the patch axis (one row per frame), the two
// blocks are concatenated, and an affine projection maps every row into the
// language model's embedding width.

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "surgvl/autograd.hpp"

namespace surgvl {

using ag::Matrix;

/// H x W x C pixels, row-major with channels innermost.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;

  Image() = default;
  Image(int h, int w, int c, double fill = 0.0)
      : height(h), width(w), channels(c),
        data(static_cast<std::size_t>(h) * w * c, fill) {}

  double& at(int y, int x, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  double at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

/// T x H x W x C frames plus the rate they were sampled at.
struct VideoTensor {
  int frames = 0;
  int height = 0;
  int width = 0;
  int channels = 0;
  double fps = 1.0;
  std::vector<double> data;

  VideoTensor() = default;
  VideoTensor(int t, int h, int w, int c, double rate = 1.0)
      : frames(t), height(h), width(w), channels(c), fps(rate),
        data(static_cast<std::size_t>(t) * h * w * c, 0.0) {}

  static VideoTensor from_frames(const std::vector<Image>& frames, double fps);

  std::size_t frame_size() const {
    return static_cast<std::size_t>(height) * width * channels;
  }
  Image frame(int t) const;
  void set_frame(int t, const Image& img);
};

enum class Modality { image, video };

using Visual = std::variant<Image, VideoTensor>;

inline Modality modality_of(const Visual& v) {
  return std::holds_alternative<Image>(v) ? Modality::image : Modality::video;
}
std::string to_string(Modality m);
Modality modality_from_string(const std::string& s);

/// Throws InvalidInputError unless dimensions are positive and all values
/// are finite.
void validate(const Image& img);
void validate(const VideoTensor& video);

/// T x N x D, one N x D matrix per frame.
struct PatchEmbeddings {
  std::vector<Matrix> frames;

  int frame_count() const { return static_cast<int>(frames.size()); }
  int patch_count() const {
    return frames.empty() ? 0 : static_cast<int>(frames.front().rows());
  }
  int dim() const {
    return frames.empty() ? 0 : static_cast<int>(frames.front().cols());
  }
};

struct VideoFeatures {
  Matrix temporal;  // N x D
  Matrix spatial;   // T x D
  Matrix tokens;    // (N + T) x D
};

struct ProjectedVisualTokens {
  Matrix data;  // M x D_lm
  Modality modality = Modality::image;
};

enum class ConcatOrder { temporal_first, spatial_first };
std::string to_string(ConcatOrder order);
ConcatOrder concat_order_from_string(const std::string& s);

struct NamedParameter {
  std::string name;
  ag::Var var;
};

struct FrameEncoderConfig {
  int patch_grid = 2;  // patches per side, N = patch_grid^2
  int embed_dim = 32;
  int image_height = 8;
  int image_width = 8;
  int channels = 3;
  std::uint64_t seed = 7;
};

/// Maps one H x W x C frame to N x D patch embeddings.
class FrameEncoder {
 public:
  virtual ~FrameEncoder() = default;

  virtual std::string kind() const = 0;
  virtual const FrameEncoderConfig& config() const = 0;
  int patch_count() const { return config().patch_grid * config().patch_grid; }
  virtual int embed_dim() const = 0;

  /// Differentiable with respect to the encoder's parameters.
  virtual ag::Var encode(const Image& image) const = 0;
  virtual std::vector<NamedParameter> parameters() const = 0;

  /// Throws ConfigError when `image` does not match the configured shape.
  void check_shape(const Image& image) const;
};

/// Splits the frame into a patch_grid x patch_grid grid (row-major patch
/// order) and flattens each patch as (y, x, c). Returns N x P.
Matrix extract_patches(const Image& image, int patch_grid);

/// Toy stand-in for a ViT patch embedder: flattened patch times W plus b.
/// W is P x D and b is 1 x D, both uniform in [-1/sqrt(P), 1/sqrt(P)] drawn
/// from Rng(seed), W row-major first, then b.
class PatchEmbedder final : public FrameEncoder {
 public:
  explicit PatchEmbedder(FrameEncoderConfig config);
  PatchEmbedder(FrameEncoderConfig config, Matrix weight, Matrix bias);

  std::string kind() const override { return "patch_embedder"; }
  const FrameEncoderConfig& config() const override { return config_; }
  int embed_dim() const override { return config_.embed_dim; }
  ag::Var encode(const Image& image) const override;
  std::vector<NamedParameter> parameters() const override;

  const ag::Var& weight() const { return weight_; }
  const ag::Var& bias() const { return bias_; }

 private:
  FrameEncoderConfig config_;
  ag::Var weight_;
  ag::Var bias_;
};

/// Parameter-free encoder whose embeddings are the flattened pixel blocks
/// (D = pixels per patch x channels). embed_dim in the config is ignored.
class IdentityPatchEncoder final : public FrameEncoder {
 public:
  explicit IdentityPatchEncoder(FrameEncoderConfig config);

  std::string kind() const override { return "identity"; }
  const FrameEncoderConfig& config() const override { return config_; }
  int embed_dim() const override;
  ag::Var encode(const Image& image) const override;
  std::vector<NamedParameter> parameters() const override { return {}; }

 private:
  FrameEncoderConfig config_;
};

struct ProjectionConfig {
  int in_dim = 32;
  int out_dim = 64;
  std::uint64_t seed = 11;
};

/// Rowwise affine map x W + b with W in_dim x out_dim.
class Projection {
 public:
  explicit Projection(ProjectionConfig config);
  Projection(Matrix weight, Matrix bias);

  const ProjectionConfig& config() const { return config_; }
  ag::Var apply(const ag::Var& rows) const;
  std::vector<NamedParameter> parameters() const;

  const ag::Var& weight() const { return weight_; }
  const ag::Var& bias() const { return bias_; }

 private:
  ProjectionConfig config_;
  ag::Var weight_;
  ag::Var bias_;
};

PatchEmbeddings encode_image(const Image& image, const FrameEncoder& encoder);
PatchEmbeddings encode_video_frames(const VideoTensor& video,
                                    const FrameEncoder& encoder);

/// Mean over the frame axis: N x D.
Matrix pool_temporal(const PatchEmbeddings& pe);
/// Mean over the patch axis: T x D.
Matrix pool_spatial(const PatchEmbeddings& pe);

Matrix assemble_video_tokens(const Matrix& temporal, const Matrix& spatial,
                             ConcatOrder order = ConcatOrder::temporal_first);

VideoFeatures video_features(const PatchEmbeddings& pe,
                             ConcatOrder order = ConcatOrder::temporal_first);

ProjectedVisualTokens project_to_language(const Matrix& tokens,
                                          const Projection& projection,
                                          Modality modality);

/// Uniform-stride subsample to at most max_frames frames:
/// frame i of the result is source frame floor(i * T / max_frames).
VideoTensor sample_frames(const VideoTensor& video, int max_frames);

struct VisualPipelineConfig {
  ConcatOrder concat_order = ConcatOrder::temporal_first;
  int max_frames = 8;
};

/// Differentiable pre-projection tokens: N rows for an image, N + T rows
/// for a (frame-sampled) video.
ag::Var visual_token_rows(const Visual& visual, const FrameEncoder& encoder,
                          const VisualPipelineConfig& config);

}  // namespace surgvl
