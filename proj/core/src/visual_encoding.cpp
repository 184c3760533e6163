// Copyright 2026 The surgvl Authors
// SPDX-License-Identifier: Apache-2.0

#include "surgvl/visual_encoding.hpp"

#include <cmath>

#include <fmt/format.h>

#include "surgvl/errors.hpp"
#include "surgvl/rng.hpp"

namespace surgvl {

std::string to_string(Modality m) {
  return m == Modality::image ? "image" : "video";
}

Modality modality_from_string(const std::string& s) {
  if (s == "image") return Modality::image;
  if (s == "video") return Modality::video;
  throw InvalidInputError(fmt::format("unknown modality '{}'", s));
}

std::string to_string(ConcatOrder order) {
  return order == ConcatOrder::temporal_first ? "temporal_first"
                                              : "spatial_first";
}

ConcatOrder concat_order_from_string(const std::string& s) {
  if (s == "temporal_first") return ConcatOrder::temporal_first;
  if (s == "spatial_first") return ConcatOrder::spatial_first;
  throw ConfigError(fmt::format("unknown concat order '{}'", s));
}

VideoTensor VideoTensor::from_frames(const std::vector<Image>& frames,
                                     double fps) {
  if (frames.empty()) throw InvalidInputError("video has no frames");
  const Image& f0 = frames.front();
  VideoTensor v(static_cast<int>(frames.size()), f0.height, f0.width,
                f0.channels, fps);
  for (int t = 0; t < v.frames; ++t) v.set_frame(t, frames[t]);
  return v;
}

Image VideoTensor::frame(int t) const {
  if (t < 0 || t >= frames) {
    throw InvalidInputError(fmt::format("frame {} out of range [0,{})", t, frames));
  }
  Image img(height, width, channels);
  const auto off = static_cast<std::ptrdiff_t>(frame_size()) * t;
  std::copy(data.begin() + off, data.begin() + off + frame_size(),
            img.data.begin());
  return img;
}

void VideoTensor::set_frame(int t, const Image& img) {
  if (img.height != height || img.width != width || img.channels != channels) {
    throw InvalidInputError(fmt::format(
        "frame shape {}x{}x{} does not match video {}x{}x{}", img.height,
        img.width, img.channels, height, width, channels));
  }
  const auto off = static_cast<std::ptrdiff_t>(frame_size()) * t;
  std::copy(img.data.begin(), img.data.end(), data.begin() + off);
}

namespace {

void check_finite(const std::vector<double>& data, const char* what) {
  for (double v : data) {
    if (!std::isfinite(v)) {
      throw InvalidInputError(fmt::format("{} contains non-finite values", what));
    }
  }
}

}  // namespace

void validate(const Image& img) {
  if (img.height < 1 || img.width < 1 || img.channels < 1) {
    throw InvalidInputError(fmt::format("image dimensions {}x{}x{} must be positive",
                                        img.height, img.width, img.channels));
  }
  if (img.data.size() !=
      static_cast<std::size_t>(img.height) * img.width * img.channels) {
    throw InvalidInputError("image buffer size does not match dimensions");
  }
  check_finite(img.data, "image");
}

void validate(const VideoTensor& video) {
  if (video.frames < 1) {
    throw InvalidInputError("video must have at least one frame (T >= 1)");
  }
  if (video.height < 1 || video.width < 1 || video.channels < 1) {
    throw InvalidInputError(fmt::format("video frame dimensions {}x{}x{} must be positive",
                                        video.height, video.width, video.channels));
  }
  if (video.data.size() != video.frame_size() * video.frames) {
    throw InvalidInputError("video buffer size does not match dimensions");
  }
  if (!(video.fps > 0.0)) throw InvalidInputError("video fps must be positive");
  check_finite(video.data, "video");
}

void FrameEncoder::check_shape(const Image& image) const {
  const auto& c = config();
  if (image.height != c.image_height || image.width != c.image_width ||
      image.channels != c.channels) {
    throw ConfigError(fmt::format(
        "frame encoder expects {}x{}x{} input, got {}x{}x{}", c.image_height,
        c.image_width, c.channels, image.height, image.width, image.channels));
  }
}

Matrix extract_patches(const Image& image, int patch_grid) {
  if (patch_grid < 1 || image.height % patch_grid != 0 ||
      image.width % patch_grid != 0) {
    throw ConfigError(fmt::format("image {}x{} is not divisible into a {}x{} patch grid",
                                  image.height, image.width, patch_grid, patch_grid));
  }
  const int ph = image.height / patch_grid;
  const int pw = image.width / patch_grid;
  const int p = ph * pw * image.channels;
  Matrix out(patch_grid * patch_grid, p);
  for (int gy = 0; gy < patch_grid; ++gy) {
    for (int gx = 0; gx < patch_grid; ++gx) {
      const int row = gy * patch_grid + gx;
      int col = 0;
      for (int y = 0; y < ph; ++y) {
        for (int x = 0; x < pw; ++x) {
          for (int c = 0; c < image.channels; ++c) {
            out(row, col++) = image.at(gy * ph + y, gx * pw + x, c);
          }
        }
      }
    }
  }
  return out;
}

namespace {

int patch_pixels(const FrameEncoderConfig& c) {
  if (c.patch_grid < 1 || c.image_height % c.patch_grid != 0 ||
      c.image_width % c.patch_grid != 0 || c.channels < 1) {
    throw ConfigError(fmt::format("invalid encoder geometry {}x{}x{} with grid {}",
                                  c.image_height, c.image_width, c.channels,
                                  c.patch_grid));
  }
  return (c.image_height / c.patch_grid) * (c.image_width / c.patch_grid) *
         c.channels;
}

Matrix uniform_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols,
                      double bound) {
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(-bound, bound);
  }
  return m;
}

}  // namespace

PatchEmbedder::PatchEmbedder(FrameEncoderConfig config) : config_(config) {
  const int p = patch_pixels(config_);
  if (config_.embed_dim < 1) throw ConfigError("embed_dim must be positive");
  Rng rng(config_.seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(p));
  weight_ = ag::Var::parameter(uniform_matrix(rng, p, config_.embed_dim, bound));
  bias_ = ag::Var::parameter(uniform_matrix(rng, 1, config_.embed_dim, bound));
}

PatchEmbedder::PatchEmbedder(FrameEncoderConfig config, Matrix weight,
                             Matrix bias)
    : config_(config) {
  const int p = patch_pixels(config_);
  if (weight.rows() != p || weight.cols() != config_.embed_dim ||
      bias.rows() != 1 || bias.cols() != config_.embed_dim) {
    throw ConfigError(fmt::format("patch embedder expects weight {}x{} and bias 1x{}",
                                  p, config_.embed_dim, config_.embed_dim));
  }
  weight_ = ag::Var::parameter(std::move(weight));
  bias_ = ag::Var::parameter(std::move(bias));
}

ag::Var PatchEmbedder::encode(const Image& image) const {
  check_shape(image);
  auto patches = ag::Var::constant(extract_patches(image, config_.patch_grid));
  return ag::add_row(ag::matmul(patches, weight_), bias_);
}

std::vector<NamedParameter> PatchEmbedder::parameters() const {
  return {{"encoder.weight", weight_}, {"encoder.bias", bias_}};
}

IdentityPatchEncoder::IdentityPatchEncoder(FrameEncoderConfig config)
    : config_(config) {
  config_.embed_dim = patch_pixels(config_);
}

int IdentityPatchEncoder::embed_dim() const { return config_.embed_dim; }

ag::Var IdentityPatchEncoder::encode(const Image& image) const {
  check_shape(image);
  return ag::Var::constant(extract_patches(image, config_.patch_grid));
}

Projection::Projection(ProjectionConfig config) : config_(config) {
  if (config_.in_dim < 1 || config_.out_dim < 1) {
    throw ConfigError("projection widths must be positive");
  }
  Rng rng(config_.seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(config_.in_dim));
  weight_ = ag::Var::parameter(
      uniform_matrix(rng, config_.in_dim, config_.out_dim, bound));
  bias_ = ag::Var::parameter(uniform_matrix(rng, 1, config_.out_dim, bound));
}

Projection::Projection(Matrix weight, Matrix bias) {
  if (bias.rows() != 1 || bias.cols() != weight.cols()) {
    throw ConfigError(fmt::format("projection bias must be 1x{}, got {}x{}",
                                  weight.cols(), bias.rows(), bias.cols()));
  }
  config_.in_dim = static_cast<int>(weight.rows());
  config_.out_dim = static_cast<int>(weight.cols());
  weight_ = ag::Var::parameter(std::move(weight));
  bias_ = ag::Var::parameter(std::move(bias));
}

ag::Var Projection::apply(const ag::Var& rows) const {
  if (rows.cols() != config_.in_dim) {
    throw ConfigError(fmt::format("projection expects input width {}, got {}",
                                  config_.in_dim, rows.cols()));
  }
  return ag::add_row(ag::matmul(rows, weight_), bias_);
}

std::vector<NamedParameter> Projection::parameters() const {
  return {{"projection.weight", weight_}, {"projection.bias", bias_}};
}

PatchEmbeddings encode_image(const Image& image, const FrameEncoder& encoder) {
  validate(image);
  PatchEmbeddings pe;
  pe.frames.push_back(encoder.encode(image).value());
  return pe;
}

PatchEmbeddings encode_video_frames(const VideoTensor& video,
                                    const FrameEncoder& encoder) {
  validate(video);
  PatchEmbeddings pe;
  pe.frames.reserve(video.frames);
  for (int t = 0; t < video.frames; ++t) {
    pe.frames.push_back(encoder.encode(video.frame(t)).value());
  }
  return pe;
}

namespace {

void check_embeddings(const PatchEmbeddings& pe) {
  if (pe.frames.empty()) throw InvalidInputError("patch embeddings have no frames");
  const auto n = pe.frames.front().rows();
  const auto d = pe.frames.front().cols();
  if (n < 1 || d < 1) throw InvalidInputError("patch embeddings must have N, D >= 1");
  for (const auto& f : pe.frames) {
    if (f.rows() != n || f.cols() != d) {
      throw InvalidInputError("patch embedding frames differ in shape");
    }
  }
}

}  // namespace

// Means accumulate in long double so reduced-precision callers don't pick up
// summation-order artifacts.
Matrix pool_temporal(const PatchEmbeddings& pe) {
  check_embeddings(pe);
  const auto n = pe.frames.front().rows();
  const auto d = pe.frames.front().cols();
  const auto t_count = static_cast<long double>(pe.frames.size());
  Matrix out(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      long double acc = 0.0L;
      for (const auto& f : pe.frames) acc += f(i, j);
      out(i, j) = static_cast<double>(acc / t_count);
    }
  }
  return out;
}

Matrix pool_spatial(const PatchEmbeddings& pe) {
  check_embeddings(pe);
  const auto n = pe.frames.front().rows();
  const auto d = pe.frames.front().cols();
  Matrix out(static_cast<Eigen::Index>(pe.frames.size()), d);
  for (std::size_t t = 0; t < pe.frames.size(); ++t) {
    for (Eigen::Index j = 0; j < d; ++j) {
      long double acc = 0.0L;
      for (Eigen::Index i = 0; i < n; ++i) acc += pe.frames[t](i, j);
      out(static_cast<Eigen::Index>(t), j) =
          static_cast<double>(acc / static_cast<long double>(n));
    }
  }
  return out;
}

Matrix assemble_video_tokens(const Matrix& temporal, const Matrix& spatial,
                             ConcatOrder order) {
  if (temporal.cols() != spatial.cols()) {
    throw InvalidInputError(fmt::format("temporal width {} != spatial width {}",
                                        temporal.cols(), spatial.cols()));
  }
  Matrix out(temporal.rows() + spatial.rows(), temporal.cols());
  const Matrix& first = order == ConcatOrder::temporal_first ? temporal : spatial;
  const Matrix& second = order == ConcatOrder::temporal_first ? spatial : temporal;
  out.topRows(first.rows()) = first;
  out.bottomRows(second.rows()) = second;
  return out;
}

VideoFeatures video_features(const PatchEmbeddings& pe, ConcatOrder order) {
  VideoFeatures f;
  f.temporal = pool_temporal(pe);
  f.spatial = pool_spatial(pe);
  f.tokens = assemble_video_tokens(f.temporal, f.spatial, order);
  return f;
}

ProjectedVisualTokens project_to_language(const Matrix& tokens,
                                          const Projection& projection,
                                          Modality modality) {
  ProjectedVisualTokens out;
  out.data = projection.apply(ag::Var::constant(tokens)).value();
  out.modality = modality;
  return out;
}

VideoTensor sample_frames(const VideoTensor& video, int max_frames) {
  if (max_frames < 1) throw ConfigError("max_frames must be >= 1");
  if (video.frames <= max_frames) return video;
  VideoTensor out(max_frames, video.height, video.width, video.channels,
                  video.fps * static_cast<double>(max_frames) / video.frames);
  for (int i = 0; i < max_frames; ++i) {
    const int src = static_cast<int>(
        (static_cast<long long>(i) * video.frames) / max_frames);
    out.set_frame(i, video.frame(src));
  }
  return out;
}

ag::Var visual_token_rows(const Visual& visual, const FrameEncoder& encoder,
                          const VisualPipelineConfig& config) {
  if (const auto* img = std::get_if<Image>(&visual)) {
    validate(*img);
    return encoder.encode(*img);
  }
  const auto& raw = std::get<VideoTensor>(visual);
  validate(raw);
  const VideoTensor video = sample_frames(raw, config.max_frames);
  std::vector<ag::Var> frames;
  std::vector<ag::Var> spatial_rows;
  frames.reserve(video.frames);
  for (int t = 0; t < video.frames; ++t) {
    frames.push_back(encoder.encode(video.frame(t)));
    spatial_rows.push_back(ag::mean_rows(frames.back()));
  }
  ag::Var temporal = ag::average(frames);
  ag::Var spatial = ag::concat_rows(spatial_rows);
  std::vector<ag::Var> blocks =
      config.concat_order == ConcatOrder::temporal_first
          ? std::vector<ag::Var>{temporal, spatial}
          : std::vector<ag::Var>{spatial, temporal};
  return ag::concat_rows(blocks);
}

}  // namespace surgvl
