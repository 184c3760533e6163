// Copyright 2026 The surgvl Authors
// SPDX-License-Identifier: Apache-2.0

#include "surgvl/language_model.hpp"

#include <cmath>

#include <fmt/format.h>

#include "surgvl/errors.hpp"
#include "surgvl/rng.hpp"

namespace surgvl {

namespace {

ag::Var normal_param(Rng& rng, int rows, int cols, double std) {
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = std * rng.normal();
  }
  return ag::Var::parameter(std::move(m));
}

ag::Var zeros(int rows, int cols) { return ag::Var::parameter(Matrix::Zero(rows, cols)); }
ag::Var ones(int rows, int cols) { return ag::Var::parameter(Matrix::Ones(rows, cols)); }

}  // namespace

ToyTransformerLM::ToyTransformerLM(LanguageModelConfig config) : config_(config) {
  const auto& c = config_;
  if (c.vocab_size < 1 || c.width < 1 || c.layers < 0 || c.heads < 1 ||
      c.width % c.heads != 0 || c.mlp_hidden < 1 || c.max_positions < 1) {
    throw ConfigError(fmt::format(
        "invalid language model config: vocab {} width {} layers {} heads {} mlp {}",
        c.vocab_size, c.width, c.layers, c.heads, c.mlp_hidden));
  }
  Rng rng(c.seed);
  token_embedding_ = normal_param(rng, c.vocab_size, c.width, c.init_std);
  position_embedding_ = normal_param(rng, c.max_positions, c.width, c.init_std);
  // Residual output projections are scaled down with depth (GPT-2 style).
  const double out_std = c.init_std / std::sqrt(2.0 * std::max(1, c.layers));
  for (int l = 0; l < c.layers; ++l) {
    Block b;
    b.ln1_gamma = ones(1, c.width);
    b.ln1_beta = zeros(1, c.width);
    b.wq = normal_param(rng, c.width, c.width, c.init_std);
    b.bq = zeros(1, c.width);
    b.wk = normal_param(rng, c.width, c.width, c.init_std);
    b.bk = zeros(1, c.width);
    b.wv = normal_param(rng, c.width, c.width, c.init_std);
    b.bv = zeros(1, c.width);
    b.wo = normal_param(rng, c.width, c.width, out_std);
    b.bo = zeros(1, c.width);
    b.ln2_gamma = ones(1, c.width);
    b.ln2_beta = zeros(1, c.width);
    b.w1 = normal_param(rng, c.width, c.mlp_hidden, c.init_std);
    b.b1 = zeros(1, c.mlp_hidden);
    b.w2 = normal_param(rng, c.mlp_hidden, c.width, out_std);
    b.b2 = zeros(1, c.width);
    blocks_.push_back(std::move(b));
  }
  final_gamma_ = ones(1, c.width);
  final_beta_ = zeros(1, c.width);
  head_weight_ = normal_param(rng, c.width, c.vocab_size, c.init_std);
  head_bias_ = zeros(1, c.vocab_size);
}

ag::Var ToyTransformerLM::embed_tokens(std::span<const int> ids) const {
  for (int id : ids) {
    if (id < 0 || id >= config_.vocab_size) {
      throw InvalidInputError(fmt::format("token id {} outside vocabulary of {}", id,
                                          config_.vocab_size));
    }
  }
  return ag::gather_rows(token_embedding_, ids);
}

ag::Var ToyTransformerLM::attention(const Block& b, const ag::Var& x) const {
  const auto s = x.rows();
  const int heads = config_.heads;
  const int dh = config_.width / heads;
  ag::Var q = ag::add_row(ag::matmul(x, b.wq), b.bq);
  ag::Var k = ag::add_row(ag::matmul(x, b.wk), b.bk);
  ag::Var v = ag::add_row(ag::matmul(x, b.wv), b.bv);
  Matrix causal = Matrix::Zero(s, s);
  for (Eigen::Index i = 0; i < s; ++i) {
    for (Eigen::Index j = i + 1; j < s; ++j) causal(i, j) = -1e9;
  }
  ag::Var mask = ag::Var::constant(std::move(causal));
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<ag::Var> outs;
  outs.reserve(heads);
  for (int h = 0; h < heads; ++h) {
    ag::Var qh = ag::slice_cols(q, h * dh, dh);
    ag::Var kh = ag::slice_cols(k, h * dh, dh);
    ag::Var vh = ag::slice_cols(v, h * dh, dh);
    ag::Var scores = ag::add(ag::scale(ag::matmul(qh, ag::transpose(kh)), inv_sqrt), mask);
    outs.push_back(ag::matmul(ag::softmax_rows(scores), vh));
  }
  ag::Var merged = heads == 1 ? outs.front() : ag::concat_cols(outs);
  return ag::add_row(ag::matmul(merged, b.wo), b.bo);
}

ag::Var ToyTransformerLM::hidden_states(const ag::Var& embeddings) const {
  const auto s = embeddings.rows();
  if (s < 1) throw InvalidInputError("empty input sequence");
  if (s > config_.max_positions) {
    throw InvalidInputError(fmt::format("sequence of {} positions exceeds the {} supported",
                                        s, config_.max_positions));
  }
  if (embeddings.cols() != config_.width) {
    throw ConfigError(fmt::format("embedding width {} != model width {}", embeddings.cols(),
                                  config_.width));
  }
  ag::Var x = ag::add(embeddings, ag::slice_rows(position_embedding_, 0, s));
  for (const auto& b : blocks_) {
    x = ag::add(x, attention(b, ag::layer_norm_rows(x, b.ln1_gamma, b.ln1_beta)));
    ag::Var h = ag::layer_norm_rows(x, b.ln2_gamma, b.ln2_beta);
    h = ag::gelu(ag::add_row(ag::matmul(h, b.w1), b.b1));
    x = ag::add(x, ag::add_row(ag::matmul(h, b.w2), b.b2));
  }
  return ag::layer_norm_rows(x, final_gamma_, final_beta_);
}

ag::Var ToyTransformerLM::logits(const ag::Var& hidden) const {
  return ag::add_row(ag::matmul(hidden, head_weight_), head_bias_);
}

std::vector<NamedParameter> ToyTransformerLM::parameters() const {
  std::vector<NamedParameter> out = {{"lm.token_embedding", token_embedding_},
                                     {"lm.position_embedding", position_embedding_}};
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    const auto& b = blocks_[l];
    const std::string p = fmt::format("lm.block{}.", l);
    out.push_back({p + "ln1.gamma", b.ln1_gamma});
    out.push_back({p + "ln1.beta", b.ln1_beta});
    out.push_back({p + "attn.wq", b.wq});
    out.push_back({p + "attn.bq", b.bq});
    out.push_back({p + "attn.wk", b.wk});
    out.push_back({p + "attn.bk", b.bk});
    out.push_back({p + "attn.wv", b.wv});
    out.push_back({p + "attn.bv", b.bv});
    out.push_back({p + "attn.wo", b.wo});
    out.push_back({p + "attn.bo", b.bo});
    out.push_back({p + "ln2.gamma", b.ln2_gamma});
    out.push_back({p + "ln2.beta", b.ln2_beta});
    out.push_back({p + "mlp.w1", b.w1});
    out.push_back({p + "mlp.b1", b.b1});
    out.push_back({p + "mlp.w2", b.w2});
    out.push_back({p + "mlp.b2", b.b2});
  }
  out.push_back({"lm.final_ln.gamma", final_gamma_});
  out.push_back({"lm.final_ln.beta", final_beta_});
  out.push_back({"lm.head.weight", head_weight_});
  out.push_back({"lm.head.bias", head_bias_});
  return out;
}

}  // namespace surgvl
