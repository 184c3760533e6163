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

/// Decoder-only language model interface. hidden_states must be causal:
/// row p may depend only on embedding rows 0..p.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;

  virtual std::string kind() const = 0;
  virtual int width() const = 0;
  virtual int vocab_size() const = 0;
  virtual int max_positions() const = 0;

  virtual ag::Var embed_tokens(std::span<const int> ids) const = 0;
  virtual ag::Var hidden_states(const ag::Var& embeddings) const = 0;
  /// S x vocab; row p scores the token at position p + 1.
  virtual ag::Var logits(const ag::Var& hidden) const = 0;
  virtual std::vector<NamedParameter> parameters() const = 0;
};

struct LanguageModelConfig {
  int vocab_size = 0;
  int width = 64;
  int layers = 2;
  int heads = 2;
  int mlp_hidden = 128;
  int max_positions = 256;
  std::uint64_t seed = 13;
  double init_std = 0.02;
};

/// Pre-LayerNorm transformer: learned positions, causal multi-head
/// attention, GELU MLP, final LayerNorm and an untied output head.
class ToyTransformerLM final : public LanguageModel {
 public:
  explicit ToyTransformerLM(LanguageModelConfig config);

  std::string kind() const override { return "toy_transformer"; }
  int width() const override { return config_.width; }
  int vocab_size() const override { return config_.vocab_size; }
  int max_positions() const override { return config_.max_positions; }
  const LanguageModelConfig& config() const { return config_; }

  ag::Var embed_tokens(std::span<const int> ids) const override;
  ag::Var hidden_states(const ag::Var& embeddings) const override;
  ag::Var logits(const ag::Var& hidden) const override;
  std::vector<NamedParameter> parameters() const override;

 private:
  struct Block {
    ag::Var ln1_gamma, ln1_beta;
    ag::Var wq, bq, wk, bk, wv, bv, wo, bo;
    ag::Var ln2_gamma, ln2_beta;
    ag::Var w1, b1, w2, b2;
  };

  ag::Var attention(const Block& b, const ag::Var& x) const;

  LanguageModelConfig config_;
  ag::Var token_embedding_;
  ag::Var position_embedding_;
  std::vector<Block> blocks_;
  ag::Var final_gamma_, final_beta_;
  ag::Var head_weight_, head_bias_;
};

}  // namespace surgvl
