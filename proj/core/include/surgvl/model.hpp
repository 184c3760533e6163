// Copyright 2026 The surgvl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "surgvl/contrastive.hpp"
#include "surgvl/conversation.hpp"
#include "surgvl/language_model.hpp"
#include "surgvl/tokenizer.hpp"
#include "surgvl/visual_encoding.hpp"

namespace surgvl {

enum class ModelPart { encoder, projection, language_model };
std::string to_string(ModelPart p);
ModelPart model_part_from_string(const std::string& s);

struct AssistantConfig {
  std::string encoder_kind = "patch_embedder";  // or "identity"
  FrameEncoderConfig encoder;
  std::uint64_t projection_seed = 11;
  LanguageModelConfig lm;  // vocab_size is taken from the tokenizer
  VisualPipelineConfig visual;
  TextPooling text_pooling = TextPooling::mean;
  ChatTemplate chat;
  HistoryMode history_mode = HistoryMode::full;
};

struct Generation {
  std::string text;
  std::vector<int> token_ids;
  bool truncated = false;  // hit max_new_tokens before end-of-turn
};

/// Frame encoder + projection + language model + tokenizer.
class Assistant {
 public:
  /// Builds the toy components described by `config`.
  Assistant(AssistantConfig config, std::unique_ptr<Tokenizer> tokenizer);
  Assistant(AssistantConfig config, std::unique_ptr<FrameEncoder> encoder,
            Projection projection, std::unique_ptr<LanguageModel> lm,
            std::unique_ptr<Tokenizer> tokenizer);

  Assistant(Assistant&&) noexcept = default;
  Assistant& operator=(Assistant&&) noexcept = default;

  const AssistantConfig& config() const { return config_; }
  const FrameEncoder& encoder() const { return *encoder_; }
  const Projection& projection() const { return projection_; }
  const LanguageModel& language_model() const { return *lm_; }
  const Tokenizer& tokenizer() const { return *tokenizer_; }

  /// M x D_lm projected visual tokens (M = N for images, N + T for videos).
  ag::Var visual_tokens(const Visual& visual) const;
  ProjectedVisualTokens encode_visual(const Visual& visual) const;

  /// One pooled vector per sample for the contrastive objective.
  ag::Var modality_embedding(const Visual& visual) const;
  ag::Var text_embedding(const std::string& caption) const;

  SplicedSequence splice(const TokenizedExample& example, const Visual& visual) const;
  /// S x vocab next-token logits over a spliced sequence.
  ag::Var next_token_logits(const SplicedSequence& seq) const;
  /// Mean next-token NLL over the example's supervised positions.
  ag::Var instruction_loss(const TokenizedExample& example, const Visual& visual) const;

  /// Greedy decoding after a rendered prompt that ends in the assistant
  /// marker. Stops at end-of-turn or after max_new_tokens.
  Generation generate(const Visual* visual, const std::string& rendered_prompt,
                      int max_new_tokens) const;

  std::vector<NamedParameter> parameters(ModelPart part) const;
  std::vector<NamedParameter> all_parameters() const;

 private:
  AssistantConfig config_;
  std::unique_ptr<FrameEncoder> encoder_;
  Projection projection_;
  std::unique_ptr<LanguageModel> lm_;
  std::unique_ptr<Tokenizer> tokenizer_;
};

std::unique_ptr<FrameEncoder> make_frame_encoder(const std::string& kind,
                                                 const FrameEncoderConfig& config);

/// Word tokenizer over `texts` with the template's reserved tokens.
std::unique_ptr<Tokenizer> build_tokenizer(std::span<const std::string> texts,
                                           const ChatTemplate& tmpl);

}  // namespace surgvl
