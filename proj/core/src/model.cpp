// Copyright 2026 The surgvl Authors
// SPDX-License-Identifier: Apache-2.0

#include "surgvl/model.hpp"

#include <fmt/format.h>

#include "surgvl/errors.hpp"
#include "surgvl/training.hpp"

namespace surgvl {

std::string to_string(ModelPart p) {
  switch (p) {
    case ModelPart::encoder:
      return "encoder";
    case ModelPart::projection:
      return "projection";
    case ModelPart::language_model:
      return "language_model";
  }
  return "projection";
}

ModelPart model_part_from_string(const std::string& s) {
  if (s == "encoder") return ModelPart::encoder;
  if (s == "projection") return ModelPart::projection;
  if (s == "language_model" || s == "lm") return ModelPart::language_model;
  throw ConfigError(fmt::format("unknown model part '{}'", s));
}

std::unique_ptr<FrameEncoder> make_frame_encoder(const std::string& kind,
                                                 const FrameEncoderConfig& config) {
  if (kind == "patch_embedder") return std::make_unique<PatchEmbedder>(config);
  if (kind == "identity") return std::make_unique<IdentityPatchEncoder>(config);
  throw ConfigError(fmt::format("unknown frame encoder '{}'", kind));
}

std::unique_ptr<Tokenizer> build_tokenizer(std::span<const std::string> texts,
                                           const ChatTemplate& tmpl) {
  const auto reserved = tmpl.reserved_tokens();
  return std::make_unique<WordTokenizer>(WordTokenizer::build(texts, reserved));
}

namespace {

Projection make_projection(const AssistantConfig& c, const FrameEncoder& enc) {
  return Projection(ProjectionConfig{enc.embed_dim(), c.lm.width, c.projection_seed});
}

LanguageModelConfig lm_config(AssistantConfig c, const Tokenizer& tok) {
  c.lm.vocab_size = tok.vocab_size();
  return c.lm;
}

}  // namespace

Assistant::Assistant(AssistantConfig config, std::unique_ptr<Tokenizer> tokenizer)
    : config_(std::move(config)),
      encoder_(make_frame_encoder(config_.encoder_kind, config_.encoder)),
      projection_(make_projection(config_, *encoder_)),
      lm_(std::make_unique<ToyTransformerLM>(lm_config(config_, *tokenizer))),
      tokenizer_(std::move(tokenizer)) {
  config_.lm.vocab_size = tokenizer_->vocab_size();
  validate(config_.chat);
}

Assistant::Assistant(AssistantConfig config, std::unique_ptr<FrameEncoder> encoder,
                     Projection projection, std::unique_ptr<LanguageModel> lm,
                     std::unique_ptr<Tokenizer> tokenizer)
    : config_(std::move(config)),
      encoder_(std::move(encoder)),
      projection_(std::move(projection)),
      lm_(std::move(lm)),
      tokenizer_(std::move(tokenizer)) {
  if (projection_.config().in_dim != encoder_->embed_dim()) {
    throw ConfigError(fmt::format("projection input width {} != encoder width {}",
                                  projection_.config().in_dim, encoder_->embed_dim()));
  }
  if (projection_.config().out_dim != lm_->width()) {
    throw ConfigError(fmt::format("projection output width {} != language model width {}",
                                  projection_.config().out_dim, lm_->width()));
  }
  if (lm_->vocab_size() != tokenizer_->vocab_size()) {
    throw ConfigError(fmt::format("language model vocabulary {} != tokenizer vocabulary {}",
                                  lm_->vocab_size(), tokenizer_->vocab_size()));
  }
  config_.lm.vocab_size = tokenizer_->vocab_size();
  validate(config_.chat);
}

ag::Var Assistant::visual_tokens(const Visual& visual) const {
  return projection_.apply(visual_token_rows(visual, *encoder_, config_.visual));
}

ProjectedVisualTokens Assistant::encode_visual(const Visual& visual) const {
  return {visual_tokens(visual).value(), modality_of(visual)};
}

ag::Var Assistant::modality_embedding(const Visual& visual) const {
  return ag::mean_rows(visual_tokens(visual));
}

ag::Var Assistant::text_embedding(const std::string& caption) const {
  const auto ids = tokenizer_->encode(caption);
  if (ids.empty()) throw InvalidInputError("caption tokenizes to an empty sequence");
  return pool_text(lm_->hidden_states(lm_->embed_tokens(ids)), config_.text_pooling);
}

SplicedSequence Assistant::splice(const TokenizedExample& example,
                                  const Visual& visual) const {
  return splice_visual(example, visual_tokens(visual), lm_->embed_tokens(example.token_ids));
}

ag::Var Assistant::next_token_logits(const SplicedSequence& seq) const {
  return lm_->logits(lm_->hidden_states(seq.embeddings));
}

ag::Var Assistant::instruction_loss(const TokenizedExample& example,
                                    const Visual& visual) const {
  const SplicedSequence seq = splice(example, visual);
  return autoregressive_nll(next_token_logits(seq), seq);
}

Generation Assistant::generate(const Visual* visual, const std::string& rendered_prompt,
                               int max_new_tokens) const {
  const ParsedConversation parsed = parse_rendered(rendered_prompt, config_.chat);
  if (parsed.turns.empty() || parsed.turn_answered.back()) {
    throw InvalidInputError("generation prompt must end with an open assistant turn");
  }
  const TokenizedExample prompt =
      tokenize_and_mask(rendered_prompt, {}, *tokenizer_, config_.chat);
  const int eot = tokenizer_->encode(config_.chat.end_of_turn).front();

  ag::Var visual_rows;
  if (visual != nullptr) visual_rows = visual_tokens(*visual);

  Generation out;
  std::vector<int> ids = prompt.token_ids;
  for (int step = 0; step < max_new_tokens; ++step) {
    ag::Var text = lm_->embed_tokens(ids);
    ag::Var seq;
    if (visual_rows.valid()) {
      TokenizedExample cur = prompt;
      cur.token_ids = ids;
      cur.loss_mask.assign(ids.size(), 0);
      seq = splice_visual(cur, visual_rows, text).embeddings;
    } else {
      // No visual: drop the placeholder row.
      const auto start = static_cast<Eigen::Index>(prompt.visual_start);
      std::vector<ag::Var> parts;
      if (start > 0) parts.push_back(ag::slice_rows(text, 0, start));
      if (start + 1 < text.rows()) {
        parts.push_back(ag::slice_rows(text, start + 1, text.rows() - start - 1));
      }
      seq = ag::concat_rows(parts);
    }
    if (seq.rows() >= lm_->max_positions()) {
      out.truncated = true;
      break;
    }
    const Matrix logits = lm_->logits(lm_->hidden_states(seq)).value();
    Eigen::Index best = 0;
    logits.row(logits.rows() - 1).maxCoeff(&best);
    const int next = static_cast<int>(best);
    if (next == eot) {
      out.text = tokenizer_->decode(out.token_ids);
      return out;
    }
    out.token_ids.push_back(next);
    ids.push_back(next);
  }
  out.truncated = true;
  out.text = tokenizer_->decode(out.token_ids);
  return out;
}

std::vector<NamedParameter> Assistant::parameters(ModelPart part) const {
  switch (part) {
    case ModelPart::encoder:
      return encoder_->parameters();
    case ModelPart::projection:
      return projection_.parameters();
    case ModelPart::language_model:
      return lm_->parameters();
  }
  return {};
}

std::vector<NamedParameter> Assistant::all_parameters() const {
  std::vector<NamedParameter> out;
  for (auto part : {ModelPart::encoder, ModelPart::projection, ModelPart::language_model}) {
    auto p = parameters(part);
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

}  // namespace surgvl
