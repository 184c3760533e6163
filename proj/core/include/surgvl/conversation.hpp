// Copyright 2026 The surgvl Authors
// SPDX-License-Identifier: Apache-2.0
//
// Multi-round conversation inputs: round concatenation, chat-template
// rendering with a single visual placeholder, answer-only loss masks and
// splicing of projected visual tokens into the text embedding sequence.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "surgvl/autograd.hpp"
#include "surgvl/tokenizer.hpp"
#include "surgvl/visual_encoding.hpp"

namespace surgvl {

enum class TaskKind { conversation, detail_description, complex_reasoning };
std::string to_string(TaskKind k);
TaskKind task_kind_from_string(const std::string& s);
/// Accepts the CLI short names conv, detail, reason as well as full names.
TaskKind task_kind_from_short(const std::string& s);
inline constexpr TaskKind kAllTaskKinds[] = {
    TaskKind::conversation, TaskKind::detail_description,
    TaskKind::complex_reasoning};

struct Round {
  std::string query;
  std::string answer;
};

struct ConversationRecord {
  std::string visual_ref;
  std::vector<Round> rounds;
  TaskKind task_kind = TaskKind::conversation;
};

/// Throws InvalidInputError on an empty record, empty query, or an empty
/// answer anywhere but the final round.
void validate(const ConversationRecord& record);

enum class HistoryMode { full, previous_only };
std::string to_string(HistoryMode m);
HistoryMode history_mode_from_string(const std::string& s);

/// Separator used when concatenating queries and answers.
inline constexpr std::string_view kRoundSeparator = "\n";

/// Text input for round r (1-based). full: every earlier query/answer then
/// the current query; previous_only: round r-1's pair then the current
/// query.
std::string build_round_input(const ConversationRecord& record, int r,
                              HistoryMode mode);

enum class VisualPlacement { before_first_query, after_first_query };

struct ChatTemplate {
  std::string system_prompt =
      "You are a surgical assistant. Answer questions about the surgical scene.";
  std::string user_marker = "USER:";
  std::string assistant_marker = "ASSISTANT:";
  std::string visual_placeholder = "<vis>";
  std::string end_of_turn = "</s>";
  VisualPlacement placement = VisualPlacement::before_first_query;

  /// Marker strings as reserved tokenizer entries.
  std::vector<std::string> reserved_tokens() const;
};

/// Throws ConfigError if the placeholder or a marker is empty or contains
/// whitespace.
void validate(const ChatTemplate& tmpl);

/// Prompt for round r ending in the assistant marker, e.g.
/// "SYS <vis> USER: q1 ASSISTANT:". Parts are joined by single spaces and an
/// empty system prompt drops its segment.
std::string render_template(const ConversationRecord& record, int r,
                            HistoryMode mode, const ChatTemplate& tmpl);

/// render_template followed by round r's answer and end-of-turn marker.
std::string render_with_answer(const ConversationRecord& record, int r,
                               HistoryMode mode, const ChatTemplate& tmpl);

enum class SegmentKind {
  system,
  placeholder,
  user_marker,
  query,
  assistant_marker,
  answer,
  end_of_turn
};

struct Segment {
  SegmentKind kind;
  std::string text;
  int turn = -1;  // 0-based turn for query/answer/marker segments
};

struct ParsedConversation {
  std::vector<Segment> segments;
  std::vector<Round> turns;         // answer empty for an open final turn
  std::vector<bool> turn_answered;  // parallel to turns
};

/// Inverse of rendering. Throws AlignmentError naming the 1-based turn
/// where the text stops following the template grammar.
ParsedConversation parse_rendered(const std::string& rendered,
                                  const ChatTemplate& tmpl);

struct TokenizedExample {
  std::vector<int> token_ids;
  std::size_t visual_start = 0;
  std::size_t visual_length = 0;
  std::vector<std::uint8_t> loss_mask;
  std::vector<std::size_t> round_boundaries;  // offset of each user marker

  std::size_t supervised_count() const;
};

/// Tokenize segment by segment. The answers align with the last
/// answers.size() answered turns of `rendered`; their tokens and the
/// end-of-turn token that closes each are mask 1, everything else mask 0.
TokenizedExample tokenize_and_mask(const std::string& rendered,
                                   std::span<const std::string> answers,
                                   const Tokenizer& tokenizer,
                                   const ChatTemplate& tmpl);

/// Supervised examples for a record: one example covering every round in
/// full mode, one example per round in previous_only mode.
std::vector<TokenizedExample> training_examples(const ConversationRecord& record,
                                                HistoryMode mode,
                                                const Tokenizer& tokenizer,
                                                const ChatTemplate& tmpl);

struct SplicedSequence {
  ag::Var embeddings;                // (S - 1 + M) x D_lm
  std::vector<int> token_ids;        // -1 at visual positions
  std::vector<std::uint8_t> loss_mask;
  std::size_t visual_start = 0;
  std::size_t visual_length = 0;

  std::size_t length() const { return token_ids.size(); }
};

/// Replace the placeholder row of `text_embeddings` (S x D_lm, one row per
/// token of `tokens`) with the M visual rows.
SplicedSequence splice_visual(const TokenizedExample& tokens,
                              const ag::Var& visual_rows,
                              const ag::Var& text_embeddings);

SplicedSequence splice_visual(const TokenizedExample& tokens,
                              const ProjectedVisualTokens& visual,
                              const Matrix& text_embeddings);

}  // namespace surgvl
