// Copyright 2026 The surgvl Authors
// SPDX-License-Identifier: Apache-2.0

#include "surgvl/conversation.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "surgvl/errors.hpp"

namespace surgvl {

std::string to_string(TaskKind k) {
  switch (k) {
    case TaskKind::conversation:
      return "conversation";
    case TaskKind::detail_description:
      return "detail_description";
    case TaskKind::complex_reasoning:
      return "complex_reasoning";
  }
  return "conversation";
}

TaskKind task_kind_from_string(const std::string& s) {
  if (s == "conversation") return TaskKind::conversation;
  if (s == "detail_description") return TaskKind::detail_description;
  if (s == "complex_reasoning") return TaskKind::complex_reasoning;
  throw InvalidInputError(fmt::format("unknown task kind '{}'", s));
}

TaskKind task_kind_from_short(const std::string& s) {
  if (s == "conv") return TaskKind::conversation;
  if (s == "detail") return TaskKind::detail_description;
  if (s == "reason") return TaskKind::complex_reasoning;
  return task_kind_from_string(s);
}

std::string to_string(HistoryMode m) {
  return m == HistoryMode::full ? "full" : "previous_only";
}

HistoryMode history_mode_from_string(const std::string& s) {
  if (s == "full") return HistoryMode::full;
  if (s == "previous_only") return HistoryMode::previous_only;
  throw ConfigError(fmt::format("unknown history mode '{}'", s));
}

void validate(const ConversationRecord& record) {
  if (record.rounds.empty()) {
    throw InvalidInputError("conversation record has no rounds");
  }
  for (std::size_t i = 0; i < record.rounds.size(); ++i) {
    if (split_whitespace(record.rounds[i].query).empty()) {
      throw InvalidInputError(fmt::format("round {} has an empty query", i + 1));
    }
    if (i + 1 < record.rounds.size() &&
        split_whitespace(record.rounds[i].answer).empty()) {
      throw InvalidInputError(fmt::format("round {} has an empty answer", i + 1));
    }
  }
}

namespace {

void check_round(const ConversationRecord& record, int r) {
  if (r < 1 || r > static_cast<int>(record.rounds.size())) {
    throw InvalidInputError(fmt::format("round {} outside [1, {}]", r, record.rounds.size()));
  }
}

}  // namespace

std::string build_round_input(const ConversationRecord& record, int r,
                              HistoryMode mode) {
  check_round(record, r);
  const auto& rounds = record.rounds;
  std::string out;
  auto append = [&out](const std::string& s) {
    if (!out.empty()) out += kRoundSeparator;
    out += s;
  };
  if (r > 1) {
    const int first = mode == HistoryMode::full ? 1 : r - 1;
    for (int i = first; i < r; ++i) {
      append(rounds[i - 1].query);
      append(rounds[i - 1].answer);
    }
  }
  append(rounds[r - 1].query);
  return out;
}

std::vector<std::string> ChatTemplate::reserved_tokens() const {
  return {user_marker, assistant_marker, visual_placeholder, end_of_turn};
}

namespace {

bool has_space(const std::string& s) {
  return std::any_of(s.begin(), s.end(), [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r';
  });
}

void check_free_of_markers(const std::string& text, const ChatTemplate& t,
                           int round) {
  for (const auto& w : split_whitespace(text)) {
    if (w == t.user_marker || w == t.assistant_marker ||
        w == t.visual_placeholder || w == t.end_of_turn) {
      throw InvalidInputError(fmt::format(
          "round {} text contains the reserved template token '{}'", round, w));
    }
  }
}

}  // namespace

void validate(const ChatTemplate& t) {
  if (t.visual_placeholder.empty()) {
    throw ConfigError("chat template has no visual placeholder");
  }
  for (const auto* s : {&t.user_marker, &t.assistant_marker,
                        &t.visual_placeholder, &t.end_of_turn}) {
    if (s->empty() || has_space(*s)) {
      throw ConfigError(fmt::format("template marker '{}' must be a single nonempty word", *s));
    }
  }
}

namespace {

std::string render(const ConversationRecord& record, int r, HistoryMode mode,
                   const ChatTemplate& t, bool with_answer) {
  validate(t);
  check_round(record, r);
  std::vector<std::string> parts;
  if (!t.system_prompt.empty()) parts.push_back(t.system_prompt);
  if (t.placement == VisualPlacement::before_first_query) {
    parts.push_back(t.visual_placeholder);
  }
  const int first = (r > 1 && mode == HistoryMode::previous_only) ? r - 1 : 1;
  bool first_query = true;
  for (int i = first; i <= r; ++i) {
    const Round& round = record.rounds[i - 1];
    check_free_of_markers(round.query, t, i);
    if (split_whitespace(round.query).empty()) {
      throw InvalidInputError(fmt::format("round {} has an empty query", i));
    }
    parts.push_back(t.user_marker);
    parts.push_back(round.query);
    if (first_query && t.placement == VisualPlacement::after_first_query) {
      parts.push_back(t.visual_placeholder);
    }
    first_query = false;
    parts.push_back(t.assistant_marker);
    if (i < r || with_answer) {
      check_free_of_markers(round.answer, t, i);
      parts.push_back(round.answer);
      parts.push_back(t.end_of_turn);
    }
  }
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.push_back(' ');
    out += parts[i];
  }
  return out;
}

// Position of `word` at or after `from`, delimited by a space (or the text
// boundary) on both sides.
std::size_t find_word(const std::string& text, const std::string& word,
                      std::size_t from) {
  std::size_t pos = text.find(word, from);
  while (pos != std::string::npos) {
    const bool left = pos == 0 || text[pos - 1] == ' ';
    const std::size_t end = pos + word.size();
    const bool right = end == text.size() || text[end] == ' ';
    if (left && right) return pos;
    pos = text.find(word, pos + 1);
  }
  return std::string::npos;
}

bool word_at(const std::string& text, std::size_t pos, const std::string& word) {
  if (text.compare(pos, word.size(), word) != 0) return false;
  const std::size_t end = pos + word.size();
  return end == text.size() || text[end] == ' ';
}

}  // namespace

std::string render_template(const ConversationRecord& record, int r,
                            HistoryMode mode, const ChatTemplate& tmpl) {
  return render(record, r, mode, tmpl, false);
}

std::string render_with_answer(const ConversationRecord& record, int r,
                               HistoryMode mode, const ChatTemplate& tmpl) {
  return render(record, r, mode, tmpl, true);
}

ParsedConversation parse_rendered(const std::string& text,
                                  const ChatTemplate& t) {
  validate(t);
  ParsedConversation out;
  std::size_t pos = 0;
  auto fail = [](int turn, const std::string& why) {
    throw AlignmentError(fmt::format("rendered text breaks the template grammar at turn {}: {}",
                                     turn, why),
                         turn);
  };
  if (!t.system_prompt.empty()) {
    if (text.compare(0, t.system_prompt.size(), t.system_prompt) != 0 ||
        text.size() <= t.system_prompt.size() || text[t.system_prompt.size()] != ' ') {
      fail(0, "missing system prompt");
    }
    out.segments.push_back({SegmentKind::system, t.system_prompt});
    pos = t.system_prompt.size() + 1;
  }
  if (t.placement == VisualPlacement::before_first_query) {
    if (!word_at(text, pos, t.visual_placeholder)) fail(0, "missing visual placeholder");
    out.segments.push_back({SegmentKind::placeholder, t.visual_placeholder});
    pos += t.visual_placeholder.size() + 1;
  }
  int turn = 0;
  while (true) {
    if (pos >= text.size() || !word_at(text, pos, t.user_marker)) {
      fail(turn + 1, "expected user marker");
    }
    out.segments.push_back({SegmentKind::user_marker, t.user_marker, turn});
    pos += t.user_marker.size() + 1;
    const std::size_t asst = find_word(text, t.assistant_marker, pos);
    if (asst == std::string::npos || asst == 0) fail(turn + 1, "missing assistant marker");
    std::string query = asst > pos ? text.substr(pos, asst - 1 - pos) : std::string();
    out.segments.push_back({SegmentKind::query, query, turn});
    if (turn == 0 && t.placement == VisualPlacement::after_first_query) {
      const std::string tail = " " + t.visual_placeholder;
      if (query.size() < tail.size() ||
          query.compare(query.size() - tail.size(), tail.size(), tail) != 0) {
        fail(1, "missing visual placeholder after first query");
      }
      query.resize(query.size() - tail.size());
      out.segments.back().text = query;
      out.segments.push_back({SegmentKind::placeholder, t.visual_placeholder, turn});
    }
    out.segments.push_back({SegmentKind::assistant_marker, t.assistant_marker, turn});
    pos = asst + t.assistant_marker.size();
    if (pos == text.size()) {
      out.turns.push_back({query, ""});
      out.turn_answered.push_back(false);
      break;
    }
    ++pos;  // space
    const std::size_t eot = find_word(text, t.end_of_turn, pos);
    if (eot == std::string::npos) fail(turn + 1, "answer is not closed by end-of-turn");
    std::string answer = eot > pos ? text.substr(pos, eot - 1 - pos) : std::string();
    out.segments.push_back({SegmentKind::answer, answer, turn});
    out.segments.push_back({SegmentKind::end_of_turn, t.end_of_turn, turn});
    out.turns.push_back({query, answer});
    out.turn_answered.push_back(true);
    pos = eot + t.end_of_turn.size();
    if (pos == text.size()) break;
    ++pos;
    ++turn;
  }
  return out;
}

std::size_t TokenizedExample::supervised_count() const {
  return static_cast<std::size_t>(
      std::count(loss_mask.begin(), loss_mask.end(), std::uint8_t{1}));
}

TokenizedExample tokenize_and_mask(const std::string& rendered,
                                   std::span<const std::string> answers,
                                   const Tokenizer& tokenizer,
                                   const ChatTemplate& tmpl) {
  const ParsedConversation parsed = parse_rendered(rendered, tmpl);
  if (tokenizer.encode(tmpl.visual_placeholder).size() != 1 ||
      tokenizer.encode(tmpl.end_of_turn).size() != 1) {
    throw ConfigError("tokenizer must map the placeholder and end-of-turn to single tokens");
  }

  std::vector<int> answered;
  for (std::size_t i = 0; i < parsed.turns.size(); ++i) {
    if (parsed.turn_answered[i]) answered.push_back(static_cast<int>(i));
  }
  if (answers.size() > answered.size()) {
    throw AlignmentError(fmt::format("{} answers supplied but the text holds {} answered turns",
                                     answers.size(), answered.size()),
                         static_cast<int>(answered.size()) + 1);
  }
  std::vector<bool> supervised(parsed.turns.size(), false);
  const std::size_t offset = answered.size() - answers.size();
  for (std::size_t j = 0; j < answers.size(); ++j) {
    const int turn = answered[offset + j];
    if (parsed.turns[turn].answer != answers[j]) {
      throw AlignmentError(fmt::format("answer {} does not match the text of round {}", j + 1,
                                       turn + 1),
                           turn + 1);
    }
    supervised[turn] = true;
  }

  TokenizedExample ex;
  for (const auto& seg : parsed.segments) {
    const std::size_t start = ex.token_ids.size();
    const bool masked = (seg.kind == SegmentKind::answer ||
                         seg.kind == SegmentKind::end_of_turn) &&
                        supervised[seg.turn];
    if (seg.kind == SegmentKind::user_marker) ex.round_boundaries.push_back(start);
    if (seg.kind == SegmentKind::placeholder) {
      ex.visual_start = start;
      ex.visual_length = 1;
    }
    for (int id : tokenizer.encode(seg.text)) {
      ex.token_ids.push_back(id);
      ex.loss_mask.push_back(masked ? 1 : 0);
    }
  }
  return ex;
}

std::vector<TokenizedExample> training_examples(const ConversationRecord& record,
                                                HistoryMode mode,
                                                const Tokenizer& tokenizer,
                                                const ChatTemplate& tmpl) {
  validate(record);
  const int rounds = static_cast<int>(record.rounds.size());
  std::vector<TokenizedExample> out;
  if (mode == HistoryMode::full) {
    std::vector<std::string> answers;
    for (const auto& r : record.rounds) answers.push_back(r.answer);
    out.push_back(tokenize_and_mask(render_with_answer(record, rounds, mode, tmpl),
                                    answers, tokenizer, tmpl));
    return out;
  }
  for (int r = 1; r <= rounds; ++r) {
    const std::string answer = record.rounds[r - 1].answer;
    out.push_back(tokenize_and_mask(render_with_answer(record, r, mode, tmpl),
                                    std::span<const std::string>(&answer, 1), tokenizer,
                                    tmpl));
  }
  return out;
}

SplicedSequence splice_visual(const TokenizedExample& tokens,
                              const ag::Var& visual_rows,
                              const ag::Var& text_embeddings) {
  if (tokens.visual_length != 1) {
    throw InvalidInputError("tokenized example has no visual placeholder span");
  }
  if (text_embeddings.rows() != static_cast<Eigen::Index>(tokens.token_ids.size())) {
    throw InvalidInputError(fmt::format("{} text embedding rows for {} tokens",
                                        text_embeddings.rows(), tokens.token_ids.size()));
  }
  if (visual_rows.cols() != text_embeddings.cols()) {
    throw ConfigError(fmt::format("visual token width {} != text embedding width {}",
                                  visual_rows.cols(), text_embeddings.cols()));
  }
  if (visual_rows.rows() < 1) throw InvalidInputError("no visual tokens to splice");
  const auto start = static_cast<Eigen::Index>(tokens.visual_start);
  const auto total = text_embeddings.rows();
  std::vector<ag::Var> parts;
  if (start > 0) parts.push_back(ag::slice_rows(text_embeddings, 0, start));
  parts.push_back(visual_rows);
  if (start + 1 < total) {
    parts.push_back(ag::slice_rows(text_embeddings, start + 1, total - start - 1));
  }
  SplicedSequence out;
  out.embeddings = ag::concat_rows(parts);
  const auto m = static_cast<std::size_t>(visual_rows.rows());
  out.visual_start = tokens.visual_start;
  out.visual_length = m;
  out.token_ids.assign(tokens.token_ids.begin(), tokens.token_ids.begin() + start);
  out.loss_mask.assign(tokens.loss_mask.begin(), tokens.loss_mask.begin() + start);
  out.token_ids.insert(out.token_ids.end(), m, -1);
  out.loss_mask.insert(out.loss_mask.end(), m, 0);
  out.token_ids.insert(out.token_ids.end(), tokens.token_ids.begin() + start + 1,
                       tokens.token_ids.end());
  out.loss_mask.insert(out.loss_mask.end(), tokens.loss_mask.begin() + start + 1,
                       tokens.loss_mask.end());
  return out;
}

SplicedSequence splice_visual(const TokenizedExample& tokens,
                              const ProjectedVisualTokens& visual,
                              const Matrix& text_embeddings) {
  return splice_visual(tokens, ag::Var::constant(visual.data),
                       ag::Var::constant(text_embeddings));
}

}  // namespace surgvl
