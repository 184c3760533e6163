// Copyright 2026 The surgvl Authors
// SPDX-License-Identifier: Apache-2.0
//
// Line-oriented multi-turn chat about one visual. "/reset" clears the
// history, "/quit" or end of input ends the session.

#pragma once

#include <iosfwd>

#include "surgvl/conversation.hpp"
#include "surgvl/evaluation.hpp"

namespace surgvl {

class ChatSession {
 public:
  ChatSession(Responder& responder, const Visual* visual, ChatTemplate tmpl, HistoryMode mode);

  /// Answers `query` given the turns so far and records the turn.
  Response ask(const std::string& query);
  void reset() { history_.rounds.clear(); }

  const ConversationRecord& history() const { return history_; }
  /// Prompt the next query would be rendered into.
  std::string preview(const std::string& query) const;

 private:
  Responder& responder_;
  const Visual* visual_;
  ChatTemplate tmpl_;
  HistoryMode mode_;
  ConversationRecord history_;
};

struct ChatLoopOptions {
  bool show_prompt = false;
};

/// Returns the number of answered turns.
int run_chat(std::istream& in, std::ostream& out, ChatSession& session,
             const ChatLoopOptions& options = {});

}  // namespace surgvl
