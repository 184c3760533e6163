// Copyright 2026 The surgvl Authors
// SPDX-License-Identifier: Apache-2.0

#include "surgvl/chat.hpp"

#include <istream>
#include <ostream>

namespace surgvl {

ChatSession::ChatSession(Responder& responder, const Visual* visual, ChatTemplate tmpl,
                         HistoryMode mode)
    : responder_(responder), visual_(visual), tmpl_(std::move(tmpl)), mode_(mode) {
  validate(tmpl_);
}

std::string ChatSession::preview(const std::string& query) const {
  ConversationRecord next = history_;
  next.rounds.push_back({query, ""});
  return render_template(next, static_cast<int>(next.rounds.size()), mode_, tmpl_);
}

Response ChatSession::ask(const std::string& query) {
  Response r = responder_.respond(visual_, preview(query));
  history_.rounds.push_back({query, r.text});
  return r;
}

int run_chat(std::istream& in, std::ostream& out, ChatSession& session,
             const ChatLoopOptions& options) {
  int answered = 0;
  std::string line;
  while (std::getline(in, line)) {
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    const std::string query = line.substr(b, e - b + 1);
    if (query == "/quit") break;
    if (query == "/reset") {
      session.reset();
      out << "[history cleared]\n";
      continue;
    }
    if (options.show_prompt) out << "[prompt] " << session.preview(query) << "\n";
    const Response r = session.ask(query);
    out << "assistant: " << r.text << (r.truncated ? " [truncated]" : "") << "\n";
    ++answered;
  }
  return answered;
}

}  // namespace surgvl
