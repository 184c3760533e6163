// Copyright 2026 The surgvl Authors
// SPDX-License-Identifier: Apache-2.0

#include "surgvl/tokenizer.hpp"

#include <algorithm>
#include <map>

#include <fmt/format.h>

#include "surgvl/errors.hpp"

namespace surgvl {

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

std::string byte_token(int b) { return fmt::format("<0x{:02X}>", b); }

}  // namespace

std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

WordTokenizer::WordTokenizer(std::vector<std::string> vocabulary)
    : vocab_(std::move(vocabulary)) {
  if (vocab_.size() < 2 + 256 || vocab_[0] != "<pad>" || vocab_[1] != "<bw>") {
    throw ConfigError("word tokenizer vocabulary must start with <pad>, <bw>");
  }
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    if (!index_.emplace(vocab_[i], static_cast<int>(i)).second) {
      throw ConfigError(fmt::format("duplicate vocabulary entry '{}'", vocab_[i]));
    }
  }
  const auto it = index_.find(byte_token(0));
  if (it == index_.end()) throw ConfigError("vocabulary lacks byte tokens");
  byte_base_ = it->second;
  for (int b = 0; b < 256; ++b) {
    const auto found = index_.find(byte_token(b));
    if (found == index_.end() || found->second != byte_base_ + b) {
      throw ConfigError("byte tokens must be contiguous <0x00>..<0xFF>");
    }
  }
}

WordTokenizer WordTokenizer::build(std::span<const std::string> corpus,
                                   std::span<const std::string> reserved,
                                   std::size_t max_words) {
  std::vector<std::string> vocab = {"<pad>", "<bw>"};
  for (const auto& r : reserved) {
    if (r.empty() || std::any_of(r.begin(), r.end(), is_space)) {
      throw ConfigError(fmt::format("reserved token '{}' must be one nonempty word", r));
    }
    if (std::find(vocab.begin(), vocab.end(), r) == vocab.end()) vocab.push_back(r);
  }
  for (int b = 0; b < 256; ++b) vocab.push_back(byte_token(b));

  std::map<std::string, std::size_t> counts;
  for (const auto& text : corpus) {
    for (auto& w : split_whitespace(text)) ++counts[w];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [w, c] : counts) {
    if (std::find(vocab.begin(), vocab.end(), w) == vocab.end()) ranked.emplace_back(w, c);
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > max_words) ranked.resize(max_words);
  std::vector<std::string> words;
  for (auto& [w, c] : ranked) words.push_back(w);
  std::sort(words.begin(), words.end());
  vocab.insert(vocab.end(), words.begin(), words.end());
  return WordTokenizer(std::move(vocab));
}

std::vector<int> WordTokenizer::encode(std::string_view text) const {
  std::vector<int> ids;
  for (const auto& w : split_whitespace(text)) {
    const auto it = index_.find(w);
    if (it != index_.end() && (it->second < byte_base_ || it->second >= byte_base_ + 256)) {
      ids.push_back(it->second);
      continue;
    }
    ids.push_back(kByteWord);
    for (unsigned char c : w) ids.push_back(byte_base_ + c);
  }
  return ids;
}

std::string WordTokenizer::decode(std::span<const int> ids) const {
  std::vector<std::string> pieces;
  bool in_bytes = false;
  for (int id : ids) {
    if (id < 0 || id >= vocab_size()) {
      throw InvalidInputError(fmt::format("token id {} outside vocabulary", id));
    }
    if (id == kPad) continue;
    if (id == kByteWord) {
      pieces.emplace_back();
      in_bytes = true;
      continue;
    }
    if (id >= byte_base_ && id < byte_base_ + 256) {
      if (!in_bytes) {
        pieces.emplace_back();
        in_bytes = true;
      }
      pieces.back().push_back(static_cast<char>(id - byte_base_));
      continue;
    }
    in_bytes = false;
    pieces.push_back(vocab_[id]);
  }
  std::string out;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    if (i) out.push_back(' ');
    out += pieces[i];
  }
  return out;
}

std::optional<int> WordTokenizer::token_id(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

}  // namespace surgvl
