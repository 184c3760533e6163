// Copyright 2026 The surgvl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace surgvl {

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;

  virtual std::string kind() const = 0;
  virtual std::vector<int> encode(std::string_view text) const = 0;
  virtual std::string decode(std::span<const int> ids) const = 0;
  virtual int vocab_size() const = 0;
  /// Id of a token that must encode as exactly one id (markers,
  /// placeholders), if the vocabulary has it.
  virtual std::optional<int> token_id(std::string_view token) const = 0;
  virtual std::vector<std::string> vocabulary() const = 0;
};

/// Whitespace word tokenizer over a fixed vocabulary with byte fallback.
///
/// Layout: 0 "<pad>", 1 "<bw>", then reserved tokens, then the 256 byte
/// tokens "<0xNN>", then corpus words in sorted order. A word missing from
/// the vocabulary encodes as "<bw>" followed by its UTF-8 bytes. Decoding
/// joins words with single spaces, so runs of whitespace collapse.
class WordTokenizer final : public Tokenizer {
 public:
  static constexpr int kPad = 0;
  static constexpr int kByteWord = 1;

  explicit WordTokenizer(std::vector<std::string> vocabulary);

  /// Build from corpus texts; `reserved` tokens (markers, placeholder,
  /// end-of-turn) are placed right after the two fixed specials. At most
  /// max_words corpus words are kept, most frequent first, ties by string.
  static WordTokenizer build(std::span<const std::string> corpus,
                             std::span<const std::string> reserved,
                             std::size_t max_words = 4096);

  std::string kind() const override { return "word_bytes"; }
  std::vector<int> encode(std::string_view text) const override;
  std::string decode(std::span<const int> ids) const override;
  int vocab_size() const override { return static_cast<int>(vocab_.size()); }
  std::optional<int> token_id(std::string_view token) const override;
  std::vector<std::string> vocabulary() const override { return vocab_; }

 private:
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, int> index_;
  int byte_base_ = -1;
};

std::vector<std::string> split_whitespace(std::string_view text);

}  // namespace surgvl
