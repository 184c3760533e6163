// Copyright 2026 The surgvl Authors
// SPDX-License-Identifier: Apache-2.0
//
// Instruction-data generation from source captions.
//
// Response grammar (schema version 1): a round is a line starting "Q:"
// followed by a line starting "A:"; lines without a marker continue the
// preceding question or answer. At most kMaxGeneratedRounds rounds are
// kept. Detail descriptions may instead be free text, which becomes one
// round with the fixed query kDetailQuery.

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "surgvl/conversation.hpp"
#include "surgvl/llm.hpp"
#include "surgvl/visual_encoding.hpp"

namespace surgvl {

enum class SourceDataset { cholec80, endovis18, psiava, synthetic };
std::string to_string(SourceDataset d);
SourceDataset source_dataset_from_string(const std::string& s);

struct SourceCaption {
  std::string sample_id;
  std::string caption;
  SourceDataset dataset = SourceDataset::synthetic;
  Modality modality = Modality::image;
};

inline constexpr int kCorpusSchemaVersion = 1;
inline constexpr std::size_t kMaxGeneratedRounds = 10;
inline constexpr std::string_view kDetailQuery = "Describe the scene in detail.";

/// Task-specific sentence appended after the caption.
std::string_view prompt_instruction(TaskKind kind);

/// caption + "\n" + prompt_instruction(kind). Throws InvalidInputError on an
/// empty caption.
std::string render_prompt(const std::string& caption, TaskKind kind);

/// SHA-256 of the rendered prompt.
std::string prompt_hash(const std::string& prompt);

/// Recovers (caption, task kind) from a rendered prompt, if it is one.
std::optional<std::pair<std::string, TaskKind>> parse_prompt(const std::string& prompt);

/// Throws ParseError carrying `raw` when no round can be extracted.
std::vector<Round> parse_generation(const std::string& raw, TaskKind kind);

struct GeneratedInstruction {
  std::string sample_id;
  SourceDataset dataset = SourceDataset::synthetic;
  Modality modality = Modality::image;
  TaskKind task_kind = TaskKind::conversation;
  std::vector<Round> rounds;
  std::string generator;
  std::string prompt_hash;

  ConversationRecord conversation() const;
};

nlohmann::json to_json(const GeneratedInstruction& r);
/// Strict: exactly the schema keys, correct types, at least one round.
/// Throws ParseError otherwise.
GeneratedInstruction generated_instruction_from_json(const nlohmann::json& j);

struct CorpusStats {
  std::map<TaskKind, long> per_task;
  std::map<SourceDataset, long> per_dataset;
  long records = 0;
  long parse_failures = 0;
  long duplicate_outputs = 0;  // identical (prompt_hash, output) after the first
  long duplicate_pairs = 0;    // (query, answer) pairs already emitted

  nlohmann::json to_json() const;
};

struct CorpusBuild {
  std::vector<GeneratedInstruction> records;  // ordered by (caption, task) index
  CorpusStats stats;
};

struct BuildOptions {
  std::vector<TaskKind> tasks{std::begin(kAllTaskKinds), std::end(kAllTaskKinds)};
  int concurrency = 4;
};

/// Throws InvalidInputError on no captions or duplicate sample ids and
/// InsufficientDataError when nothing survives parsing and dedup.
CorpusBuild build_corpus(std::span<const SourceCaption> captions, const BuildOptions& options,
                         LlmClient& client);

std::string corpus_jsonl(std::span<const GeneratedInstruction> records);
void write_corpus(const std::filesystem::path& path,
                  std::span<const GeneratedInstruction> records);
std::vector<GeneratedInstruction> read_corpus(const std::filesystem::path& path);

/// JSONL lines {"sample_id","caption","dataset","modality"}.
std::vector<SourceCaption> read_captions(const std::filesystem::path& path);
void write_captions(const std::filesystem::path& path, std::span<const SourceCaption> captions);

}  // namespace surgvl
