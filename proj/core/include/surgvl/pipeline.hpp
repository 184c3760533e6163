// Copyright 2026 The surgvl Authors
// SPDX-License-Identifier: Apache-2.0
//
// Glue shared by the command line tool and the end-to-end tests: fresh
// models from a run config, self-describing run directories and checkpoint
// lookup.

#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "surgvl/evaluation.hpp"
#include "surgvl/run_config.hpp"

namespace surgvl {

inline constexpr const char* kSurgvlVersion = "0.1.0";

/// Captions, queries and answers the tokenizer vocabulary is built from.
std::vector<std::string> tokenizer_texts(const TrainingCorpus& corpus,
                                         std::span<const VQARecord> vqa = {});

/// Untrained model for `config` with a tokenizer over `texts`.
Assistant build_assistant(const RunConfig& config, std::span<const std::string> texts);

/// Seeds and component versions of a run.
nlohmann::json run_metadata(const RunConfig& config, const std::string& subcommand);

/// Writes effective.cfg and run.json into `dir`, merging `extra` into the
/// metadata. Existing run.json entries under "stages" are kept.
void write_run_files(const std::filesystem::path& dir, const RunConfig& config,
                     const std::string& subcommand, const nlohmann::json& extra = {});

/// A checkpoint directory, or a run directory whose latest instruct (else
/// align) checkpoint is used. Throws CheckpointError when none exists.
std::filesystem::path resolve_checkpoint(const std::filesystem::path& path);

/// Answers every record with its visual loaded from `dataset_root`. Visuals
/// shared by several records are decoded once.
std::map<std::string, std::string> answer_vqa(std::span<const VQARecord> records,
                                              Responder& responder, const ChatTemplate& tmpl,
                                              const std::filesystem::path& dataset_root);

void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& rows);

}  // namespace surgvl
