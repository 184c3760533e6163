// Copyright 2026 The surgvl Authors
// SPDX-License-Identifier: Apache-2.0
//
// Flat key=value run configuration. One "key = value" per line, '#' starts
// a comment, unknown or repeated keys are errors.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "surgvl/dataset.hpp"
#include "surgvl/model.hpp"
#include "surgvl/training.hpp"

namespace surgvl {

using KeyValues = std::map<std::string, std::string>;

/// Throws ConfigError naming `source` and the line number.
KeyValues parse_key_values(std::istream& in, const std::string& source);
KeyValues read_key_values(const std::filesystem::path& path);

struct RunConfig {
  std::uint64_t seed = 0;
  AssistantConfig model;
  StageConfig align = StageConfig::defaults(Stage::align);
  StageConfig instruct = StageConfig::defaults(Stage::instruct);
  bool align_seed_set = false;
  bool instruct_seed_set = false;
  SyntheticSizes synthetic;
  std::size_t tokenizer_max_words = 4096;
  int max_new_tokens = 32;

  const StageConfig& stage(Stage s) const { return s == Stage::align ? align : instruct; }
};

/// Overlays `kv` on `base`. Stage seeds not given explicitly are derived
/// from the run seed. Throws ConfigError on unknown keys or bad values.
RunConfig apply_key_values(const KeyValues& kv, RunConfig base = {});

/// Every key with its effective value, sorted, in the file format above.
std::string effective_config(const RunConfig& config);

std::vector<std::string> known_config_keys();

}  // namespace surgvl
