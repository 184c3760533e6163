// Copyright 2026 The surgvl Authors
// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint directories: manifest.json plus one little-endian binary blob
// per parameter and per optimizer moment. Written to a temporary sibling and
// renamed into place.

#pragma once

#include <filesystem>
#include <optional>

#include <nlohmann/json.hpp>

#include "surgvl/model.hpp"
#include "surgvl/training.hpp"

namespace surgvl {

inline constexpr int kCheckpointFormatVersion = 1;

nlohmann::json to_json(const AssistantConfig& config);
AssistantConfig assistant_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const StageConfig& config);
StageConfig stage_config_from_json(const nlohmann::json& j);

/// Parameters are stored as f64, or as f16 when precision is half.
/// Optimizer moments are always f64.
void save_checkpoint(const TrainState& state, const std::filesystem::path& dir,
                     Precision precision = Precision::full);

/// Throws CheckpointError naming the offending manifest field when the
/// manifest disagrees with the model it describes or with its blobs.
TrainState load_checkpoint(const std::filesystem::path& dir);

/// Highest-numbered epoch-NNN directory under root, if any.
std::optional<std::filesystem::path> latest_checkpoint(const std::filesystem::path& root);

std::filesystem::path epoch_checkpoint_dir(const std::filesystem::path& root, int epoch);

}  // namespace surgvl
