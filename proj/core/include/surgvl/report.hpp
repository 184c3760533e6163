// Copyright 2026 The surgvl Authors
// SPDX-License-Identifier: Apache-2.0
//
// Plain-text tables with " & " separated cells and a trailing " \\", ready
// to paste into a LaTeX tabular.

#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "surgvl/evaluation.hpp"

namespace surgvl {

/// One decimal place, "58.3", halves rounded away from zero.
std::string format_value(double v);
/// Signed one decimal place, "+0.8" / "-1.2"; anything that rounds to zero
/// is "0.0".
std::string format_delta(double v);

inline constexpr const char* kJudgeFootnote =
    "* Accuracy and score come from an LLM judge. Judges can prefer answers written in their "
    "own style; no correction for that is applied.";

using NamedReport = std::pair<std::string, BenchmarkReport>;

/// Judged dimensions: accuracy and mean score per dimension.
std::string render_dimension_table(const std::vector<NamedReport>& rows);
/// Closed-set VQA accuracy per dataset; a synthetic column is added when
/// any row has one.
std::string render_vqa_table(const std::vector<NamedReport>& rows);
/// Video-only versus joint accuracy with the delta row.
std::string render_ablation_table(const AblationResult& result);

/// Renders every report stored in a run directory: report.json and, when
/// present, ablation.json.
std::string render_run_report(const std::filesystem::path& run_dir);

}  // namespace surgvl
