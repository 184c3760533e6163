// Copyright 2026 The surgvl Authors
// SPDX-License-Identifier: Apache-2.0

#include "surgvl/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "surgvl/errors.hpp"

namespace surgvl {

namespace fs = std::filesystem;

// Halves round away from zero: a mean score of 4.25 prints as 4.3.
std::string format_value(double v) {
  const double r = std::round(v * 10.0) / 10.0;
  return fmt::format("{:.1f}", r == 0.0 ? 0.0 : r);
}

std::string format_delta(double v) {
  const double r = std::round(v * 10.0) / 10.0;
  if (r == 0.0) return "0.0";
  return fmt::format("{:+.1f}", r);
}

namespace {

constexpr const char* kMissing = "--";

std::string row(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += " & ";
    out += cells[i];
  }
  return out + " \\\\\n";
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot read " + p.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(p.string() + ": " + e.what(), "");
  }
}

}  // namespace

std::string render_dimension_table(const std::vector<NamedReport>& rows) {
  std::string out = row({"Method", "Conversation Acc.", "Score", "Detail Acc.", "Score",
                         "Reasoning Acc.", "Score"});
  for (const auto& [name, report] : rows) {
    std::vector<std::string> cells{name};
    for (TaskKind d : kAllTaskKinds) {
      const auto it = report.dimensions.find(d);
      if (it == report.dimensions.end()) {
        cells.insert(cells.end(), {kMissing, kMissing});
      } else {
        cells.push_back(format_value(it->second.accuracy));
        cells.push_back(format_value(it->second.mean_score));
      }
    }
    out += row(cells);
  }
  return out + kJudgeFootnote + "\n";
}

std::string render_vqa_table(const std::vector<NamedReport>& rows) {
  std::vector<SourceDataset> columns{SourceDataset::cholec80, SourceDataset::endovis18,
                                     SourceDataset::psiava};
  std::vector<std::string> header{"Method", "Cholec80-VQA", "EndoVis18-VQA", "PSI-AVA-VQA"};
  const bool synthetic = std::any_of(rows.begin(), rows.end(), [](const NamedReport& r) {
    return r.second.vqa_accuracy.count(SourceDataset::synthetic) > 0;
  });
  if (synthetic) {
    columns.push_back(SourceDataset::synthetic);
    header.push_back("Synthetic-VQA");
  }
  std::string out = row(header);
  for (const auto& [name, report] : rows) {
    std::vector<std::string> cells{name};
    for (SourceDataset d : columns) {
      const auto it = report.vqa_accuracy.find(d);
      cells.push_back(it == report.vqa_accuracy.end() ? kMissing : format_value(it->second));
    }
    out += row(cells);
  }
  return out;
}

std::string render_ablation_table(const AblationResult& result) {
  std::string out = row({"Training data", "Conversation", "Detail", "Reasoning"});
  auto acc_row = [&](const std::string& name, const BenchmarkReport& r) {
    std::vector<std::string> cells{name};
    for (TaskKind d : kAllTaskKinds) {
      const auto it = r.dimensions.find(d);
      cells.push_back(it == r.dimensions.end() ? kMissing : format_value(it->second.accuracy));
    }
    return row(cells);
  };
  out += acc_row("Video only", result.video_only);
  out += acc_row("Image + video", result.joint);
  std::vector<std::string> cells{"\\(\\Delta\\) Acc."};
  for (TaskKind d : kAllTaskKinds) {
    const auto it = result.delta.find(d);
    cells.push_back(it == result.delta.end() ? kMissing : format_delta(it->second));
  }
  out += row(cells);
  return out + kJudgeFootnote + "\n";
}

std::string render_run_report(const fs::path& run_dir) {
  const fs::path report_path = run_dir / "report.json";
  const fs::path ablation_path = run_dir / "ablation.json";
  if (!fs::exists(report_path) && !fs::exists(ablation_path)) {
    throw IoError("no report.json or ablation.json in " + run_dir.string());
  }
  std::string out;
  if (fs::exists(report_path)) {
    const auto j = read_json(report_path);
    const BenchmarkReport report = BenchmarkReport::from_json(j);
    const std::string name = j.value("name", std::string("surgvl"));
    if (!report.dimensions.empty()) {
      out += "Judged evaluation\n";
      out += render_dimension_table({{name, report}});
    }
    if (!report.vqa_accuracy.empty()) {
      if (!out.empty()) out += "\n";
      out += "Closed-set VQA accuracy\n";
      out += render_vqa_table({{name, report}});
    }
    for (const std::string& note : report.notes) out += "note: " + note + "\n";
  }
  if (fs::exists(ablation_path)) {
    if (!out.empty()) out += "\n";
    out += "Joint training ablation\n";
    out += render_ablation_table(ablation_result_from_json(read_json(ablation_path)));
  }
  return out;
}

}  // namespace surgvl
