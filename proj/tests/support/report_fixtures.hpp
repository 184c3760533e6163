// Copyright 2026 The surgvl Authors
// SPDX-License-Identifier: Apache-2.0
//
// Report and ablation fixtures shared by the evaluation tests and the
// acceptance binary, so both compare against the same golden tables.

#pragma once

#include <string>
#include <vector>

#include "surgvl/evaluation.hpp"
#include "surgvl/report.hpp"
#include "surgvl/run_config.hpp"

namespace surgvl::testing {

/// Full row with one-decimal values in every cell.
inline BenchmarkReport reference_report() {
  BenchmarkReport r;
  r.dimensions[TaskKind::conversation] = {58.3, 3.9, 120};
  r.dimensions[TaskKind::detail_description] = {47.1, 3.2, 120};
  r.dimensions[TaskKind::complex_reasoning] = {46.5, 3.1, 120};
  r.vqa_accuracy[SourceDataset::cholec80] = 92.2;
  r.vqa_accuracy[SourceDataset::endovis18] = 68.7;
  r.vqa_accuracy[SourceDataset::psiava] = 67.1;
  return r;
}

/// Video-only arm whose deltas against reference_report() are +0.8, +2.6
/// and +3.5.
inline BenchmarkReport reference_video_only_report() {
  BenchmarkReport r = reference_report();
  r.dimensions[TaskKind::conversation].accuracy = 57.5;
  r.dimensions[TaskKind::detail_description].accuracy = 44.5;
  r.dimensions[TaskKind::complex_reasoning].accuracy = 43.0;
  return r;
}

inline BenchmarkReport partial_report() {
  BenchmarkReport r;
  r.dimensions[TaskKind::conversation] = {50.0, 3.5, 4};
  return r;
}

inline BenchmarkReport synthetic_vqa_report() {
  BenchmarkReport r;
  r.vqa_accuracy[SourceDataset::synthetic] = 75.0;
  return r;
}

/// Arms that differ only in the modality mix.
inline std::pair<StageConfig, StageConfig> ablation_configs(const StageConfig& base) {
  StageConfig video = base;
  video.modality_mix = ModalityMix::video_only;
  StageConfig joint = base;
  joint.modality_mix = ModalityMix::joint;
  return {video, joint};
}

/// Judged fixture per arm: video-only has 2/4, 1/4 and 2/5 correct, joint
/// 3/4, 1/4 and 1/5. Deltas are +25, 0 and -20.
inline BenchmarkReport fixture_arm(const StageConfig& sc) {
  const bool joint = sc.modality_mix == ModalityMix::joint;
  std::vector<JudgeVerdict> v;
  auto add = [&](TaskKind d, int correct, int total) {
    for (int i = 0; i < total; ++i) {
      v.push_back({"s" + std::to_string(v.size()), d, i < correct, i < correct ? 4 : 2, "fixture"});
    }
  };
  add(TaskKind::conversation, joint ? 3 : 2, 4);
  add(TaskKind::detail_description, 1, 4);
  add(TaskKind::complex_reasoning, joint ? 1 : 2, 5);
  return aggregate(v);
}

inline std::string dimension_table_fixture() {
  return render_dimension_table({{"surgvl", reference_report()}, {"toy", partial_report()}});
}

inline std::string vqa_table_fixture() {
  return render_vqa_table({{"surgvl", reference_report()}, {"toy", synthetic_vqa_report()}});
}

}  // namespace surgvl::testing
