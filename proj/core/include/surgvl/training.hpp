// Copyright 2026 The surgvl Authors
// SPDX-License-Identifier: Apache-2.0
//
// Two-stage optimisation. Stage "align" minimises the modality-to-text
// contrastive loss over joint image/video batches; stage "instruct"
// minimises the teacher-forced next-token NLL over answer tokens.

#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "surgvl/contrastive.hpp"
#include "surgvl/conversation.hpp"
#include "surgvl/model.hpp"

namespace surgvl {

enum class Stage { align, instruct };
std::string to_string(Stage s);
Stage stage_from_string(const std::string& s);

enum class Precision { full, half };
std::string to_string(Precision p);
Precision precision_from_string(const std::string& s);

enum class ModalityMix { joint, video_only };
std::string to_string(ModalityMix m);
ModalityMix modality_mix_from_string(const std::string& s);

/// constant keeps learning_rate; cosine decays it to zero over the stage's
/// epochs * steps_per_epoch steps.
enum class LrSchedule { constant, cosine };
std::string to_string(LrSchedule s);
LrSchedule lr_schedule_from_string(const std::string& s);

struct StageConfig {
  Stage stage = Stage::align;
  double learning_rate = 1e-5;
  LrSchedule lr_schedule = LrSchedule::constant;
  int epochs = 3;
  int batch_size = 16;
  std::uint64_t seed = 0;
  Precision precision = Precision::full;
  std::set<ModelPart> trainable_parts = {ModelPart::projection};
  double grad_clip_norm = 1.0;  // <= 0 disables clipping
  double temperature = 1.0;
  bool symmetric_loss = false;
  ModalityMix modality_mix = ModalityMix::joint;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  /// Defaults for a stage: align trains {projection}, instruct trains
  /// {projection, language_model}; both use lr 1e-5, 3 epochs, batch 16.
  static StageConfig defaults(Stage stage);
};

/// Throws ConfigError on non-positive learning rate/batch size or negative
/// epochs.
void validate(const StageConfig& config);

struct NllResult {
  double loss = 0.0;
  Matrix gradient;  // d loss / d logits
};

/// Row i of `logits` is the model's distribution for token_ids[i] (already
/// aligned). Mean of -log p(gold) over mask-1 positions, with its gradient.
/// Throws NoSupervisionError when the mask is all zero.
NllResult autoregressive_nll(const Matrix& logits, const TokenizedExample& example);

/// Differentiable form over a model's next-token logits: row p scores token
/// p + 1 and contributes when that token is supervised.
ag::Var autoregressive_nll(const ag::Var& next_token_logits, const SplicedSequence& seq);

/// Adaptive-moment optimiser without weight decay. Moments are kept per
/// parameter name.
class AdamOptimizer {
 public:
  struct Moments {
    Matrix m;
    Matrix v;
  };

  /// grads[i] is the (possibly clipped) gradient of params[i].
  void step(std::span<const NamedParameter> params, std::span<const Matrix> grads,
            double lr, double beta1, double beta2, double epsilon);
  long steps() const { return steps_; }
  const std::map<std::string, Moments>& moments() const { return moments_; }
  void restore(long steps, std::map<std::string, Moments> moments);

 private:
  long steps_ = 0;
  std::map<std::string, Moments> moments_;
};

struct MetricRow {
  long step = 0;
  Stage stage = Stage::align;
  double loss = 0.0;
  double lr = 0.0;
  double wall_ms = 0.0;
};

struct TrainState {
  explicit TrainState(Assistant m) : model(std::move(m)) {}

  Assistant model;
  AdamOptimizer optimizer;
  long step = 0;
  Stage stage = Stage::align;
  int epochs_completed = 0;  // within `stage`
  std::vector<MetricRow> history;
};

struct InstructionSample {
  std::string sample_id;
  ConversationRecord record;
  Visual visual;
};

struct TrainingCorpus {
  std::vector<AlignmentSample> alignment;
  std::vector<InstructionSample> instructions;
};

struct PreparedExample {
  std::string sample_id;
  TokenizedExample tokens;
  const Visual* visual = nullptr;
};

std::vector<PreparedExample> prepare_examples(const Assistant& model,
                                              std::span<const InstructionSample> samples);

struct StepResult {
  double loss = 0.0;
  double grad_norm = 0.0;  // before clipping
};

/// Checks finiteness, clips to config.grad_clip_norm and takes one Adam
/// step over `trainable` after loss.backward(). Returns the pre-clip global
/// gradient norm. Throws NumericalError naming `batch_ids` on NaN/Inf.
double apply_update(TrainState& state, const StageConfig& config,
                    std::span<const NamedParameter> trainable, double loss,
                    std::span<const std::string> batch_ids);

/// Sets requires_grad on every parameter according to the trainable parts
/// and clears accumulated gradients.
std::vector<NamedParameter> prepare_parameters(const Assistant& model,
                                               const std::set<ModelPart>& parts);

/// Contrastive loss of a joint batch (no update).
ag::Var alignment_loss(const Assistant& model, std::span<const AlignmentSample> pool,
                       const JointBatch& batch, const StageConfig& config);

StepResult stage1_align_step(TrainState& state, std::span<const AlignmentSample> pool,
                             const JointBatch& batch, const StageConfig& config);

StepResult stage2_instruct_step(TrainState& state, std::span<const PreparedExample> batch,
                                const StageConfig& config);

struct TrainOptions {
  std::optional<std::filesystem::path> checkpoint_root;  // epoch-NNN subdirs
  std::optional<std::filesystem::path> metrics_path;     // JSONL, appended
  std::optional<std::filesystem::path> batch_log_path;   // JSONL, appended
  std::function<void(const MetricRow&)> on_step;
  /// Clock for wall_ms; injectable so metric streams can be compared.
  std::function<double()> now_ms;
};

/// Learning rate for the 0-based step `step_in_stage` of `total_steps`.
double scheduled_lr(const StageConfig& config, long step_in_stage, long total_steps);

/// Pool used by stage 1 after applying the modality mix.
std::vector<AlignmentSample> alignment_pool(std::span<const AlignmentSample> samples,
                                            ModalityMix mix);

/// Number of optimisation steps per epoch for the given corpus and stage.
long steps_per_epoch(const StageConfig& config, const TrainState& state,
                     const TrainingCorpus& corpus);

/// Run config.epochs - state.epochs_completed epochs (all of them when the
/// state comes from a different stage), checkpointing at each epoch
/// boundary.
TrainState train(const StageConfig& config, const TrainingCorpus& corpus,
                 TrainState state, const TrainOptions& options = {});

std::string metric_json_line(const MetricRow& row);

}  // namespace surgvl
