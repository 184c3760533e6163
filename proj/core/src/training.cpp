// Copyright 2026 The surgvl Authors
// SPDX-License-Identifier: Apache-2.0

#include "surgvl/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "surgvl/checkpoint.hpp"
#include "surgvl/errors.hpp"
#include "surgvl/rng.hpp"

namespace surgvl {

std::string to_string(Stage s) { return s == Stage::align ? "align" : "instruct"; }

Stage stage_from_string(const std::string& s) {
  if (s == "align" || s == "1") return Stage::align;
  if (s == "instruct" || s == "2") return Stage::instruct;
  throw ConfigError("unknown stage '" + s + "' (expected align or instruct)");
}

std::string to_string(Precision p) { return p == Precision::full ? "full" : "half"; }

Precision precision_from_string(const std::string& s) {
  if (s == "full" || s == "fp64") return Precision::full;
  if (s == "half" || s == "fp16") return Precision::half;
  throw ConfigError("unknown precision '" + s + "' (expected full or half)");
}

std::string to_string(ModalityMix m) {
  return m == ModalityMix::joint ? "joint" : "video_only";
}

ModalityMix modality_mix_from_string(const std::string& s) {
  if (s == "joint") return ModalityMix::joint;
  if (s == "video_only") return ModalityMix::video_only;
  throw ConfigError("unknown modality mix '" + s + "' (expected joint or video_only)");
}

std::string to_string(LrSchedule s) { return s == LrSchedule::constant ? "constant" : "cosine"; }

LrSchedule lr_schedule_from_string(const std::string& s) {
  if (s == "constant") return LrSchedule::constant;
  if (s == "cosine") return LrSchedule::cosine;
  throw ConfigError("unknown lr schedule '" + s + "' (expected constant or cosine)");
}

double scheduled_lr(const StageConfig& config, long step_in_stage, long total_steps) {
  if (config.lr_schedule == LrSchedule::constant || total_steps <= 0) {
    return config.learning_rate;
  }
  const double t = std::clamp(static_cast<double>(step_in_stage) / static_cast<double>(total_steps),
                              0.0, 1.0);
  return 0.5 * config.learning_rate * (1.0 + std::cos(std::numbers::pi * t));
}

StageConfig StageConfig::defaults(Stage stage) {
  StageConfig c;
  c.stage = stage;
  if (stage == Stage::instruct) {
    c.trainable_parts = {ModelPart::projection, ModelPart::language_model};
  }
  return c;
}

void validate(const StageConfig& config) {
  if (!(config.learning_rate >= 0.0) || !std::isfinite(config.learning_rate)) {
    throw ConfigError("learning_rate must be a finite non-negative number");
  }
  if (config.epochs < 0) throw ConfigError("epochs must be >= 0");
  if (config.batch_size <= 0) throw ConfigError("batch_size must be positive");
  if (!(config.temperature > 0.0)) throw ConfigError("temperature must be positive");
  if (config.trainable_parts.empty()) throw ConfigError("no trainable parts selected");
}

NllResult autoregressive_nll(const Matrix& logits, const TokenizedExample& example) {
  const auto n = static_cast<Eigen::Index>(example.token_ids.size());
  if (logits.rows() != n || example.loss_mask.size() != example.token_ids.size()) {
    throw InvalidInputError(fmt::format("logits have {} rows for {} tokens",
                                        logits.rows(), n));
  }
  const std::size_t count = example.supervised_count();
  if (count == 0) throw NoSupervisionError("example has no supervised tokens");

  NllResult out;
  out.gradient = Matrix::Zero(logits.rows(), logits.cols());
  const double inv = 1.0 / static_cast<double>(count);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!example.loss_mask[static_cast<std::size_t>(i)]) continue;
    const int gold = example.token_ids[static_cast<std::size_t>(i)];
    if (gold < 0 || gold >= logits.cols()) {
      throw InvalidInputError(fmt::format("token id {} outside vocabulary", gold));
    }
    const double mx = logits.row(i).maxCoeff();
    const Eigen::RowVectorXd e = (logits.row(i).array() - mx).exp().matrix();
    const double z = e.sum();
    total += -(logits(i, gold) - mx - std::log(z));
    out.gradient.row(i) = e / z * inv;
    out.gradient(i, gold) -= inv;
  }
  out.loss = total * inv;
  return out;
}

ag::Var autoregressive_nll(const ag::Var& next_token_logits, const SplicedSequence& seq) {
  const std::size_t s = seq.length();
  if (static_cast<std::size_t>(next_token_logits.rows()) != s) {
    throw InvalidInputError(fmt::format("logits have {} rows for a sequence of {}",
                                        next_token_logits.rows(), s));
  }
  if (s < 2) throw NoSupervisionError("sequence too short to supervise");
  std::vector<int> targets(s - 1, 0);
  std::vector<double> weights(s - 1, 0.0);
  double supervised = 0.0;
  for (std::size_t p = 0; p + 1 < s; ++p) {
    if (seq.loss_mask[p + 1] && seq.token_ids[p + 1] >= 0) {
      targets[p] = seq.token_ids[p + 1];
      weights[p] = 1.0;
      supervised += 1.0;
    }
  }
  if (supervised == 0.0) throw NoSupervisionError("sequence has no supervised tokens");
  const ag::Var rows = ag::slice_rows(next_token_logits, 0, static_cast<Eigen::Index>(s - 1));
  return ag::cross_entropy_rows(rows, targets, weights);
}

void AdamOptimizer::step(std::span<const NamedParameter> params,
                         std::span<const Matrix> grads, double lr, double beta1,
                         double beta2, double epsilon) {
  if (params.size() != grads.size()) {
    throw ContractViolation("optimizer received mismatched parameter/gradient lists");
  }
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& g = grads[i];
    auto [it, inserted] = moments_.try_emplace(params[i].name);
    Moments& mo = it->second;
    if (inserted || mo.m.rows() != g.rows() || mo.m.cols() != g.cols()) {
      mo.m = Matrix::Zero(g.rows(), g.cols());
      mo.v = Matrix::Zero(g.rows(), g.cols());
    }
    mo.m = beta1 * mo.m + (1.0 - beta1) * g;
    mo.v = beta2 * mo.v + (1.0 - beta2) * g.cwiseProduct(g);
    const Matrix update =
        ((mo.m / c1).array() / ((mo.v / c2).array().sqrt() + epsilon)).matrix();
    ag::Var v = params[i].var;
    v.mutable_value() -= lr * update;
  }
}

void AdamOptimizer::restore(long steps, std::map<std::string, Moments> moments) {
  steps_ = steps;
  moments_ = std::move(moments);
}

std::vector<NamedParameter> prepare_parameters(const Assistant& model,
                                               const std::set<ModelPart>& parts) {
  std::vector<NamedParameter> trainable;
  for (ModelPart part :
       {ModelPart::encoder, ModelPart::projection, ModelPart::language_model}) {
    const bool on = parts.count(part) > 0;
    for (NamedParameter& p : model.parameters(part)) {
      p.var.set_requires_grad(on);
      p.var.zero_grad();
      if (on) trainable.push_back(p);
    }
  }
  if (trainable.empty()) {
    throw ConfigError("selected trainable parts have no parameters");
  }
  return trainable;
}

namespace {

std::string norm_report(std::span<const NamedParameter> params) {
  std::string out;
  for (const NamedParameter& p : params) {
    if (!out.empty()) out += ", ";
    out += fmt::format("{}={:.6g}", p.name, p.var.value().norm());
  }
  return out;
}

std::string join_ids(std::span<const std::string> ids) {
  std::string out;
  for (const std::string& id : ids) {
    if (!out.empty()) out += ",";
    out += id;
  }
  return out;
}

}  // namespace

double apply_update(TrainState& state, const StageConfig& config,
                    std::span<const NamedParameter> trainable, double loss,
                    std::span<const std::string> batch_ids) {
  std::vector<Matrix> grads;
  grads.reserve(trainable.size());
  double sq = 0.0;
  for (const NamedParameter& p : trainable) {
    grads.push_back(p.var.grad());
    sq += grads.back().squaredNorm();
  }
  const double norm = std::sqrt(sq);
  if (!std::isfinite(loss) || !std::isfinite(norm)) {
    throw NumericalError(fmt::format(
        "non-finite {} at step {} (batch: {}; parameter norms: {})",
        std::isfinite(loss) ? "gradient" : "loss", state.step + 1, join_ids(batch_ids),
        norm_report(trainable)));
  }
  if (config.grad_clip_norm > 0.0 && norm > config.grad_clip_norm) {
    const double s = config.grad_clip_norm / norm;
    for (Matrix& g : grads) g *= s;
  }
  state.optimizer.step(trainable, grads, config.learning_rate, config.adam_beta1,
                       config.adam_beta2, config.adam_epsilon);
  return norm;
}

ag::Var alignment_loss(const Assistant& model, std::span<const AlignmentSample> pool,
                       const JointBatch& batch, const StageConfig& config) {
  std::vector<ag::Var> modality_rows;
  std::vector<ag::Var> text_rows;
  modality_rows.reserve(batch.indices.size());
  text_rows.reserve(batch.indices.size());
  for (std::size_t idx : batch.indices) {
    const AlignmentSample& s = pool[idx];
    modality_rows.push_back(model.modality_embedding(s.visual));
    text_rows.push_back(model.text_embedding(s.caption));
  }
  const ag::Var x = ag::normalize_rows(ag::concat_rows(modality_rows));
  const ag::Var y = ag::normalize_rows(ag::concat_rows(text_rows));
  return m2t_loss(x, y, config.temperature, config.symmetric_loss);
}

StepResult stage1_align_step(TrainState& state, std::span<const AlignmentSample> pool,
                             const JointBatch& batch, const StageConfig& config) {
  const std::vector<NamedParameter> trainable =
      prepare_parameters(state.model, config.trainable_parts);
  ag::Var loss = alignment_loss(state.model, pool, batch, config);
  loss.backward();
  StepResult r;
  r.loss = loss.value()(0, 0);
  r.grad_norm = apply_update(state, config, trainable, r.loss, batch.sample_ids);
  ++state.step;
  return r;
}

StepResult stage2_instruct_step(TrainState& state, std::span<const PreparedExample> batch,
                                const StageConfig& config) {
  if (batch.empty()) throw InvalidInputError("empty instruction batch");
  const std::vector<NamedParameter> trainable =
      prepare_parameters(state.model, config.trainable_parts);
  std::vector<ag::Var> losses;
  std::vector<std::string> ids;
  losses.reserve(batch.size());
  for (const PreparedExample& ex : batch) {
    if (ex.visual == nullptr) {
      throw InvalidInputError("instruction example '" + ex.sample_id + "' has no visual");
    }
    losses.push_back(state.model.instruction_loss(ex.tokens, *ex.visual));
    ids.push_back(ex.sample_id);
  }
  ag::Var loss = ag::average(losses);
  loss.backward();
  StepResult r;
  r.loss = loss.value()(0, 0);
  r.grad_norm = apply_update(state, config, trainable, r.loss, ids);
  ++state.step;
  return r;
}

std::vector<PreparedExample> prepare_examples(const Assistant& model,
                                              std::span<const InstructionSample> samples) {
  std::vector<PreparedExample> out;
  for (const InstructionSample& s : samples) {
    std::vector<TokenizedExample> examples =
        training_examples(s.record, model.config().history_mode, model.tokenizer(),
                          model.config().chat);
    for (std::size_t i = 0; i < examples.size(); ++i) {
      PreparedExample p;
      p.sample_id = examples.size() == 1 ? s.sample_id
                                         : fmt::format("{}#{}", s.sample_id, i + 1);
      p.tokens = std::move(examples[i]);
      p.visual = &s.visual;
      out.push_back(std::move(p));
    }
  }
  return out;
}

std::vector<AlignmentSample> alignment_pool(std::span<const AlignmentSample> samples,
                                            ModalityMix mix) {
  std::vector<AlignmentSample> pool;
  for (const AlignmentSample& s : samples) {
    if (mix == ModalityMix::video_only && s.modality() != Modality::video) continue;
    pool.push_back(s);
  }
  return pool;
}

namespace {

long ceil_div(long a, long b) { return (a + b - 1) / b; }

void append_line(const std::filesystem::path& path, const std::string& line) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot append to " + path.string());
  out << line << '\n';
}

}  // namespace

long steps_per_epoch(const StageConfig& config, const TrainState& state,
                     const TrainingCorpus& corpus) {
  if (config.stage == Stage::align) {
    const auto pool = alignment_pool(corpus.alignment, config.modality_mix);
    return ceil_div(static_cast<long>(pool.size()), config.batch_size);
  }
  return ceil_div(static_cast<long>(prepare_examples(state.model, corpus.instructions).size()),
                  config.batch_size);
}

std::string metric_json_line(const MetricRow& row) {
  nlohmann::json j = {{"step", row.step},
                      {"stage", to_string(row.stage)},
                      {"loss", row.loss},
                      {"lr", row.lr},
                      {"wall_ms", row.wall_ms}};
  return j.dump();
}

TrainState train(const StageConfig& config, const TrainingCorpus& corpus,
                 TrainState state, const TrainOptions& options) {
  validate(config);
  if (state.stage != config.stage) {
    state.stage = config.stage;
    state.epochs_completed = 0;
    state.optimizer = AdamOptimizer{};
  }

  const auto start = std::chrono::steady_clock::now();
  auto now_ms = [&]() {
    if (options.now_ms) return options.now_ms();
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
        .count();
  };

  std::vector<AlignmentSample> pool;
  std::vector<PreparedExample> examples;
  long per_epoch = 0;
  if (config.stage == Stage::align) {
    pool = alignment_pool(corpus.alignment, config.modality_mix);
    if (pool.size() < static_cast<std::size_t>(config.batch_size)) {
      throw InsufficientDataError(fmt::format(
          "alignment pool has {} samples, batch size is {}", pool.size(), config.batch_size));
    }
    per_epoch = ceil_div(static_cast<long>(pool.size()), config.batch_size);
  } else {
    examples = prepare_examples(state.model, corpus.instructions);
    if (examples.empty()) throw InsufficientDataError("no instruction examples");
    per_epoch = ceil_div(static_cast<long>(examples.size()), config.batch_size);
  }

  const long total_steps = static_cast<long>(config.epochs) * per_epoch;
  StageConfig step_config = config;
  auto record = [&](double loss, std::span<const std::string> ids,
                    std::span<const Modality> modalities) {
    MetricRow row{state.step, config.stage, loss, step_config.learning_rate, now_ms()};
    state.history.push_back(row);
    if (options.metrics_path) append_line(*options.metrics_path, metric_json_line(row));
    if (options.batch_log_path) {
      nlohmann::json mods = nlohmann::json::array();
      for (Modality m : modalities) mods.push_back(to_string(m));
      nlohmann::json j = {{"step", row.step},
                          {"stage", to_string(config.stage)},
                          {"sample_ids", std::vector<std::string>(ids.begin(), ids.end())},
                          {"modalities", mods}};
      append_line(*options.batch_log_path, j.dump());
    }
    if (options.on_step) options.on_step(row);
    spdlog::debug("step {} {} loss {:.6f}", row.step, to_string(config.stage), loss);
  };

  for (int epoch = state.epochs_completed; epoch < config.epochs; ++epoch) {
    if (config.stage == Stage::align) {
      for (long i = 0; i < per_epoch; ++i) {
        const auto stream = static_cast<std::uint64_t>(epoch * per_epoch + i);
        const JointBatch batch = build_joint_batch(
            pool, static_cast<std::size_t>(config.batch_size), derive_seed(config.seed, stream));
        step_config.learning_rate = scheduled_lr(config, epoch * per_epoch + i, total_steps);
        const StepResult r = stage1_align_step(state, pool, batch, step_config);
        record(r.loss, batch.sample_ids, batch.modalities);
      }
    } else {
      std::vector<std::size_t> order(examples.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(epoch)));
      rng.shuffle(std::span<std::size_t>(order));
      for (long i = 0; i < per_epoch; ++i) {
        const std::size_t lo = static_cast<std::size_t>(i) * config.batch_size;
        const std::size_t hi = std::min(order.size(), lo + config.batch_size);
        std::vector<PreparedExample> batch;
        std::vector<std::string> ids;
        std::vector<Modality> mods;
        for (std::size_t k = lo; k < hi; ++k) {
          batch.push_back(examples[order[k]]);
          ids.push_back(batch.back().sample_id);
          mods.push_back(modality_of(*batch.back().visual));
        }
        step_config.learning_rate = scheduled_lr(config, epoch * per_epoch + i, total_steps);
        const StepResult r = stage2_instruct_step(state, batch, step_config);
        record(r.loss, ids, mods);
      }
    }
    state.epochs_completed = epoch + 1;
    if (options.checkpoint_root) {
      save_checkpoint(state, epoch_checkpoint_dir(*options.checkpoint_root, epoch + 1),
                      config.precision);
    }
  }
  return state;
}

}  // namespace surgvl
