// Copyright 2026 The surgvl Authors
// SPDX-License-Identifier: Apache-2.0
//
// Response generation, LLM-judge scoring on the three dimensions,
// closed-set VQA accuracy and the joint-versus-video-only comparison.

#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "surgvl/conversation.hpp"
#include "surgvl/dataset.hpp"
#include "surgvl/llm.hpp"
#include "surgvl/model.hpp"
#include "surgvl/training.hpp"

namespace surgvl {

struct DecodingConfig {
  int max_new_tokens = 32;
};

struct Response {
  std::string text;
  bool truncated = false;
};

/// Produces the assistant turn for a rendered prompt ending in the
/// assistant marker.
class Responder {
 public:
  virtual ~Responder() = default;
  virtual std::string id() const = 0;
  virtual Response respond(const Visual* visual, const std::string& rendered_prompt) = 0;
};

/// Greedy decoding with a trained model.
class AssistantResponder final : public Responder {
 public:
  AssistantResponder(const Assistant& model, DecodingConfig decoding)
      : model_(model), decoding_(decoding) {}
  std::string id() const override { return "assistant/greedy"; }
  Response respond(const Visual* visual, const std::string& rendered_prompt) override;

 private:
  const Assistant& model_;
  DecodingConfig decoding_;
};

/// Looks the open question up in a fixed table (unknown questions get
/// `fallback`). With the gold answers as the table it copies gold.
class StubResponder final : public Responder {
 public:
  StubResponder(ChatTemplate tmpl, std::map<std::string, std::string> answers,
                std::string fallback = "I am not sure.");
  std::string id() const override { return "stub"; }
  Response respond(const Visual* visual, const std::string& rendered_prompt) override;

 private:
  ChatTemplate tmpl_;
  std::map<std::string, std::string> answers_;
  std::string fallback_;
};

/// Single-round prompt for `question`, answered by `responder`.
Response generate_response(Responder& responder, const Visual* visual,
                           const std::string& question, const ChatTemplate& tmpl);

struct JudgeVerdict {
  std::string sample_id;
  TaskKind dimension = TaskKind::conversation;
  bool correct = false;
  int score = 1;
  std::string judge_id;
};

nlohmann::json to_json(const JudgeVerdict& v);

inline constexpr int kJudgePromptVersion = 1;

/// Versioned grading prompt for one dimension. Fields are laid out on
/// labelled lines so any backend (and the mock) can read them back.
std::string render_judge_prompt(const std::string& question, const std::string& gold,
                                const std::string& response, TaskKind dimension);

struct JudgeFields {
  std::string question;
  std::string gold;
  std::string response;
  TaskKind dimension = TaskKind::conversation;
};
std::optional<JudgeFields> parse_judge_prompt(const std::string& prompt);

/// Accepts "correct: yes|no" and "score: N" lines (any order, any case) or
/// a JSON object {"correct": bool|"yes"|"no", "score": N}. nullopt when
/// malformed or the score is outside 1-5.
std::optional<std::pair<bool, int>> parse_judge_reply(const std::string& reply);

/// Lowercase, turn ASCII punctuation into spaces, drop the articles
/// a/an/the, collapse whitespace. Idempotent.
std::string normalize_answer(const std::string& s);

/// Deterministic judge: correct iff the normalized gold answer is a
/// substring of the normalized response. Score 5 when they are equal, 4
/// when gold occurs, 2 when they share a word, else 1.
class MockJudgeBackend final : public LlmBackend {
 public:
  std::string id() const override { return "mock-judge"; }
  std::string model() const override { return "substring-rule-1"; }
  std::string complete(const std::string& prompt) override;
};

struct MockJudgeRule {
  bool correct;
  int score;
};
MockJudgeRule mock_judge_rule(const std::string& gold, const std::string& response);

class Judge {
 public:
  /// Malformed replies and transient backend failures are retried up to
  /// max_attempts in total.
  explicit Judge(std::shared_ptr<LlmBackend> backend, int max_attempts = 3);

  std::string id() const;
  /// Throws InvalidInputError on an empty response and JudgeProtocolError
  /// when no attempt yields a parseable reply.
  JudgeVerdict judge(const std::string& sample_id, const std::string& question,
                     const std::string& gold, const std::string& response, TaskKind dimension);

 private:
  std::shared_ptr<LlmBackend> backend_;
  int max_attempts_;
};

struct DimensionSummary {
  double accuracy = 0.0;  // percent
  double mean_score = 0.0;
  long count = 0;
};

struct BenchmarkReport {
  std::map<TaskKind, DimensionSummary> dimensions;
  std::map<SourceDataset, double> vqa_accuracy;  // percent
  std::string fingerprint;
  std::vector<std::string> notes;

  nlohmann::json to_json() const;
  static BenchmarkReport from_json(const nlohmann::json& j);
};

/// Per-dimension accuracy (100 * correct / total) and mean score. Requested
/// dimensions without verdicts are omitted and noted.
BenchmarkReport aggregate(std::span<const JudgeVerdict> verdicts,
                          std::span<const TaskKind> requested = kAllTaskKinds);

/// Normalized exact match per dataset. Throws InvalidInputError listing the
/// sample ids that have no response.
std::map<SourceDataset, double> vqa_accuracy(std::span<const VQARecord> records,
                                             const std::map<std::string, std::string>& responses);

struct EvalItem {
  std::string sample_id;
  const Visual* visual = nullptr;
  std::string question;
  std::string gold;
  TaskKind dimension = TaskKind::conversation;
};

struct EvalRun {
  std::map<std::string, Response> responses;  // by sample_id
  std::vector<JudgeVerdict> verdicts;         // ordered by (sample_id, dimension)
  BenchmarkReport report;
};

struct EvalOptions {
  std::vector<TaskKind> dimensions{std::begin(kAllTaskKinds), std::end(kAllTaskKinds)};
  int judge_concurrency = 2;
};

/// Generates one response per item of a requested dimension and judges it.
EvalRun run_judged_evaluation(std::span<const EvalItem> items, Responder& responder,
                              Judge& judge, const ChatTemplate& tmpl,
                              const EvalOptions& options = {});

/// Judged items from conversation records: each round becomes one item of
/// the record's task kind, asked as a single-round question.
std::vector<EvalItem> eval_items_from(std::span<const InstructionSample> samples);

struct AblationResult {
  BenchmarkReport video_only;
  BenchmarkReport joint;
  std::map<TaskKind, double> delta;  // joint - video_only accuracy
};

/// Throws InvalidComparisonError unless the two configs differ only in
/// modality_mix.
void check_ablation_configs(const StageConfig& video_only, const StageConfig& joint);

AblationResult compare_reports(const BenchmarkReport& video_only, const BenchmarkReport& joint);

/// Checks the configs, runs each arm through `run_arm` and compares.
AblationResult run_ablation(const StageConfig& video_only, const StageConfig& joint,
                            const std::function<BenchmarkReport(const StageConfig&)>& run_arm);

nlohmann::json to_json(const AblationResult& r);
AblationResult ablation_result_from_json(const nlohmann::json& j);

}  // namespace surgvl
