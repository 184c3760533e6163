// Copyright 2026 The surgvl Authors
// SPDX-License-Identifier: Apache-2.0

#include "surgvl/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <exception>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "surgvl/checkpoint.hpp"
#include "surgvl/errors.hpp"

namespace surgvl {

using nlohmann::json;

Response AssistantResponder::respond(const Visual* visual, const std::string& rendered_prompt) {
  const Generation g = model_.generate(visual, rendered_prompt, decoding_.max_new_tokens);
  return {g.text, g.truncated};
}

StubResponder::StubResponder(ChatTemplate tmpl, std::map<std::string, std::string> answers,
                             std::string fallback)
    : tmpl_(std::move(tmpl)), answers_(std::move(answers)), fallback_(std::move(fallback)) {}

Response StubResponder::respond(const Visual*, const std::string& rendered_prompt) {
  const ParsedConversation parsed = parse_rendered(rendered_prompt, tmpl_);
  if (parsed.turns.empty()) return {fallback_, false};
  const auto it = answers_.find(parsed.turns.back().query);
  return {it == answers_.end() ? fallback_ : it->second, false};
}

Response generate_response(Responder& responder, const Visual* visual,
                           const std::string& question, const ChatTemplate& tmpl) {
  const ConversationRecord rec{"", {{question, ""}}, TaskKind::conversation};
  return responder.respond(visual, render_template(rec, 1, HistoryMode::full, tmpl));
}

json to_json(const JudgeVerdict& v) {
  return {{"sample_id", v.sample_id},
          {"dimension", to_string(v.dimension)},
          {"correct", v.correct},
          {"score", v.score},
          {"judge_id", v.judge_id}};
}

namespace {

constexpr std::string_view kQuestionLabel = "\nQuestion: ";
constexpr std::string_view kGoldLabel = "\nCorrect Answer: ";
constexpr std::string_view kResponseLabel = "\nPredicted Answer: ";
constexpr std::string_view kReplyLabel =
    "\nReply with two lines: \"correct: yes\" or \"correct: no\", then \"score: N\" where N "
    "is an integer from 1 to 5.";

std::string_view criterion(TaskKind d) {
  switch (d) {
    case TaskKind::conversation:
      return "Decide whether the predicted answer is correct and consistent with what the "
             "reference says about the scene.";
    case TaskKind::detail_description:
      return "Decide whether the predicted description covers the main points of the "
             "reference description without contradicting it.";
    case TaskKind::complex_reasoning:
      return "Decide whether the predicted answer reasons soundly and links the facts of the "
             "reference into a coherent explanation.";
  }
  return "";
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> words(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

}  // namespace

std::string render_judge_prompt(const std::string& question, const std::string& gold,
                                const std::string& response, TaskKind dimension) {
  std::string out = fmt::format("You are grading an answer about a surgical scene (rubric v{}, {}).\n",
                                kJudgePromptVersion, to_string(dimension));
  out += criterion(dimension);
  out += kQuestionLabel;
  out += question;
  out += kGoldLabel;
  out += gold;
  out += kResponseLabel;
  out += response;
  out += kReplyLabel;
  return out;
}

std::optional<JudgeFields> parse_judge_prompt(const std::string& prompt) {
  const std::string head = fmt::format("(rubric v{}, ", kJudgePromptVersion);
  const auto h = prompt.find(head);
  if (h == std::string::npos) return std::nullopt;
  const auto hend = prompt.find(')', h);
  const auto q = prompt.find(kQuestionLabel);
  const auto g = q == std::string::npos ? q : prompt.find(kGoldLabel, q + kQuestionLabel.size());
  const auto r = g == std::string::npos ? g : prompt.find(kResponseLabel, g + kGoldLabel.size());
  const auto e = prompt.rfind(kReplyLabel);
  if (hend == std::string::npos || r == std::string::npos || e == std::string::npos || e < r) {
    return std::nullopt;
  }
  JudgeFields f;
  try {
    f.dimension = task_kind_from_string(prompt.substr(h + head.size(), hend - h - head.size()));
  } catch (const Error&) {
    return std::nullopt;
  }
  f.question = prompt.substr(q + kQuestionLabel.size(), g - q - kQuestionLabel.size());
  f.gold = prompt.substr(g + kGoldLabel.size(), r - g - kGoldLabel.size());
  f.response = prompt.substr(r + kResponseLabel.size(), e - r - kResponseLabel.size());
  return f;
}

std::optional<std::pair<bool, int>> parse_judge_reply(const std::string& reply) {
  std::optional<bool> correct;
  std::optional<int> score;
  const std::string t = trim(reply);
  if (!t.empty() && t.front() == '{') {
    try {
      const json j = json::parse(t);
      const json& c = j.at("correct");
      if (c.is_boolean()) {
        correct = c.get<bool>();
      } else if (c.is_string()) {
        const std::string s = lower(c.get<std::string>());
        if (s == "yes") correct = true;
        if (s == "no") correct = false;
      }
      if (j.at("score").is_number_integer()) score = j.at("score").get<int>();
    } catch (const json::exception&) {
      return std::nullopt;
    }
  } else {
    std::istringstream in(t);
    std::string line;
    while (std::getline(in, line)) {
      const std::string l = lower(trim(line));
      if (l.rfind("correct:", 0) == 0) {
        const std::string v = trim(l.substr(8));
        if (v == "yes") correct = true;
        else if (v == "no") correct = false;
        else return std::nullopt;
      } else if (l.rfind("score:", 0) == 0) {
        const std::string v = trim(l.substr(6));
        if (v.size() != 1 || !std::isdigit(static_cast<unsigned char>(v[0]))) return std::nullopt;
        score = v[0] - '0';
      }
    }
  }
  if (!correct || !score || *score < 1 || *score > 5) return std::nullopt;
  return std::make_pair(*correct, *score);
}

std::string normalize_answer(const std::string& s) {
  std::string cleaned;
  cleaned.reserve(s.size());
  for (char ch : s) {
    const auto u = static_cast<unsigned char>(ch);
    if (std::ispunct(u)) {
      cleaned += ' ';
    } else {
      cleaned += static_cast<char>(std::tolower(u));
    }
  }
  std::string out;
  for (const std::string& w : words(cleaned)) {
    if (w == "a" || w == "an" || w == "the") continue;
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

MockJudgeRule mock_judge_rule(const std::string& gold, const std::string& response) {
  const std::string g = normalize_answer(gold);
  const std::string r = normalize_answer(response);
  if (!g.empty() && g == r) return {true, 5};
  if (!g.empty() && r.find(g) != std::string::npos) return {true, 4};
  const auto gw = words(g);
  const auto rv = words(r);
  const std::set<std::string> rw(rv.begin(), rv.end());
  for (const std::string& w : gw) {
    if (rw.count(w)) return {false, 2};
  }
  return {false, 1};
}

std::string MockJudgeBackend::complete(const std::string& prompt) {
  const auto fields = parse_judge_prompt(prompt);
  if (!fields) return "unparseable request";
  const MockJudgeRule v = mock_judge_rule(fields->gold, fields->response);
  return fmt::format("correct: {}\nscore: {}", v.correct ? "yes" : "no", v.score);
}

Judge::Judge(std::shared_ptr<LlmBackend> backend, int max_attempts)
    : backend_(std::move(backend)), max_attempts_(max_attempts) {
  if (!backend_) throw ConfigError("no judge backend configured");
  if (max_attempts_ < 1) throw ConfigError("judge needs at least one attempt");
}

std::string Judge::id() const { return backend_->id() + "/" + backend_->model(); }

JudgeVerdict Judge::judge(const std::string& sample_id, const std::string& question,
                          const std::string& gold, const std::string& response,
                          TaskKind dimension) {
  if (trim(response).empty()) {
    throw InvalidInputError("response for " + sample_id + " is empty");
  }
  const std::string prompt = render_judge_prompt(question, gold, response, dimension);
  std::string last;
  for (int attempt = 1; attempt <= max_attempts_; ++attempt) {
    try {
      last = backend_->complete(prompt);
    } catch (const TransientBackendError& e) {
      last = e.what();
      continue;
    }
    if (const auto parsed = parse_judge_reply(last)) {
      return {sample_id, dimension, parsed->first, parsed->second, id()};
    }
    spdlog::warn("judge reply for {} is malformed (attempt {})", sample_id, attempt);
  }
  throw JudgeProtocolError(fmt::format("judge gave no usable verdict for {} after {} attempts; "
                                       "last reply: {}",
                                       sample_id, max_attempts_, last));
}

json BenchmarkReport::to_json() const {
  json dims = json::object();
  for (const auto& [d, s] : dimensions) {
    dims[to_string(d)] = {{"accuracy", s.accuracy}, {"mean_score", s.mean_score}, {"count", s.count}};
  }
  json vqa = json::object();
  for (const auto& [d, a] : vqa_accuracy) vqa[to_string(d)] = a;
  return {{"dimensions", dims}, {"vqa_accuracy", vqa}, {"fingerprint", fingerprint}, {"notes", notes}};
}

BenchmarkReport BenchmarkReport::from_json(const json& j) {
  BenchmarkReport r;
  const json dims = j.value("dimensions", json::object());
  for (const auto& [k, v] : dims.items()) {
    r.dimensions[task_kind_from_string(k)] = {v.at("accuracy").get<double>(),
                                              v.at("mean_score").get<double>(),
                                              v.at("count").get<long>()};
  }
  const json vqa = j.value("vqa_accuracy", json::object());
  for (const auto& [k, v] : vqa.items()) {
    r.vqa_accuracy[source_dataset_from_string(k)] = v.get<double>();
  }
  r.fingerprint = j.value("fingerprint", std::string());
  r.notes = j.value("notes", std::vector<std::string>{});
  return r;
}

BenchmarkReport aggregate(std::span<const JudgeVerdict> verdicts,
                          std::span<const TaskKind> requested) {
  BenchmarkReport out;
  for (TaskKind d : requested) {
    long n = 0;
    long correct = 0;
    long score_sum = 0;
    for (const JudgeVerdict& v : verdicts) {
      if (v.dimension != d) continue;
      if (v.score < 1 || v.score > 5) {
        throw ContractViolation(fmt::format("verdict for {} has score {}", v.sample_id, v.score));
      }
      ++n;
      correct += v.correct ? 1 : 0;
      score_sum += v.score;
    }
    if (n == 0) {
      out.notes.push_back("no verdicts for " + to_string(d) + "; dimension omitted");
      continue;
    }
    out.dimensions[d] = {100.0 * static_cast<double>(correct) / static_cast<double>(n),
                         static_cast<double>(score_sum) / static_cast<double>(n), n};
  }
  return out;
}

std::map<SourceDataset, double> vqa_accuracy(std::span<const VQARecord> records,
                                             const std::map<std::string, std::string>& responses) {
  std::vector<std::string> missing;
  std::map<SourceDataset, std::pair<long, long>> tally;  // (matches, total)
  for (const VQARecord& r : records) {
    const auto it = responses.find(r.sample_id);
    if (it == responses.end()) {
      missing.push_back(r.sample_id);
      continue;
    }
    auto& t = tally[r.dataset];
    ++t.second;
    if (normalize_answer(it->second) == normalize_answer(r.answer)) ++t.first;
  }
  if (!missing.empty()) {
    std::string list;
    for (const std::string& id : missing) list += (list.empty() ? "" : ", ") + id;
    throw InvalidInputError("no response for: " + list);
  }
  std::map<SourceDataset, double> out;
  for (const auto& [d, t] : tally) {
    out[d] = 100.0 * static_cast<double>(t.first) / static_cast<double>(t.second);
  }
  return out;
}

EvalRun run_judged_evaluation(std::span<const EvalItem> items, Responder& responder,
                              Judge& judge, const ChatTemplate& tmpl, const EvalOptions& options) {
  const std::set<TaskKind> wanted(options.dimensions.begin(), options.dimensions.end());
  std::vector<const EvalItem*> selected;
  std::set<std::string> ids;
  for (const EvalItem& it : items) {
    if (!wanted.count(it.dimension)) continue;
    if (!ids.insert(it.sample_id).second) {
      throw InvalidInputError("duplicate evaluation sample_id " + it.sample_id);
    }
    selected.push_back(&it);
  }
  std::sort(selected.begin(), selected.end(),
            [](const EvalItem* a, const EvalItem* b) { return a->sample_id < b->sample_id; });

  EvalRun run;
  std::vector<std::string> texts(selected.size());
  for (std::size_t i = 0; i < selected.size(); ++i) {
    Response r = generate_response(responder, selected[i]->visual, selected[i]->question, tmpl);
    if (r.truncated) spdlog::info("response for {} hit the token cap", selected[i]->sample_id);
    texts[i] = r.text;
    run.responses.emplace(selected[i]->sample_id, std::move(r));
  }

  std::vector<std::optional<JudgeVerdict>> verdicts(selected.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= selected.size()) return;
      try {
        const EvalItem& it = *selected[i];
        // An empty generation is graded as the lowest possible verdict.
        if (trim(texts[i]).empty()) {
          verdicts[i] = JudgeVerdict{it.sample_id, it.dimension, false, 1, judge.id()};
        } else {
          verdicts[i] = judge.judge(it.sample_id, it.question, it.gold, texts[i], it.dimension);
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next.store(selected.size());
        return;
      }
    }
  };
  const std::size_t n_workers = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::max(1, options.judge_concurrency)), 1,
      std::max<std::size_t>(1, selected.size()));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  for (auto& v : verdicts) run.verdicts.push_back(std::move(*v));
  run.report = aggregate(run.verdicts, options.dimensions);
  return run;
}

std::vector<EvalItem> eval_items_from(std::span<const InstructionSample> samples) {
  std::vector<EvalItem> out;
  for (const InstructionSample& s : samples) {
    for (std::size_t r = 0; r < s.record.rounds.size(); ++r) {
      out.push_back({fmt::format("{}/r{}", s.sample_id, r + 1), &s.visual,
                     s.record.rounds[r].query, s.record.rounds[r].answer, s.record.task_kind});
    }
  }
  return out;
}

void check_ablation_configs(const StageConfig& video_only, const StageConfig& joint) {
  if (video_only.modality_mix != ModalityMix::video_only) {
    throw InvalidComparisonError("first arm must use the video_only modality mix");
  }
  if (joint.modality_mix != ModalityMix::joint) {
    throw InvalidComparisonError("second arm must use the joint modality mix");
  }
  json a = to_json(video_only);
  json b = to_json(joint);
  a.erase("modality_mix");
  b.erase("modality_mix");
  for (const auto& [key, value] : a.items()) {
    if (b.at(key) != value) {
      throw InvalidComparisonError(fmt::format("arms differ in {} ({} vs {})", key, value.dump(),
                                               b.at(key).dump()));
    }
  }
}

AblationResult compare_reports(const BenchmarkReport& video_only, const BenchmarkReport& joint) {
  AblationResult r{video_only, joint, {}};
  for (const auto& [d, s] : joint.dimensions) {
    const auto it = video_only.dimensions.find(d);
    if (it != video_only.dimensions.end()) r.delta[d] = s.accuracy - it->second.accuracy;
  }
  return r;
}

AblationResult run_ablation(const StageConfig& video_only, const StageConfig& joint,
                            const std::function<BenchmarkReport(const StageConfig&)>& run_arm) {
  check_ablation_configs(video_only, joint);
  const BenchmarkReport a = run_arm(video_only);
  const BenchmarkReport b = run_arm(joint);
  return compare_reports(a, b);
}

json to_json(const AblationResult& r) {
  json delta = json::object();
  for (const auto& [d, v] : r.delta) delta[to_string(d)] = v;
  return {{"video_only", r.video_only.to_json()}, {"joint", r.joint.to_json()}, {"delta", delta}};
}

AblationResult ablation_result_from_json(const json& j) {
  AblationResult r;
  r.video_only = BenchmarkReport::from_json(j.at("video_only"));
  r.joint = BenchmarkReport::from_json(j.at("joint"));
  const json delta = j.value("delta", json::object());
  for (const auto& [k, v] : delta.items()) {
    r.delta[task_kind_from_string(k)] = v.get<double>();
  }
  return r;
}

}  // namespace surgvl
