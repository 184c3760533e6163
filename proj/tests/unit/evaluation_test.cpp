// Copyright 2026 The surgvl Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <array>
#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "generators.hpp"
#include "surgvl/errors.hpp"
#include "surgvl/evaluation.hpp"
#include "surgvl/report.hpp"
#include "report_fixtures.hpp"
#include "test_support.hpp"
#include "toy_world.hpp"

namespace surgvl {
namespace {

using testing::matches_golden;

struct JudgeCase {
  std::string gold;
  std::string response;
  bool correct;
  int score;
};

// Enumerated by hand from the rule: equal after normalization -> (yes, 5),
// gold inside response -> (yes, 4), one shared word -> (no, 2), else (no, 1).
const std::vector<JudgeCase> kTruthTable = {
    {"preparation", "preparation", true, 5},
    {"calot triangle dissection", "The phase is Calot triangle dissection.", true, 4},
    {"The hook", "hook", true, 5},
    {"clipping and cutting", "cutting", false, 2},
    {"grasper", "scissors", false, 1},
    {"yes", "Yes, it is visible!", true, 4},
};

TEST(MockJudge, RuleTruthTable) {
  for (const JudgeCase& c : kTruthTable) {
    const MockJudgeRule r = mock_judge_rule(c.gold, c.response);
    EXPECT_EQ(r.correct, c.correct) << c.gold << " / " << c.response;
    EXPECT_EQ(r.score, c.score) << c.gold << " / " << c.response;
  }
}

TEST(MockJudge, JudgeThroughPromptFollowsTheRule) {
  Judge judge(std::make_shared<MockJudgeBackend>());
  EXPECT_EQ(judge.id(), "mock-judge/substring-rule-1");
  int i = 0;
  for (const JudgeCase& c : kTruthTable) {
    const JudgeVerdict v = judge.judge("s" + std::to_string(i++), "q?", c.gold, c.response,
                                       TaskKind::detail_description);
    EXPECT_EQ(v.correct, c.correct) << c.gold;
    EXPECT_EQ(v.score, c.score) << c.gold;
    EXPECT_EQ(v.dimension, TaskKind::detail_description);
    EXPECT_EQ(v.judge_id, "mock-judge/substring-rule-1");
  }
}

TEST(MockJudge, EmptyResponseIsRejected) {
  Judge judge(std::make_shared<MockJudgeBackend>());
  EXPECT_THROW(judge.judge("s", "q?", "hook", "", TaskKind::conversation), InvalidInputError);
  EXPECT_THROW(judge.judge("s", "q?", "hook", " \n\t", TaskKind::conversation), InvalidInputError);
}

TEST(JudgePrompt, RoundTripsThroughParser) {
  for (TaskKind d : kAllTaskKinds) {
    const std::string p = render_judge_prompt("Which tool?", "hook", "a hook\nis used", d);
    const auto f = parse_judge_prompt(p);
    ASSERT_TRUE(f.has_value());
    EXPECT_EQ(f->question, "Which tool?");
    EXPECT_EQ(f->gold, "hook");
    EXPECT_EQ(f->response, "a hook\nis used");
    EXPECT_EQ(f->dimension, d);
  }
  EXPECT_FALSE(parse_judge_prompt("hello").has_value());
}

TEST(JudgeReply, AcceptedForms) {
  EXPECT_EQ(parse_judge_reply("correct: yes\nscore: 4"), std::make_pair(true, 4));
  EXPECT_EQ(parse_judge_reply("Score: 2\nCORRECT: No"), std::make_pair(false, 2));
  EXPECT_EQ(parse_judge_reply(R"({"correct": true, "score": 5})"), std::make_pair(true, 5));
  EXPECT_EQ(parse_judge_reply(R"({"correct": "no", "score": 1})"), std::make_pair(false, 1));
  EXPECT_FALSE(parse_judge_reply("correct: yes\nscore: 6").has_value());
  EXPECT_FALSE(parse_judge_reply("correct: yes\nscore: 0").has_value());
  EXPECT_FALSE(parse_judge_reply("score: 3").has_value());
  EXPECT_FALSE(parse_judge_reply("looks fine to me").has_value());
}

// Replies from a script, one per call, then repeats the last.
class ScriptedBackend final : public LlmBackend {
 public:
  explicit ScriptedBackend(std::vector<std::string> replies) : replies_(std::move(replies)) {}
  std::string id() const override { return "scripted"; }
  std::string model() const override { return "v0"; }
  std::string complete(const std::string&) override {
    const std::size_t i = std::min(calls_.fetch_add(1), replies_.size() - 1);
    if (replies_[i] == "!transient") throw TransientBackendError("busy");
    return replies_[i];
  }
  std::size_t calls() const { return calls_.load(); }

 private:
  std::vector<std::string> replies_;
  std::atomic<std::size_t> calls_{0};
};

TEST(Judge, MalformedReplyIsRetried) {
  auto backend = std::make_shared<ScriptedBackend>(
      std::vector<std::string>{"hmm", "!transient", "correct: no\nscore: 3"});
  Judge judge(backend);
  const JudgeVerdict v = judge.judge("s", "q?", "hook", "clipper", TaskKind::complex_reasoning);
  EXPECT_FALSE(v.correct);
  EXPECT_EQ(v.score, 3);
  EXPECT_EQ(backend->calls(), 3u);
}

TEST(Judge, ProtocolErrorAfterAllAttempts) {
  auto backend = std::make_shared<ScriptedBackend>(std::vector<std::string>{"???"});
  Judge judge(backend, 3);
  EXPECT_THROW(judge.judge("s", "q?", "hook", "hook", TaskKind::conversation), JudgeProtocolError);
  EXPECT_EQ(backend->calls(), 3u);
}

std::vector<JudgeVerdict> verdicts_of(TaskKind d, const std::vector<bool>& correct,
                                      const std::vector<int>& scores) {
  std::vector<JudgeVerdict> out;
  for (std::size_t i = 0; i < correct.size(); ++i) {
    out.push_back({"s" + std::to_string(i), d, correct[i], scores[i], "fixture"});
  }
  return out;
}

TEST(Aggregate, HandComputedFixture) {
  const auto v = verdicts_of(TaskKind::conversation, {true, false, true, false}, {4, 2, 3, 5});
  const TaskKind only[] = {TaskKind::conversation};
  const BenchmarkReport r = aggregate(v, only);
  ASSERT_EQ(r.dimensions.size(), 1u);
  EXPECT_EQ(r.dimensions.at(TaskKind::conversation).accuracy, 50.0);
  EXPECT_EQ(r.dimensions.at(TaskKind::conversation).mean_score, 3.5);
  EXPECT_EQ(r.dimensions.at(TaskKind::conversation).count, 4);
  EXPECT_TRUE(r.notes.empty());
}

TEST(Aggregate, AllCorrectAllFive) {
  const auto v = verdicts_of(TaskKind::detail_description, {true, true, true}, {5, 5, 5});
  const TaskKind only[] = {TaskKind::detail_description};
  const BenchmarkReport r = aggregate(v, only);
  EXPECT_EQ(r.dimensions.at(TaskKind::detail_description).accuracy, 100.0);
  EXPECT_EQ(r.dimensions.at(TaskKind::detail_description).mean_score, 5.0);
}

TEST(Aggregate, EmptyDimensionIsOmittedWithNote) {
  const auto v = verdicts_of(TaskKind::conversation, {true}, {5});
  const BenchmarkReport r = aggregate(v);
  EXPECT_EQ(r.dimensions.size(), 1u);
  EXPECT_EQ(r.dimensions.count(TaskKind::detail_description), 0u);
  ASSERT_EQ(r.notes.size(), 2u);
  EXPECT_NE(r.notes[0].find("detail_description"), std::string::npos);
}

TEST(Aggregate, MatchesRationalArithmetic) {
  gen::Gen g(71);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<JudgeVerdict> v;
    std::map<TaskKind, std::array<long, 3>> tally;  // n, correct, score sum
    const int n = g.integer(0, 40);
    for (int i = 0; i < n; ++i) {
      const TaskKind d = kAllTaskKinds[g.integer(0, 2)];
      const bool c = g.integer(0, 1) == 1;
      const int s = g.integer(1, 5);
      v.push_back({"s" + std::to_string(i), d, c, s, "fixture"});
      auto& t = tally[d];
      ++t[0];
      t[1] += c;
      t[2] += s;
    }
    const BenchmarkReport r = aggregate(v);
    EXPECT_EQ(r.dimensions.size(), tally.size());
    for (const auto& [d, t] : tally) {
      const auto& s = r.dimensions.at(d);
      EXPECT_NEAR(s.accuracy, 100.0L * t[1] / t[0], 1e-9);
      EXPECT_NEAR(s.mean_score, static_cast<long double>(t[2]) / t[0], 1e-9);
      EXPECT_GE(s.accuracy, 0.0);
      EXPECT_LE(s.accuracy, 100.0);
      EXPECT_GE(s.mean_score, 1.0);
      EXPECT_LE(s.mean_score, 5.0);
    }
  }
}

TEST(Aggregate, OutOfRangeScoreIsAContractViolation) {
  const auto v = verdicts_of(TaskKind::conversation, {true}, {6});
  EXPECT_THROW(aggregate(v), ContractViolation);
}

TEST(Normalize, Examples) {
  EXPECT_EQ(normalize_answer("The Hook."), "hook");
  EXPECT_EQ(normalize_answer("  Calot-triangle   dissection! "), "calot triangle dissection");
  EXPECT_EQ(normalize_answer("an a the"), "");
  EXPECT_EQ(normalize_answer("Theatre"), "theatre");
}

TEST(Normalize, Idempotent) {
  gen::Gen g(72);
  for (int trial = 0; trial < 500; ++trial) {
    std::string s = g.sentence(12);
    if (g.integer(0, 1)) s = "The " + s + " A, an!";
    const std::string once = normalize_answer(s);
    EXPECT_EQ(normalize_answer(once), once) << s;
  }
}

VQARecord vqa(const std::string& id, SourceDataset d, const std::string& answer) {
  VQARecord r;
  r.sample_id = id;
  r.dataset = d;
  r.visual_path = "x.ppm";
  r.question = "q?";
  r.answer = answer;
  r.split = Split::test;
  return r;
}

TEST(VqaAccuracy, AllNoneAndThreeOfFour) {
  std::vector<VQARecord> records{vqa("c1", SourceDataset::cholec80, "preparation"),
                                 vqa("c2", SourceDataset::cholec80, "Clipping and cutting"),
                                 vqa("e1", SourceDataset::endovis18, "kidney"),
                                 vqa("e2", SourceDataset::endovis18, "left-top"),
                                 vqa("p1", SourceDataset::psiava, "class_03"),
                                 vqa("p2", SourceDataset::psiava, "class_17"),
                                 vqa("p3", SourceDataset::psiava, "class_21"),
                                 vqa("p4", SourceDataset::psiava, "class_30")};
  const std::map<std::string, std::string> responses{
      {"c1", "Preparation."}, {"c2", "clipping and cutting"},  // all match
      {"e1", "liver"},        {"e2", "right-bottom"},          // none match
      {"p1", "class 03"},     {"p2", "class_17"},
      {"p3", "The class_21"}, {"p4", "class_31"}};
  const auto acc = vqa_accuracy(records, responses);
  EXPECT_EQ(acc.at(SourceDataset::cholec80), 100.0);
  EXPECT_EQ(acc.at(SourceDataset::endovis18), 0.0);
  EXPECT_EQ(acc.at(SourceDataset::psiava), 75.0);
}

TEST(VqaAccuracy, MissingResponsesAreListed) {
  std::vector<VQARecord> records{vqa("c1", SourceDataset::cholec80, "a"),
                                 vqa("c2", SourceDataset::cholec80, "b"),
                                 vqa("c3", SourceDataset::cholec80, "c")};
  try {
    vqa_accuracy(records, {{"c2", "b"}});
    FAIL() << "expected InvalidInputError";
  } catch (const InvalidInputError& e) {
    EXPECT_NE(std::string(e.what()).find("c1, c3"), std::string::npos) << e.what();
  }
}

ChatTemplate default_template() { return ChatTemplate{}; }

std::vector<EvalItem> items_with(const std::vector<std::pair<std::string, std::string>>& qa,
                                 TaskKind d, const std::string& prefix) {
  std::vector<EvalItem> out;
  for (std::size_t i = 0; i < qa.size(); ++i) {
    out.push_back({prefix + std::to_string(i), nullptr, qa[i].first, qa[i].second, d});
  }
  return out;
}

TEST(Pipeline, MockJudgeReproducesHandAggregate) {
  // Stub answers: exact, one shared word, exact, one shared word.
  const auto items = items_with({{"q0?", "preparation"},
                                 {"q1?", "gallbladder retraction"},
                                 {"q2?", "hook"},
                                 {"q3?", "clipper grasper"}},
                                TaskKind::conversation, "s");
  StubResponder stub(default_template(), {{"q0?", "Preparation"},
                                          {"q1?", "retraction only"},
                                          {"q2?", "the hook"},
                                          {"q3?", "a grasper"}});
  Judge judge(std::make_shared<MockJudgeBackend>());
  EvalOptions opts;
  opts.dimensions = {TaskKind::conversation};
  const EvalRun run = run_judged_evaluation(items, stub, judge, default_template(), opts);
  const auto& s = run.report.dimensions.at(TaskKind::conversation);
  EXPECT_EQ(s.accuracy, 50.0);
  EXPECT_EQ(s.mean_score, 3.5);
  ASSERT_EQ(run.verdicts.size(), 4u);
  EXPECT_EQ(run.verdicts[1].score, 2);
}

TEST(Pipeline, DeterministicAndTotalPerDimension) {
  gen::Gen g(73);
  std::vector<EvalItem> items;
  std::map<std::string, std::string> answers;
  for (int i = 0; i < 30; ++i) {
    const TaskKind d = kAllTaskKinds[g.integer(0, 2)];
    const std::string q = "question " + std::to_string(i) + "?";
    items.push_back({"id" + std::to_string(100 - i), nullptr, q, g.sentence(3), d});
    answers[q] = g.sentence(4);
  }
  StubResponder stub(default_template(), answers);
  Judge judge(std::make_shared<MockJudgeBackend>());
  EvalOptions opts;
  opts.judge_concurrency = 4;
  const EvalRun a = run_judged_evaluation(items, stub, judge, default_template(), opts);
  const EvalRun b = run_judged_evaluation(items, stub, judge, default_template(), opts);
  ASSERT_EQ(a.verdicts.size(), items.size());
  std::map<std::string, int> seen;
  for (std::size_t i = 0; i < a.verdicts.size(); ++i) {
    EXPECT_EQ(to_json(a.verdicts[i]), to_json(b.verdicts[i]));
    ++seen[a.verdicts[i].sample_id];
    if (i) {
      EXPECT_LT(a.verdicts[i - 1].sample_id, a.verdicts[i].sample_id);
    }
  }
  for (const EvalItem& it : items) EXPECT_EQ(seen[it.sample_id], 1) << it.sample_id;
  EXPECT_EQ(a.report.to_json(), b.report.to_json());

  opts.dimensions = {TaskKind::complex_reasoning};
  const EvalRun c = run_judged_evaluation(items, stub, judge, default_template(), opts);
  long expected = 0;
  for (const EvalItem& it : items) expected += it.dimension == TaskKind::complex_reasoning;
  EXPECT_EQ(static_cast<long>(c.verdicts.size()), expected);
  for (const JudgeVerdict& v : c.verdicts) EXPECT_EQ(v.dimension, TaskKind::complex_reasoning);
}

TEST(Pipeline, DuplicateSampleIdIsRejected) {
  const auto items = items_with({{"q?", "a"}}, TaskKind::conversation, "s");
  std::vector<EvalItem> doubled = items;
  doubled.push_back(items[0]);
  StubResponder stub(default_template(), {});
  Judge judge(std::make_shared<MockJudgeBackend>());
  EXPECT_THROW(run_judged_evaluation(doubled, stub, judge, default_template()), InvalidInputError);
}

TEST(StubResponder, CopiesGold) {
  StubResponder stub(default_template(), {{"Which tool is visible?", "hook"}});
  EXPECT_EQ(generate_response(stub, nullptr, "Which tool is visible?", default_template()).text,
            "hook");
  EXPECT_EQ(generate_response(stub, nullptr, "Other?", default_template()).text,
            "I am not sure.");
}

TEST(Greedy, DeterministicAndTruncationFlag) {
  const auto config = testing::toy_config();
  const auto world = testing::make_world(config);
  const Assistant model = testing::model_for(config, world);
  const auto& sample = world.corpus.instructions.front();
  const std::string q = sample.record.rounds.front().query;
  AssistantResponder a(model, DecodingConfig{8});
  const Response first = generate_response(a, &sample.visual, q, model.config().chat);
  const Response second = generate_response(a, &sample.visual, q, model.config().chat);
  EXPECT_EQ(first.text, second.text);
  EXPECT_EQ(first.truncated, second.truncated);

  const ConversationRecord rec{"", {{q, ""}}, TaskKind::conversation};
  const std::string prompt = render_template(rec, 1, HistoryMode::full, model.config().chat);
  const Generation zero = model.generate(&sample.visual, prompt, 0);
  EXPECT_TRUE(zero.truncated);
  EXPECT_TRUE(zero.text.empty());
  // A shorter cap yields a prefix of the longer run; it is flagged exactly
  // when it stops on the cap.
  const Generation longer = model.generate(&sample.visual, prompt, 12);
  for (int cap = 1; cap <= 6; ++cap) {
    const Generation g = model.generate(&sample.visual, prompt, cap);
    ASSERT_LE(g.token_ids.size(), longer.token_ids.size());
    EXPECT_TRUE(std::equal(g.token_ids.begin(), g.token_ids.end(), longer.token_ids.begin()));
    EXPECT_EQ(g.truncated, static_cast<int>(g.token_ids.size()) == cap);
  }
}

TEST(Greedy, OpenTurnRequired) {
  const auto config = testing::toy_config();
  const auto world = testing::make_world(config);
  const Assistant model = testing::model_for(config, world);
  EXPECT_THROW(model.generate(nullptr, "no template here", 4), AlignmentError);
  const ConversationRecord closed{"", {{"q?", "a"}}, TaskKind::conversation};
  EXPECT_THROW(model.generate(nullptr, render_with_answer(closed, 1, HistoryMode::full, model.config().chat), 4),
               InvalidInputError);
}

TEST(Greedy, MemorizedAnswerIsReproduced) {
  const auto config = testing::toy_config();
  const auto world = testing::make_world(config);
  TrainState state(testing::model_for(config, world));
  state = train(config.instruct, world.corpus, std::move(state));
  AssistantResponder a(state.model, DecodingConfig{config.max_new_tokens});
  int reproduced = 0;
  for (const auto& s : world.corpus.instructions) {
    const auto& round = s.record.rounds.front();
    const Response r = generate_response(a, &s.visual, round.query, state.model.config().chat);
    reproduced += normalize_answer(r.text) == normalize_answer(round.answer);
  }
  RecordProperty("reproduced", reproduced);
  EXPECT_GE(reproduced, 1);
}

TEST(EvalItems, OnePerRoundWithRecordKind) {
  const auto config = testing::toy_config();
  const auto world = testing::make_world(config);
  const auto items = eval_items_from(world.corpus.instructions);
  ASSERT_EQ(items.size(), 2 * world.corpus.instructions.size());
  EXPECT_EQ(items[0].sample_id, world.corpus.instructions[0].sample_id + "/r1");
  EXPECT_EQ(items[1].sample_id, world.corpus.instructions[0].sample_id + "/r2");
  EXPECT_EQ(items[1].gold, world.corpus.instructions[0].record.rounds[1].answer);
  EXPECT_EQ(items[0].visual, &world.corpus.instructions[0].visual);
}

BenchmarkReport report_with(std::map<TaskKind, double> acc) {
  BenchmarkReport r;
  for (const auto& [d, a] : acc) r.dimensions[d] = {a, 3.0, 10};
  return r;
}

TEST(Ablation, IdenticalArmsGiveZeroDeltas) {
  const auto [video, joint] = testing::ablation_configs(testing::toy_config().align);
  const BenchmarkReport same = report_with({{TaskKind::conversation, 40.0},
                                            {TaskKind::detail_description, 30.0},
                                            {TaskKind::complex_reasoning, 20.0}});
  const AblationResult r = run_ablation(video, joint, [&](const StageConfig&) { return same; });
  ASSERT_EQ(r.delta.size(), 3u);
  for (const auto& [d, v] : r.delta) EXPECT_EQ(v, 0.0) << to_string(d);
  const std::string table = render_ablation_table(r);
  EXPECT_NE(table.find("\\(\\Delta\\) Acc. & 0.0 & 0.0 & 0.0 \\\\"), std::string::npos) << table;
}

TEST(Ablation, FixtureArmsGiveHandDeltas) {
  const auto [video, joint] = testing::ablation_configs(testing::toy_config().align);
  const AblationResult r = run_ablation(video, joint, testing::fixture_arm);
  EXPECT_EQ(r.delta.at(TaskKind::conversation), 25.0);
  EXPECT_EQ(r.delta.at(TaskKind::detail_description), 0.0);
  EXPECT_EQ(r.delta.at(TaskKind::complex_reasoning), -20.0);
  EXPECT_TRUE(matches_golden("ablation_table.txt", render_ablation_table(r)));
  const AblationResult back = ablation_result_from_json(to_json(r));
  EXPECT_EQ(to_json(back), to_json(r));
}

TEST(Ablation, DivergentConfigsAreRejected) {
  const auto [video, joint] = testing::ablation_configs(testing::toy_config().align);
  EXPECT_NO_THROW(check_ablation_configs(video, joint));
  StageConfig other = joint;
  other.learning_rate *= 2;
  try {
    check_ablation_configs(video, other);
    FAIL() << "expected InvalidComparisonError";
  } catch (const InvalidComparisonError& e) {
    EXPECT_NE(std::string(e.what()).find("learning_rate"), std::string::npos) << e.what();
  }
  EXPECT_THROW(check_ablation_configs(joint, video), InvalidComparisonError);
  int arms_run = 0;
  EXPECT_THROW(run_ablation(video, other,
                            [&](const StageConfig&) {
                              ++arms_run;
                              return BenchmarkReport{};
                            }),
               InvalidComparisonError);
  EXPECT_EQ(arms_run, 0);
}

TEST(Format, ValuesAndDeltas) {
  EXPECT_EQ(format_value(58.3), "58.3");
  EXPECT_EQ(format_value(3.85), "3.9");
  EXPECT_EQ(format_value(100.0), "100.0");
  EXPECT_EQ(format_value(4.25), "4.3");
  EXPECT_EQ(format_value(-0.04), "0.0");
  EXPECT_EQ(format_delta(0.8), "+0.8");
  EXPECT_EQ(format_delta(2.6), "+2.6");
  EXPECT_EQ(format_delta(-1.2), "-1.2");
  EXPECT_EQ(format_delta(-0.04), "0.0");
  EXPECT_EQ(format_delta(0.0), "0.0");
}

using testing::reference_report;

TEST(Tables, DimensionTableShape) {
  const std::string t = testing::dimension_table_fixture();
  EXPECT_NE(t.find("surgvl & 58.3 & 3.9 & 47.1 & 3.2 & 46.5 & 3.1 \\\\"), std::string::npos) << t;
  EXPECT_NE(t.find(kJudgeFootnote), std::string::npos);
  EXPECT_TRUE(matches_golden("dimension_table.txt", t));
}

TEST(Tables, VqaTableShape) {
  const std::string plain = render_vqa_table({{"surgvl", reference_report()}});
  EXPECT_NE(plain.find("surgvl & 92.2 & 68.7 & 67.1 \\\\"), std::string::npos) << plain;
  EXPECT_EQ(plain.find("Synthetic"), std::string::npos);
  const std::string t = testing::vqa_table_fixture();
  EXPECT_TRUE(matches_golden("vqa_table.txt", t));
}

TEST(Tables, RunReportFromStoredJson) {
  testing::TempDir dir;
  nlohmann::json j = reference_report().to_json();
  j["name"] = "surgvl";
  testing::write_file(dir / "report.json", j.dump(2));
  testing::write_file(
      dir / "ablation.json",
      to_json(compare_reports(testing::reference_video_only_report(), reference_report())).dump(2));
  const std::string t = render_run_report(dir.path());
  EXPECT_NE(t.find("+0.8 & +2.6 & +3.5 \\\\"), std::string::npos) << t;
  EXPECT_TRUE(matches_golden("run_report.txt", t));
  EXPECT_THROW(render_run_report(dir / "missing"), IoError);
}

TEST(Report, JsonRoundTrip) {
  BenchmarkReport r = reference_report();
  r.fingerprint = "abc";
  r.notes = {"n1"};
  EXPECT_EQ(BenchmarkReport::from_json(r.to_json()).to_json(), r.to_json());
}

}  // namespace
}  // namespace surgvl
