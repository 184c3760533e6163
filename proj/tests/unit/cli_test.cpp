// Copyright 2026 The surgvl Authors
// SPDX-License-Identifier: Apache-2.0
//
// Run configuration, chat sessions and the command line front end.

#include <algorithm>
#include <fstream>
#include <functional>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "surgvl/chat.hpp"
#include "surgvl/checkpoint.hpp"
#include "surgvl/errors.hpp"
#include "surgvl/evaluation.hpp"
#include "surgvl/run_config.hpp"
#include "test_support.hpp"

namespace surgvl {
namespace {

namespace fs = std::filesystem;
using testing::matches_golden;
using testing::TempDir;

KeyValues parse(const std::string& text) {
  std::istringstream in(text);
  return parse_key_values(in, "test.cfg");
}

std::string config_error(const std::function<void()>& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(RunConfig, ParsesCommentsAndWhitespace) {
  const KeyValues kv = parse("# header\n\n  seed = 7   # trailing\nalign.lr=0.5\n");
  EXPECT_EQ(kv, (KeyValues{{"seed", "7"}, {"align.lr", "0.5"}}));
  const RunConfig c = apply_key_values(kv);
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.align.learning_rate, 0.5);
}

TEST(RunConfig, ErrorsNameTheLine) {
  EXPECT_NE(config_error([] { parse("seed = 1\nseed = 2\n"); }).find("test.cfg:2: duplicate key 'seed'"),
            std::string::npos);
  EXPECT_NE(config_error([] { parse("seed = 1\n\njust words\n"); }).find("test.cfg:3:"),
            std::string::npos);
  EXPECT_NE(config_error([] { apply_key_values({{"align.learning_rate", "1"}}); })
                .find("align.learning_rate"),
            std::string::npos);
  EXPECT_NE(config_error([] { apply_key_values({{"seed", "many"}}); }).find("seed"),
            std::string::npos);
}

TEST(RunConfig, StageSeedsDeriveFromRunSeed) {
  const RunConfig a = apply_key_values({{"seed", "3"}});
  const RunConfig b = apply_key_values({{"seed", "4"}});
  EXPECT_NE(a.align.seed, b.align.seed);
  EXPECT_NE(a.align.seed, a.instruct.seed);
  const RunConfig pinned = apply_key_values({{"seed", "3"}, {"align.seed", "99"}});
  EXPECT_EQ(pinned.align.seed, 99u);
  EXPECT_EQ(pinned.instruct.seed, a.instruct.seed);
}

TEST(RunConfig, EffectiveConfigReparsesToItself) {
  const RunConfig c = apply_key_values(read_key_values(testing::source_dir() / "configs/toy.cfg"));
  const std::string text = effective_config(c);
  std::istringstream in(text);
  const KeyValues kv = parse_key_values(in, "effective.cfg");
  EXPECT_EQ(kv.size(), known_config_keys().size());
  EXPECT_EQ(effective_config(apply_key_values(kv)), text);
  EXPECT_NE(text.find("align.batch_size = 2\n"), std::string::npos) << text;
}

class EchoResponder final : public Responder {
 public:
  std::string id() const override { return "echo"; }
  Response respond(const Visual*, const std::string& prompt) override {
    prompts.push_back(prompt);
    return {"answer " + std::to_string(prompts.size()), false};
  }
  std::vector<std::string> prompts;
};

TEST(Chat, SecondPromptCarriesFirstTurn) {
  EchoResponder echo;
  ChatSession s(echo, nullptr, ChatTemplate{}, HistoryMode::full);
  s.ask("Which phase is this?");
  s.ask("Which tool is visible?");
  ASSERT_EQ(echo.prompts.size(), 2u);
  const ChatTemplate t;
  EXPECT_EQ(echo.prompts[0], t.system_prompt + " <vis> USER: Which phase is this? ASSISTANT:");
  EXPECT_EQ(echo.prompts[1], t.system_prompt +
                                 " <vis> USER: Which phase is this? ASSISTANT: answer 1 </s> "
                                 "USER: Which tool is visible? ASSISTANT:");
  EXPECT_EQ(s.history().rounds.size(), 2u);
  EXPECT_EQ(s.history().rounds[1].answer, "answer 2");
}

TEST(Chat, ResetGivesFirstRoundShape) {
  EchoResponder echo;
  ChatSession s(echo, nullptr, ChatTemplate{}, HistoryMode::full);
  s.ask("q1?");
  s.ask("q2?");
  s.reset();
  EXPECT_TRUE(s.history().rounds.empty());
  const ConversationRecord fresh{"", {{"q3?", ""}}, TaskKind::conversation};
  EXPECT_EQ(s.preview("q3?"), render_template(fresh, 1, HistoryMode::full, ChatTemplate{}));
}

TEST(Chat, PreviousOnlyKeepsOneEarlierTurn) {
  EchoResponder echo;
  ChatSession s(echo, nullptr, ChatTemplate{}, HistoryMode::previous_only);
  s.ask("q1?");
  s.ask("q2?");
  const std::string p = s.preview("q3?");
  EXPECT_EQ(p.find("q1?"), std::string::npos) << p;
  EXPECT_NE(p.find("q2?"), std::string::npos) << p;
}

const char* kScript =
    "Which phase is this?\n"
    "Which tool is visible?\n"
    "\n"
    "/reset\n"
    "Which tool is visible?\n"
    "/quit\n"
    "never asked\n";

StubResponder chat_stub() {
  return StubResponder(ChatTemplate{}, {{"Which phase is this?", "calot triangle dissection"},
                                        {"Which tool is visible?", "hook"}});
}

TEST(Chat, ScriptedSessionMatchesGoldenTranscript) {
  std::string transcripts[2];
  for (std::string& t : transcripts) {
    StubResponder stub = chat_stub();
    ChatSession s(stub, nullptr, ChatTemplate{}, HistoryMode::full);
    std::istringstream in(kScript);
    std::ostringstream out;
    EXPECT_EQ(run_chat(in, out, s, {true}), 3);
    t = out.str();
  }
  EXPECT_EQ(transcripts[0], transcripts[1]);
  EXPECT_TRUE(matches_golden("chat_transcript.txt", transcripts[0]));
}

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult run_cli(const std::vector<std::string>& args, const std::string& stdin_text = "") {
  std::istringstream in(stdin_text);
  std::ostringstream out, err;
  const int code = cli::run(args, in, out, err);
  return {code, out.str(), err.str()};
}

TEST(Cli, UnknownSubcommandIsUsageError) {
  const CliResult r = run_cli({"frobnicate"});
  EXPECT_EQ(r.code, cli::kExitUsage);
  EXPECT_NE(r.err.find("generate-data"), std::string::npos) << r.err;
  EXPECT_EQ(run_cli({}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"train", "--stage", "sideways", "--data", "x", "--out", "y"}).code,
            cli::kExitUsage);
}

TEST(Cli, RuntimeFailureIsExitOne) {
  TempDir dir;
  const CliResult r = run_cli({"report", "--run", (dir / "absent").string()});
  EXPECT_EQ(r.code, cli::kExitFailure);
  EXPECT_NE(r.err.find("absent"), std::string::npos);
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
}

TEST(Cli, ReportRendersStoredJson) {
  TempDir dir;
  BenchmarkReport joint;
  joint.dimensions[TaskKind::conversation] = {75.0, 4.25, 4};
  joint.dimensions[TaskKind::detail_description] = {50.0, 3.0, 4};
  joint.vqa_accuracy[SourceDataset::synthetic] = 75.0;
  BenchmarkReport video = joint;
  video.dimensions[TaskKind::conversation] = {50.0, 3.5, 4};
  video.notes = {"no verdicts for complex_reasoning; dimension omitted"};
  nlohmann::json j = joint.to_json();
  j["name"] = "toy-joint";
  testing::write_file(dir / "report.json", j.dump(2));
  testing::write_file(dir / "ablation.json", to_json(compare_reports(video, joint)).dump(2));
  const CliResult r = run_cli({"report", "--run", dir.path().string()});
  EXPECT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_TRUE(matches_golden("cli_report.txt", r.out));
}

TEST(Cli, ChatWithStubReplaysGolden) {
  TempDir dir;
  testing::write_file(dir / "stub.json", R"({"Which phase is this?": "calot triangle dissection",
                                            "Which tool is visible?": "hook"})");
  const std::vector<std::string> args{"chat", "--stub", (dir / "stub.json").string(),
                                      "--show-prompt"};
  const CliResult a = run_cli(args, kScript);
  const CliResult b = run_cli(args, kScript);
  EXPECT_EQ(a.code, cli::kExitOk) << a.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_TRUE(matches_golden("chat_transcript.txt", a.out));
}

TEST(Cli, ChatContinuesWhenVisualFailsToDecode) {
  TempDir dir;
  testing::write_file(dir / "stub.json", "{}");
  testing::write_file(dir / "broken.ppm", "P6\n2 2\n255\nxx");
  const CliResult r = run_cli({"chat", "--stub", (dir / "stub.json").string(), "--visual",
                               (dir / "broken.ppm").string()},
                              "anything?\n");
  EXPECT_EQ(r.code, cli::kExitOk);
  EXPECT_NE(r.err.find("continuing without it"), std::string::npos) << r.err;
  EXPECT_EQ(r.out, "assistant: I am not sure.\n");
}

TEST(Cli, ChatNeedsCheckpointOrStub) {
  EXPECT_EQ(run_cli({"chat"}).code, cli::kExitUsage);
}

// Toy preset with short stages so the smoke run stays quick.
void write_short_config(const fs::path& path) {
  std::ifstream in(testing::source_dir() / "configs/toy.cfg");
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("align.epochs", 0) == 0) line = "align.epochs = 2";
    if (line.rfind("instruct.epochs", 0) == 0) line = "instruct.epochs = 2";
    out << line << "\n";
  }
  testing::write_file(path, out.str());
}

TEST(Cli, IngestTrainEvaluateSmoke) {
  TempDir dir;
  const std::string cfg = (dir / "short.cfg").string();
  write_short_config(cfg);
  const std::string ws = (dir / "ws").string();
  const std::string run = (dir / "run").string();

  CliResult r = run_cli({"ingest", "--dataset", "synthetic", "--config", cfg, "--out", ws});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_TRUE(fs::exists(dir / "ws/run.json"));
  EXPECT_TRUE(fs::exists(dir / "ws/effective.cfg"));

  r = run_cli({"train", "--config", cfg, "--stage", "align", "--data", ws, "--out", run});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_TRUE(fs::exists(dir / "run/align/epoch-002/manifest.json"));
  EXPECT_TRUE(fs::exists(dir / "run/align/epoch-001/manifest.json"));
  const std::string metrics = testing::read_file(dir / "run/metrics.jsonl");
  // 7 items, batch 2 -> 4 steps per epoch.
  EXPECT_EQ(std::count(metrics.begin(), metrics.end(), '\n'), 8);
  const std::string effective = testing::read_file(dir / "run/effective.cfg");
  EXPECT_NE(effective.find("align.epochs = 2\n"), std::string::npos);
  const auto run_json = nlohmann::json::parse(testing::read_file(dir / "run/run.json"));
  EXPECT_EQ(run_json.at("stages").at("align").at("steps"), 8);
  EXPECT_TRUE(run_json.contains("seeds"));

  r = run_cli({"train", "--config", cfg, "--stage", "instruct", "--data", ws, "--out", run});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_TRUE(fs::exists(dir / "run/instruct/epoch-002/manifest.json"));
  const auto after = nlohmann::json::parse(testing::read_file(dir / "run/run.json"));
  EXPECT_TRUE(after.at("stages").contains("align"));
  EXPECT_NE(after.at("stages").at("instruct").at("initialized_from").get<std::string>().find(
                "epoch-002"),
            std::string::npos);

  const std::string eval = (dir / "eval").string();
  r = run_cli({"evaluate", "--checkpoint", run, "--data", ws, "--out", eval, "--max-new-tokens",
               "4"});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_NE(r.out.find("Judged evaluation"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("Synthetic-VQA"), std::string::npos) << r.out;
  EXPECT_TRUE(fs::exists(dir / "eval/verdicts.jsonl"));
  const CliResult rep = run_cli({"report", "--run", eval});
  EXPECT_EQ(rep.code, cli::kExitOk);
  EXPECT_NE(r.out.find(rep.out), std::string::npos);
}

}  // namespace
}  // namespace surgvl
