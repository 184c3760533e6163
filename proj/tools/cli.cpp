// Copyright 2026 The surgvl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "surgvl/chat.hpp"
#include "surgvl/checkpoint.hpp"
#include "surgvl/datagen.hpp"
#include "surgvl/dataset.hpp"
#include "surgvl/errors.hpp"
#include "surgvl/evaluation.hpp"
#include "surgvl/hash.hpp"
#include "surgvl/llm.hpp"
#include "surgvl/pipeline.hpp"
#include "surgvl/report.hpp"
#include "surgvl/run_config.hpp"

namespace surgvl::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GenerateArgs {
  std::string captions;
  std::vector<std::string> tasks{"conv", "detail", "reason"};
  std::string backend = "mock";
  std::string out;
  std::string cache;
  int concurrency = 4;
};

struct IngestArgs {
  std::string dataset;
  std::string root;
  std::string out;
  std::string config;
  std::optional<std::uint64_t> seed;
};

struct TrainArgs {
  std::string config;
  std::string stage;
  std::string data;
  std::string instructions;
  std::string out;
  std::string init;
  std::optional<std::uint64_t> seed;
};

struct EvaluateArgs {
  std::string checkpoint;
  std::string dataset = "synthetic";
  std::string data;
  std::string workspace;
  std::string instructions;
  std::string judge = "mock";
  std::vector<std::string> dims{"conv", "detail", "reason"};
  std::string split = "test";
  std::string out;
  std::string name;
  std::string baseline;
  int max_new_tokens = 32;
  int judge_concurrency = 2;
};

struct ChatArgs {
  std::string checkpoint;
  std::string stub;
  std::string visual;
  std::string history;
  bool show_prompt = false;
};

RunConfig load_run_config(const std::string& path, std::optional<std::uint64_t> seed) {
  KeyValues kv = path.empty() ? KeyValues{} : read_key_values(path);
  if (seed) kv["seed"] = std::to_string(*seed);
  return apply_key_values(kv);
}

std::vector<TaskKind> task_list(const std::vector<std::string>& names) {
  std::vector<TaskKind> out;
  for (const auto& n : names) {
    try {
      out.push_back(task_kind_from_short(n));
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  }
  return out;
}

std::shared_ptr<LlmBackend> live_backend() {
  return std::make_shared<HttpChatBackend>(http_backend_config_from_env());
}

int cmd_generate(const GenerateArgs& a, std::ostream& out) {
  const auto captions = read_captions(a.captions);
  std::shared_ptr<LlmBackend> backend;
  if (a.backend == "mock") {
    backend = std::make_shared<MockLlmBackend>();
  } else if (a.backend == "live") {
    backend = live_backend();
  } else {
    throw ConfigError("--backend must be mock or live");
  }
  LlmClient client(backend);
  if (!a.cache.empty() && fs::exists(a.cache)) client.load_cache(a.cache);
  BuildOptions options;
  options.tasks = task_list(a.tasks);
  options.concurrency = a.concurrency;
  const CorpusBuild build = build_corpus(captions, options, client);
  write_corpus(a.out, build.records);
  {
    std::ofstream stats(a.out + ".stats.json");
    stats << build.stats.to_json().dump(2) << "\n";
  }
  if (!a.cache.empty()) client.save_cache(a.cache);
  out << fmt::format("wrote {} records to {} ({} backend calls, {} parse failures)\n",
                     build.records.size(), a.out, client.backend_calls(),
                     build.stats.parse_failures);
  return kExitOk;
}

int cmd_ingest(const IngestArgs& a, std::ostream& out, std::ostream& err) {
  const SourceDataset ds = source_dataset_from_string(a.dataset);
  const fs::path dir(a.out);
  fs::create_directories(dir);
  if (ds == SourceDataset::synthetic) {
    const RunConfig cfg = load_run_config(a.config, a.seed);
    const SyntheticCorpus corpus = make_synthetic_corpus(cfg.seed, cfg.synthetic);
    write_synthetic_corpus(dir, corpus);
    write_run_files(dir, cfg, "ingest", {{"dataset", "synthetic"}});
    out << fmt::format("wrote synthetic workspace {} ({} items, {} VQA records)\n", dir.string(),
                       corpus.items.size(), corpus.records.size());
    return kExitOk;
  }
  if (a.root.empty()) throw ConfigError("--root is required for " + a.dataset);
  const LoadedDataset loaded = load_dataset(ds, a.root);
  write_vqa_jsonl(dir / "vqa.jsonl", loaded.records);
  json manifest = loaded.manifest.to_json();
  manifest["root"] = fs::absolute(a.root).string();
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << "\n";
  out << fmt::format("{}: {} records ({} train, {} test)\n", a.dataset, loaded.manifest.total,
                     loaded.manifest.counts.count(Split::train)
                         ? loaded.manifest.counts.at(Split::train)
                         : 0,
                     loaded.manifest.counts.count(Split::test)
                         ? loaded.manifest.counts.at(Split::test)
                         : 0);
  if (!loaded.manifest.discrepancy.empty()) {
    err << "warning: " << loaded.manifest.discrepancy << "\n";
  }
  return kExitOk;
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  const RunConfig cfg = load_run_config(a.config, a.seed);
  const Stage stage = stage_from_string(a.stage);
  const StageConfig& sc = cfg.stage(stage);
  const fs::path run(a.out);
  const TrainingCorpus corpus =
      load_training_workspace(a.data, a.instructions.empty()
                                          ? std::nullopt
                                          : std::optional<fs::path>(a.instructions));

  std::optional<fs::path> start;
  if (auto resume = latest_checkpoint(run / to_string(stage))) {
    start = *resume;
  } else if (!a.init.empty()) {
    start = resolve_checkpoint(a.init);
  } else if (stage == Stage::instruct) {
    start = latest_checkpoint(run / to_string(Stage::align));
  }
  TrainState state = start ? load_checkpoint(*start)
                           : TrainState(build_assistant(cfg, tokenizer_texts(corpus)));

  fs::create_directories(run);
  write_run_files(run, cfg, "train");
  TrainOptions options;
  options.checkpoint_root = run / to_string(stage);
  options.metrics_path = run / "metrics.jsonl";
  options.batch_log_path = run / (to_string(stage) + "_batches.jsonl");
  state = train(sc, corpus, std::move(state), options);

  const auto ckpt = latest_checkpoint(run / to_string(stage));
  const double final_loss = state.history.empty() ? 0.0 : state.history.back().loss;
  json stage_info = {{"config", to_json(sc)},
                     {"initialized_from", start ? start->string() : "fresh"},
                     {"steps", state.step},
                     {"final_loss", final_loss},
                     {"checkpoint", ckpt ? ckpt->string() : ""}};
  write_run_files(run, cfg, "train", {{"stages", {{to_string(stage), stage_info}}}});
  out << fmt::format("{}: step {} loss {:.6f} checkpoint {}\n", to_string(stage), state.step,
                     final_loss, ckpt ? ckpt->string() : "-");
  return kExitOk;
}

struct EvalOutcome {
  BenchmarkReport report;
  std::optional<StageConfig> align_config;
};

std::optional<StageConfig> recorded_align_config(const fs::path& checkpoint_dir) {
  // <run>/align/epoch-NNN or <run>/instruct/epoch-NNN
  const fs::path run_json = checkpoint_dir.parent_path().parent_path() / "run.json";
  if (!fs::exists(run_json)) return std::nullopt;
  std::ifstream in(run_json);
  const json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.contains("stages") || !j["stages"].contains("align")) {
    return std::nullopt;
  }
  return stage_config_from_json(j["stages"]["align"]["config"]);
}

EvalOutcome evaluate_checkpoint(const EvaluateArgs& a, const std::string& checkpoint,
                                const fs::path& out_dir, std::ostream& out) {
  const fs::path ckpt = resolve_checkpoint(checkpoint);
  const TrainState state = load_checkpoint(ckpt);
  const ChatTemplate& tmpl = state.model.config().chat;
  AssistantResponder responder(state.model, DecodingConfig{a.max_new_tokens});

  const SourceDataset ds = source_dataset_from_string(a.dataset);
  std::vector<VQARecord> vqa;
  fs::path vqa_root;
  fs::path workspace = a.workspace;
  if (ds == SourceDataset::synthetic) {
    if (a.data.empty()) throw ConfigError("--data is required");
    vqa_root = a.data;
    vqa = read_vqa_jsonl(vqa_root / "vqa.jsonl");
    if (workspace.empty()) workspace = a.data;
  } else {
    if (a.data.empty()) throw ConfigError("--data is required");
    vqa_root = a.data;
    for (VQARecord& r : load_dataset(ds, a.data).records) {
      if (a.split == "all" || to_string(r.split) == a.split) vqa.push_back(std::move(r));
    }
  }

  std::vector<InstructionSample> samples;
  if (!workspace.empty()) {
    samples = load_training_workspace(workspace, a.instructions.empty()
                                                     ? std::nullopt
                                                     : std::optional<fs::path>(a.instructions))
                  .instructions;
  }
  const auto items = eval_items_from(samples);

  std::shared_ptr<LlmBackend> judge_backend;
  if (a.judge == "mock") {
    judge_backend = std::make_shared<MockJudgeBackend>();
  } else if (a.judge == "live") {
    judge_backend = live_backend();
  } else {
    throw ConfigError("--judge must be mock or live");
  }
  Judge judge(judge_backend);
  EvalOptions options;
  options.dimensions = task_list(a.dims);
  options.judge_concurrency = a.judge_concurrency;
  if (items.empty() && vqa.empty()) throw InsufficientDataError("nothing to evaluate");
  EvalRun run = run_judged_evaluation(items, responder, judge, tmpl, options);

  const auto answers = answer_vqa(vqa, responder, tmpl, vqa_root);
  if (!vqa.empty()) run.report.vqa_accuracy = vqa_accuracy(vqa, answers);

  std::ifstream manifest(ckpt / "manifest.json");
  std::stringstream text;
  text << manifest.rdbuf();
  run.report.fingerprint =
      sha256_hex(text.str() + "|" + judge.id() + "|" + fmt::format("{}", fmt::join(a.dims, ",")));

  fs::create_directories(out_dir);
  std::vector<json> rows;
  for (const auto& [id, r] : run.responses) {
    rows.push_back({{"sample_id", id}, {"text", r.text}, {"truncated", r.truncated}});
  }
  for (const auto& [id, text_answer] : answers) {
    rows.push_back({{"sample_id", id}, {"text", text_answer}, {"vqa", true}});
  }
  write_jsonl(out_dir / "responses.jsonl", rows);
  rows.clear();
  for (const JudgeVerdict& v : run.verdicts) rows.push_back(to_json(v));
  write_jsonl(out_dir / "verdicts.jsonl", rows);
  json report = run.report.to_json();
  report["name"] = a.name.empty() ? ckpt.parent_path().parent_path().filename().string() : a.name;
  report["checkpoint"] = ckpt.string();
  std::ofstream(out_dir / "report.json") << report.dump(2) << "\n";
  out << fmt::format("evaluated {}: {} judged items, {} VQA records\n", ckpt.string(),
                     items.size(), vqa.size());
  return {run.report, recorded_align_config(ckpt)};
}

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  const fs::path dir(a.out);
  if (a.baseline.empty()) {
    evaluate_checkpoint(a, a.checkpoint, dir, out);
    out << render_run_report(dir);
    return kExitOk;
  }
  EvaluateArgs joint_args = a;
  EvaluateArgs base_args = a;
  if (base_args.name.empty()) base_args.name = "video_only";
  const EvalOutcome base = evaluate_checkpoint(base_args, a.baseline, dir / "video_only", out);
  const EvalOutcome joint = evaluate_checkpoint(joint_args, a.checkpoint, dir, out);
  if (!base.align_config || !joint.align_config) {
    throw InvalidComparisonError("both arms need a run directory with a recorded align stage");
  }
  check_ablation_configs(*base.align_config, *joint.align_config);
  const AblationResult result = compare_reports(base.report, joint.report);
  std::ofstream(dir / "ablation.json") << to_json(result).dump(2) << "\n";
  out << render_run_report(dir);
  return kExitOk;
}

int cmd_report(const std::string& run, std::ostream& out) {
  out << render_run_report(run);
  return kExitOk;
}

int cmd_chat(const ChatArgs& a, std::istream& in, std::ostream& out, std::ostream& err) {
  std::optional<TrainState> state;
  std::unique_ptr<Responder> responder;
  ChatTemplate tmpl;
  HistoryMode mode = HistoryMode::full;
  if (!a.stub.empty()) {
    std::ifstream f(a.stub);
    if (!f) throw IoError("cannot read " + a.stub);
    const json j = json::parse(f);
    responder = std::make_unique<StubResponder>(tmpl, j.get<std::map<std::string, std::string>>());
  } else {
    state.emplace(load_checkpoint(resolve_checkpoint(a.checkpoint)));
    tmpl = state->model.config().chat;
    mode = state->model.config().history_mode;
    responder = std::make_unique<AssistantResponder>(state->model, DecodingConfig{});
  }
  if (!a.history.empty()) mode = history_mode_from_string(a.history);

  std::optional<Visual> visual;
  if (!a.visual.empty()) {
    try {
      visual.emplace(load_visual(a.visual));
    } catch (const Error& e) {
      err << "could not decode visual " << a.visual << ": " << e.what()
          << "; continuing without it\n";
    }
  }
  ChatSession session(*responder, visual ? &*visual : nullptr, tmpl, mode);
  ChatLoopOptions options;
  options.show_prompt = a.show_prompt;
  run_chat(in, out, session, options);
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"surgvl: surgical visual instruction tuning toolkit", "surgvl"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate-data", "Generate instruction data from captions");
  g->add_option("--captions", gen.captions, "Captions JSONL")->required()->check(CLI::ExistingFile);
  g->add_option("--tasks", gen.tasks, "Task kinds: conv, detail, reason")->delimiter(',');
  g->add_option("--backend", gen.backend, "mock or live")->check(CLI::IsMember({"mock", "live"}));
  g->add_option("--out", gen.out, "Output corpus JSONL")->required();
  g->add_option("--cache", gen.cache, "Response cache JSONL, read and updated");
  g->add_option("--concurrency", gen.concurrency, "Worker threads")->check(CLI::PositiveNumber);

  IngestArgs ing;
  auto* i = app.add_subcommand("ingest", "Load a VQA dataset or write the synthetic corpus");
  i->add_option("--dataset", ing.dataset, "cholec80, endovis18, psiava or synthetic")
      ->required()
      ->check(CLI::IsMember({"cholec80", "endovis18", "psiava", "synthetic"}));
  i->add_option("--root", ing.root, "Dataset root (real datasets)");
  i->add_option("--out", ing.out, "Output directory")->required();
  i->add_option("--config", ing.config, "Run config (synthetic sizes and seed)");
  i->add_option("--seed", ing.seed, "Override the config seed");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Run one training stage");
  t->add_option("--config", tr.config, "Run config file")->check(CLI::ExistingFile);
  t->add_option("--stage", tr.stage, "align or instruct")
      ->required()
      ->check(CLI::IsMember({"align", "instruct", "1", "2"}));
  t->add_option("--data", tr.data, "Workspace directory")->required();
  t->add_option("--instructions", tr.instructions, "Instruction corpus JSONL");
  t->add_option("--out", tr.out, "Run directory")->required();
  t->add_option("--init", tr.init, "Checkpoint or run directory to start from");
  t->add_option("--seed", tr.seed, "Override the config seed");

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Judge responses and score VQA accuracy");
  e->add_option("--checkpoint", ev.checkpoint, "Checkpoint or run directory")->required();
  e->add_option("--dataset", ev.dataset, "synthetic, cholec80, endovis18 or psiava")
      ->check(CLI::IsMember({"cholec80", "endovis18", "psiava", "synthetic"}));
  e->add_option("--data", ev.data, "Workspace (synthetic) or dataset root")->required();
  e->add_option("--workspace", ev.workspace, "Workspace providing judged conversations");
  e->add_option("--instructions", ev.instructions, "Instruction corpus JSONL to judge on");
  e->add_option("--judge", ev.judge, "mock or live")->check(CLI::IsMember({"mock", "live"}));
  e->add_option("--dims", ev.dims, "Dimensions: conv, detail, reason")->delimiter(',');
  e->add_option("--split", ev.split, "train, test or all (real datasets)")
      ->check(CLI::IsMember({"train", "test", "all"}));
  e->add_option("--out", ev.out, "Output directory")->required();
  e->add_option("--name", ev.name, "Row label in reports");
  e->add_option("--baseline", ev.baseline, "Video-only arm for the joint-training comparison");
  e->add_option("--max-new-tokens", ev.max_new_tokens, "Decoding cap")
      ->check(CLI::PositiveNumber);
  e->add_option("--judge-concurrency", ev.judge_concurrency, "Parallel judge calls")
      ->check(CLI::PositiveNumber);

  std::string report_run;
  auto* r = app.add_subcommand("report", "Render stored reports as tables");
  r->add_option("--run", report_run, "Evaluation output directory")->required();

  ChatArgs ch;
  auto* c = app.add_subcommand("chat", "Multi-turn chat about one image or video on stdin");
  auto* ck = c->add_option("--checkpoint", ch.checkpoint, "Checkpoint or run directory");
  auto* st = c->add_option("--stub", ch.stub, "JSON question-to-answer table instead of a model");
  ck->excludes(st);
  c->add_option("--visual", ch.visual, "Image .ppm or directory of frames");
  c->add_option("--history", ch.history, "full or previous_only")
      ->check(CLI::IsMember({"full", "previous_only"}));
  c->add_flag("--show-prompt", ch.show_prompt, "Print each rendered prompt");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
    if (c->parsed() && ch.checkpoint.empty() && ch.stub.empty()) {
      throw CLI::RequiredError("--checkpoint or --stub");
    }
  } catch (const CLI::CallForHelp& help) {
    return app.exit(help, out, err);
  } catch (const CLI::ParseError& pe) {
    err << "error: " << pe.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    if (g->parsed()) return cmd_generate(gen, out);
    if (i->parsed()) return cmd_ingest(ing, out, err);
    if (t->parsed()) return cmd_train(tr, out);
    if (e->parsed()) return cmd_evaluate(ev, out);
    if (r->parsed()) return cmd_report(report_run, out);
    if (c->parsed()) return cmd_chat(ch, in, out, err);
  } catch (const ConfigError& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitFailure;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace surgvl::cli
