// Copyright 2026 The surgvl Authors
// SPDX-License-Identifier: Apache-2.0

#include "surgvl/pipeline.hpp"

#include <fstream>

#include "surgvl/checkpoint.hpp"
#include "surgvl/errors.hpp"

namespace surgvl {

namespace fs = std::filesystem;

std::vector<std::string> tokenizer_texts(const TrainingCorpus& corpus,
                                         std::span<const VQARecord> vqa) {
  std::vector<std::string> out;
  for (const AlignmentSample& s : corpus.alignment) out.push_back(s.caption);
  for (const InstructionSample& s : corpus.instructions) {
    for (const Round& r : s.record.rounds) {
      out.push_back(r.query);
      out.push_back(r.answer);
    }
  }
  for (const VQARecord& r : vqa) {
    out.push_back(r.question);
    out.push_back(r.answer);
  }
  return out;
}

Assistant build_assistant(const RunConfig& config, std::span<const std::string> texts) {
  auto tok = std::make_unique<WordTokenizer>(
      WordTokenizer::build(texts, config.model.chat.reserved_tokens(), config.tokenizer_max_words));
  return Assistant(config.model, std::move(tok));
}

nlohmann::json run_metadata(const RunConfig& config, const std::string& subcommand) {
  return {
      {"subcommand", subcommand},
      {"surgvl_version", kSurgvlVersion},
      {"seeds",
       {{"run", config.seed},
        {"align", config.align.seed},
        {"instruct", config.instruct.seed},
        {"encoder", config.model.encoder.seed},
        {"projection", config.model.projection_seed},
        {"language_model", config.model.lm.seed}}},
      {"components",
       {{"frame_encoder", config.model.encoder_kind},
        {"language_model", "toy_transformer"},
        {"tokenizer", "word_bytes"},
        {"checkpoint_format", kCheckpointFormatVersion},
        {"corpus_schema", kCorpusSchemaVersion},
        {"judge_prompt", kJudgePromptVersion}}},
  };
}

void write_run_files(const fs::path& dir, const RunConfig& config, const std::string& subcommand,
                     const nlohmann::json& extra) {
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "effective.cfg");
    out << effective_config(config);
    if (!out) throw IoError("cannot write " + (dir / "effective.cfg").string());
  }
  nlohmann::json meta = run_metadata(config, subcommand);
  const fs::path run_json = dir / "run.json";
  if (fs::exists(run_json)) {
    std::ifstream in(run_json);
    const auto old = nlohmann::json::parse(in, nullptr, false);
    if (!old.is_discarded() && old.contains("stages")) meta["stages"] = old["stages"];
  }
  if (extra.is_object()) {
    for (const auto& [k, v] : extra.items()) {
      if (k == "stages" && meta.contains("stages")) {
        for (const auto& [sk, sv] : v.items()) meta["stages"][sk] = sv;
      } else {
        meta[k] = v;
      }
    }
  }
  std::ofstream out(run_json);
  out << meta.dump(2) << "\n";
  if (!out) throw IoError("cannot write " + run_json.string());
}

fs::path resolve_checkpoint(const fs::path& path) {
  if (fs::exists(path / "manifest.json")) return path;
  for (const char* stage : {"instruct", "align"}) {
    if (auto latest = latest_checkpoint(path / stage)) return *latest;
  }
  if (auto latest = latest_checkpoint(path)) return *latest;
  throw CheckpointError("no checkpoint under " + path.string(), "manifest");
}

std::map<std::string, std::string> answer_vqa(std::span<const VQARecord> records,
                                              Responder& responder, const ChatTemplate& tmpl,
                                              const fs::path& dataset_root) {
  std::map<std::string, Visual> visuals;
  std::map<std::string, std::string> out;
  for (const VQARecord& r : records) {
    auto it = visuals.find(r.visual_path);
    if (it == visuals.end()) {
      it = visuals.emplace(r.visual_path, load_visual(dataset_root / r.visual_path)).first;
    }
    out[r.sample_id] = generate_response(responder, &it->second, r.question, tmpl).text;
  }
  return out;
}

void write_jsonl(const fs::path& path, const std::vector<nlohmann::json>& rows) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  for (const auto& row : rows) out << row.dump() << "\n";
  if (!out) throw IoError("cannot write " + path.string());
}

}  // namespace surgvl
