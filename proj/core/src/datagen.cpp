// Copyright 2026 The surgvl Authors
// SPDX-License-Identifier: Apache-2.0

#include "surgvl/datagen.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "surgvl/errors.hpp"
#include "surgvl/hash.hpp"

namespace surgvl {

using nlohmann::json;

std::string to_string(SourceDataset d) {
  switch (d) {
    case SourceDataset::cholec80: return "cholec80";
    case SourceDataset::endovis18: return "endovis18";
    case SourceDataset::psiava: return "psiava";
    case SourceDataset::synthetic: return "synthetic";
  }
  return "synthetic";
}

SourceDataset source_dataset_from_string(const std::string& s) {
  if (s == "cholec80") return SourceDataset::cholec80;
  if (s == "endovis18") return SourceDataset::endovis18;
  if (s == "psiava") return SourceDataset::psiava;
  if (s == "synthetic") return SourceDataset::synthetic;
  throw InvalidInputError("unknown dataset '" + s + "'");
}

std::string_view prompt_instruction(TaskKind kind) {
  switch (kind) {
    case TaskKind::complex_reasoning:
      return "Based on the following description, generate questions and answers that "
             "require complex reasoning to understand the scene.";
    case TaskKind::detail_description:
      return "Based on the following description, generate a detailed description of the "
             "scene.";
    case TaskKind::conversation:
      return "Based on the following description, generate a question and answer that a "
             "human might ask about the scene.";
  }
  throw InvalidInputError("unknown task kind");
}

std::string render_prompt(const std::string& caption, TaskKind kind) {
  if (caption.empty()) throw InvalidInputError("caption is empty");
  std::string out = caption;
  out += '\n';
  out += prompt_instruction(kind);
  return out;
}

std::string prompt_hash(const std::string& prompt) { return sha256_hex(prompt); }

std::optional<std::pair<std::string, TaskKind>> parse_prompt(const std::string& prompt) {
  for (TaskKind k : kAllTaskKinds) {
    const std::string suffix = "\n" + std::string(prompt_instruction(k));
    if (prompt.size() > suffix.size() &&
        prompt.compare(prompt.size() - suffix.size(), suffix.size(), suffix) == 0) {
      return std::make_pair(prompt.substr(0, prompt.size() - suffix.size()), k);
    }
  }
  return std::nullopt;
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

void append_text(std::string& field, const std::string& text) {
  if (text.empty()) return;
  if (!field.empty()) field += ' ';
  field += text;
}

std::string collapse_lines(const std::string& raw) {
  std::istringstream in(raw);
  std::string line;
  std::string out;
  while (std::getline(in, line)) append_text(out, trim(line));
  return out;
}

}  // namespace

std::vector<Round> parse_generation(const std::string& raw, TaskKind kind) {
  if (trim(raw).empty()) throw ParseError("backend output is empty", raw);

  std::vector<Round> rounds;
  std::optional<Round> cur;
  bool in_answer = false;
  auto flush = [&]() {
    if (cur && !cur->query.empty() && !cur->answer.empty()) rounds.push_back(*cur);
    cur.reset();
    in_answer = false;
  };

  std::istringstream in(raw);
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t.rfind("Q:", 0) == 0) {
      flush();
      cur = Round{trim(t.substr(2)), {}};
    } else if (t.rfind("A:", 0) == 0) {
      if (!cur || in_answer) {
        // An answer without an open question is ignored.
        flush();
        continue;
      }
      in_answer = true;
      cur->answer = trim(t.substr(2));
    } else if (cur) {
      append_text(in_answer ? cur->answer : cur->query, t);
    }
  }
  flush();

  if (kind == TaskKind::detail_description) {
    std::string answer;
    if (rounds.empty()) {
      answer = collapse_lines(raw);
    } else {
      for (const Round& r : rounds) append_text(answer, r.answer);
    }
    return {Round{std::string(kDetailQuery), answer}};
  }
  if (rounds.empty()) throw ParseError("no Q:/A: pair in backend output", raw);
  if (rounds.size() > kMaxGeneratedRounds) rounds.resize(kMaxGeneratedRounds);
  return rounds;
}

ConversationRecord GeneratedInstruction::conversation() const {
  return ConversationRecord{sample_id, rounds, task_kind};
}

json to_json(const GeneratedInstruction& r) {
  json rounds = json::array();
  for (const Round& round : r.rounds) rounds.push_back({{"q", round.query}, {"a", round.answer}});
  return {{"sample_id", r.sample_id},       {"dataset", to_string(r.dataset)},
          {"modality", to_string(r.modality)}, {"task_kind", to_string(r.task_kind)},
          {"rounds", rounds},               {"generator", r.generator},
          {"prompt_hash", r.prompt_hash}};
}

GeneratedInstruction generated_instruction_from_json(const json& j) {
  static const std::set<std::string> kKeys = {"sample_id", "dataset",   "modality",
                                              "task_kind", "rounds",    "generator",
                                              "prompt_hash"};
  const std::string raw = j.dump();
  if (!j.is_object()) throw ParseError("record is not a JSON object", raw);
  for (const auto& [key, value] : j.items()) {
    if (!kKeys.count(key)) throw ParseError("unexpected key '" + key + "'", raw);
  }
  for (const std::string& key : kKeys) {
    if (!j.contains(key)) throw ParseError("missing key '" + key + "'", raw);
  }
  auto str = [&](const char* key) {
    if (!j.at(key).is_string()) throw ParseError(std::string(key) + " must be a string", raw);
    return j.at(key).get<std::string>();
  };
  GeneratedInstruction r;
  try {
    r.sample_id = str("sample_id");
    r.dataset = source_dataset_from_string(str("dataset"));
    r.modality = modality_from_string(str("modality"));
    r.task_kind = task_kind_from_string(str("task_kind"));
  } catch (const InvalidInputError& e) {
    throw ParseError(e.what(), raw);
  }
  r.generator = str("generator");
  r.prompt_hash = str("prompt_hash");
  if (r.sample_id.empty()) throw ParseError("sample_id is empty", raw);
  const json& rounds = j.at("rounds");
  if (!rounds.is_array() || rounds.empty()) throw ParseError("rounds must be a nonempty array", raw);
  for (const json& round : rounds) {
    if (!round.is_object() || round.size() != 2 || !round.contains("q") ||
        !round.contains("a") || !round.at("q").is_string() || !round.at("a").is_string()) {
      throw ParseError("round must be {\"q\": string, \"a\": string}", raw);
    }
    Round rd{round.at("q").get<std::string>(), round.at("a").get<std::string>()};
    if (rd.query.empty() || rd.answer.empty()) throw ParseError("empty query or answer", raw);
    r.rounds.push_back(std::move(rd));
  }
  return r;
}

json CorpusStats::to_json() const {
  json tasks = json::object();
  for (const auto& [k, v] : per_task) tasks[to_string(k)] = v;
  json datasets = json::object();
  for (const auto& [k, v] : per_dataset) datasets[to_string(k)] = v;
  return {{"records", records},
          {"per_task", tasks},
          {"per_dataset", datasets},
          {"parse_failures", parse_failures},
          {"duplicate_outputs", duplicate_outputs},
          {"duplicate_pairs", duplicate_pairs}};
}

CorpusBuild build_corpus(std::span<const SourceCaption> captions, const BuildOptions& options,
                         LlmClient& client) {
  if (captions.empty()) throw InvalidInputError("no captions to generate from");
  if (options.tasks.empty()) throw InvalidInputError("no task kinds requested");
  std::set<std::string> ids;
  for (const SourceCaption& c : captions) {
    if (c.caption.empty()) throw InvalidInputError("caption for '" + c.sample_id + "' is empty");
    if (!ids.insert(c.sample_id).second) {
      throw InvalidInputError("duplicate sample_id '" + c.sample_id + "'");
    }
  }

  const std::size_t jobs = captions.size() * options.tasks.size();
  std::vector<std::string> prompts(jobs);
  std::vector<std::string> outputs(jobs);
  for (std::size_t i = 0; i < jobs; ++i) {
    prompts[i] = render_prompt(captions[i / options.tasks.size()].caption,
                               options.tasks[i % options.tasks.size()]);
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs) return;
      try {
        outputs[i] = client.call(prompts[i]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next.store(jobs);
        return;
      }
    }
  };
  const std::size_t workers =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::max(1, options.concurrency)), 1, jobs);
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  CorpusBuild out;
  std::set<std::pair<std::string, std::string>> seen_outputs;
  std::set<std::pair<std::string, std::string>> seen_pairs;
  const std::string generator = client.generator();
  for (std::size_t i = 0; i < jobs; ++i) {
    const SourceCaption& cap = captions[i / options.tasks.size()];
    const TaskKind kind = options.tasks[i % options.tasks.size()];
    const std::string hash = prompt_hash(prompts[i]);
    if (!seen_outputs.emplace(hash, outputs[i]).second) {
      ++out.stats.duplicate_outputs;
      continue;
    }
    std::vector<Round> rounds;
    try {
      rounds = parse_generation(outputs[i], kind);
    } catch (const ParseError& e) {
      ++out.stats.parse_failures;
      spdlog::warn("dropping output for {} ({}): {}", cap.sample_id, to_string(kind), e.what());
      continue;
    }
    GeneratedInstruction rec;
    rec.sample_id = cap.sample_id;
    rec.dataset = cap.dataset;
    rec.modality = cap.modality;
    rec.task_kind = kind;
    rec.generator = generator;
    rec.prompt_hash = hash;
    for (Round& r : rounds) {
      if (!seen_pairs.emplace(r.query, r.answer).second) {
        ++out.stats.duplicate_pairs;
        continue;
      }
      rec.rounds.push_back(std::move(r));
    }
    if (rec.rounds.empty()) continue;
    ++out.stats.per_task[kind];
    ++out.stats.per_dataset[cap.dataset];
    ++out.stats.records;
    out.records.push_back(std::move(rec));
  }
  if (out.records.empty()) {
    throw InsufficientDataError("no instruction records survived parsing and dedup");
  }
  return out;
}

std::string corpus_jsonl(std::span<const GeneratedInstruction> records) {
  std::string out;
  for (const GeneratedInstruction& r : records) {
    out += to_json(r).dump();
    out += '\n';
  }
  return out;
}

void write_corpus(const std::filesystem::path& path,
                  std::span<const GeneratedInstruction> records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << corpus_jsonl(records);
  if (!out) throw IoError("cannot write " + path.string());
}

namespace {

template <typename F>
void for_each_jsonl(const std::filesystem::path& path, F&& f) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(fmt::format("{}:{}: {}", path.string(), lineno, e.what()), line);
    }
    f(j, lineno);
  }
}

}  // namespace

std::vector<GeneratedInstruction> read_corpus(const std::filesystem::path& path) {
  std::vector<GeneratedInstruction> out;
  for_each_jsonl(path, [&](const json& j, long) {
    out.push_back(generated_instruction_from_json(j));
  });
  return out;
}

std::vector<SourceCaption> read_captions(const std::filesystem::path& path) {
  std::vector<SourceCaption> out;
  for_each_jsonl(path, [&](const json& j, long lineno) {
    try {
      SourceCaption c;
      c.sample_id = j.at("sample_id").get<std::string>();
      c.caption = j.at("caption").get<std::string>();
      c.dataset = source_dataset_from_string(j.value("dataset", std::string("synthetic")));
      c.modality = modality_from_string(j.value("modality", std::string("image")));
      out.push_back(std::move(c));
    } catch (const json::exception& e) {
      throw ParseError(fmt::format("{}:{}: {}", path.string(), lineno, e.what()), j.dump());
    }
  });
  return out;
}

void write_captions(const std::filesystem::path& path, std::span<const SourceCaption> captions) {
  std::ofstream out(path, std::ios::trunc);
  for (const SourceCaption& c : captions) {
    out << json{{"sample_id", c.sample_id},
                {"caption", c.caption},
                {"dataset", to_string(c.dataset)},
                {"modality", to_string(c.modality)}}
               .dump()
        << '\n';
  }
  if (!out) throw IoError("cannot write " + path.string());
}

}  // namespace surgvl
