// Copyright 2026 The surgvl Authors
// SPDX-License-Identifier: Apache-2.0

#include "surgvl/run_config.hpp"

#include <fstream>
#include <functional>
#include <set>
#include <istream>
#include <sstream>

#include <fmt/format.h>

#include "surgvl/errors.hpp"
#include "surgvl/rng.hpp"

namespace surgvl {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

long parse_long(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  long out = 0;
  try {
    out = std::stol(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != v.size() || v.empty()) throw ConfigError(key + " expects an integer, got '" + v + "'");
  return out;
}

int parse_int(const std::string& key, const std::string& v) {
  return static_cast<int>(parse_long(key, v));
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  std::uint64_t out = 0;
  try {
    out = std::stoull(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != v.size() || v.empty() || v[0] == '-') {
    throw ConfigError(key + " expects a non-negative integer, got '" + v + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double out = 0;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != v.size() || v.empty()) throw ConfigError(key + " expects a number, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + " expects true or false, got '" + v + "'");
}

std::string fmt_double(double v) { return fmt::format("{}", v); }

std::set<ModelPart> parse_parts(const std::string& key, const std::string& v) {
  std::set<ModelPart> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      out.insert(model_part_from_string(item));
    } catch (const Error& e) {
      throw ConfigError(key + ": " + e.what());
    }
  }
  if (out.empty()) throw ConfigError(key + " lists no model parts");
  return out;
}

std::string parts_string(const std::set<ModelPart>& parts) {
  std::string out;
  for (ModelPart p : parts) out += (out.empty() ? "" : ",") + to_string(p);
  return out;
}

struct Key {
  std::function<void(RunConfig&, const std::string& key, const std::string& value)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename E>
E enum_value(const std::string& key, const std::string& v, E (*from)(const std::string&)) {
  try {
    return from(v);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

VisualPlacement placement_from_string(const std::string& s) {
  if (s == "before_first_query") return VisualPlacement::before_first_query;
  if (s == "after_first_query") return VisualPlacement::after_first_query;
  throw ConfigError("unknown placement '" + s + "'");
}

std::string to_string(VisualPlacement p) {
  return p == VisualPlacement::before_first_query ? "before_first_query" : "after_first_query";
}

void add_stage_keys(std::map<std::string, Key>& keys, const std::string& prefix,
                    StageConfig RunConfig::*member, bool RunConfig::*seed_set) {
  auto stage = [member](RunConfig& c) -> StageConfig& { return c.*member; };
  auto cstage = [member](const RunConfig& c) -> const StageConfig& { return c.*member; };
  keys[prefix + ".lr"] = {
      [=](RunConfig& c, auto& k, auto& v) { stage(c).learning_rate = parse_double(k, v); },
      [=](const RunConfig& c) { return fmt_double(cstage(c).learning_rate); }};
  keys[prefix + ".lr_schedule"] = {
      [=](RunConfig& c, auto& k, auto& v) {
        stage(c).lr_schedule = enum_value(k, v, &lr_schedule_from_string);
      },
      [=](const RunConfig& c) { return to_string(cstage(c).lr_schedule); }};
  keys[prefix + ".epochs"] = {
      [=](RunConfig& c, auto& k, auto& v) { stage(c).epochs = parse_int(k, v); },
      [=](const RunConfig& c) { return std::to_string(cstage(c).epochs); }};
  keys[prefix + ".batch_size"] = {
      [=](RunConfig& c, auto& k, auto& v) { stage(c).batch_size = parse_int(k, v); },
      [=](const RunConfig& c) { return std::to_string(cstage(c).batch_size); }};
  keys[prefix + ".seed"] = {
      [=](RunConfig& c, auto& k, auto& v) {
        stage(c).seed = parse_u64(k, v);
        c.*seed_set = true;
      },
      [=](const RunConfig& c) { return std::to_string(cstage(c).seed); }};
  keys[prefix + ".trainable"] = {
      [=](RunConfig& c, auto& k, auto& v) { stage(c).trainable_parts = parse_parts(k, v); },
      [=](const RunConfig& c) { return parts_string(cstage(c).trainable_parts); }};
  keys[prefix + ".grad_clip"] = {
      [=](RunConfig& c, auto& k, auto& v) { stage(c).grad_clip_norm = parse_double(k, v); },
      [=](const RunConfig& c) { return fmt_double(cstage(c).grad_clip_norm); }};
  keys[prefix + ".temperature"] = {
      [=](RunConfig& c, auto& k, auto& v) { stage(c).temperature = parse_double(k, v); },
      [=](const RunConfig& c) { return fmt_double(cstage(c).temperature); }};
  keys[prefix + ".symmetric_loss"] = {
      [=](RunConfig& c, auto& k, auto& v) { stage(c).symmetric_loss = parse_bool(k, v); },
      [=](const RunConfig& c) { return std::string(cstage(c).symmetric_loss ? "true" : "false"); }};
  keys[prefix + ".modality_mix"] = {
      [=](RunConfig& c, auto& k, auto& v) {
        stage(c).modality_mix = enum_value(k, v, &modality_mix_from_string);
      },
      [=](const RunConfig& c) { return to_string(cstage(c).modality_mix); }};
  keys[prefix + ".precision"] = {
      [=](RunConfig& c, auto& k, auto& v) {
        stage(c).precision = enum_value(k, v, &precision_from_string);
      },
      [=](const RunConfig& c) { return to_string(cstage(c).precision); }};
}

const std::map<std::string, Key>& key_table() {
  static const std::map<std::string, Key> table = [] {
    std::map<std::string, Key> k;
    auto int_field = [](auto getter) {
      return Key{[getter](RunConfig& c, auto& key, auto& v) { getter(c) = parse_int(key, v); },
                 [getter](const RunConfig& c) {
                   return std::to_string(getter(const_cast<RunConfig&>(c)));
                 }};
    };
    auto u64_field = [](auto getter) {
      return Key{[getter](RunConfig& c, auto& key, auto& v) { getter(c) = parse_u64(key, v); },
                 [getter](const RunConfig& c) {
                   return std::to_string(getter(const_cast<RunConfig&>(c)));
                 }};
    };
    k["seed"] = u64_field([](RunConfig& c) -> std::uint64_t& { return c.seed; });
    k["model.encoder_kind"] = {
        [](RunConfig& c, auto&, auto& v) { c.model.encoder_kind = v; },
        [](const RunConfig& c) { return c.model.encoder_kind; }};
    k["model.patch_grid"] = int_field([](RunConfig& c) -> int& { return c.model.encoder.patch_grid; });
    k["model.embed_dim"] = int_field([](RunConfig& c) -> int& { return c.model.encoder.embed_dim; });
    k["model.image_height"] =
        int_field([](RunConfig& c) -> int& { return c.model.encoder.image_height; });
    k["model.image_width"] =
        int_field([](RunConfig& c) -> int& { return c.model.encoder.image_width; });
    k["model.encoder_seed"] =
        u64_field([](RunConfig& c) -> std::uint64_t& { return c.model.encoder.seed; });
    k["model.projection_seed"] =
        u64_field([](RunConfig& c) -> std::uint64_t& { return c.model.projection_seed; });
    k["model.lm_width"] = int_field([](RunConfig& c) -> int& { return c.model.lm.width; });
    k["model.lm_layers"] = int_field([](RunConfig& c) -> int& { return c.model.lm.layers; });
    k["model.lm_heads"] = int_field([](RunConfig& c) -> int& { return c.model.lm.heads; });
    k["model.lm_mlp_hidden"] = int_field([](RunConfig& c) -> int& { return c.model.lm.mlp_hidden; });
    k["model.lm_max_positions"] =
        int_field([](RunConfig& c) -> int& { return c.model.lm.max_positions; });
    k["model.lm_seed"] = u64_field([](RunConfig& c) -> std::uint64_t& { return c.model.lm.seed; });
    k["model.lm_init_std"] = {
        [](RunConfig& c, auto& key, auto& v) { c.model.lm.init_std = parse_double(key, v); },
        [](const RunConfig& c) { return fmt_double(c.model.lm.init_std); }};
    k["model.concat_order"] = {
        [](RunConfig& c, auto& key, auto& v) {
          c.model.visual.concat_order = enum_value(key, v, &concat_order_from_string);
        },
        [](const RunConfig& c) { return to_string(c.model.visual.concat_order); }};
    k["model.max_frames"] = int_field([](RunConfig& c) -> int& { return c.model.visual.max_frames; });
    k["model.text_pooling"] = {
        [](RunConfig& c, auto& key, auto& v) {
          c.model.text_pooling = enum_value(key, v, &text_pooling_from_string);
        },
        [](const RunConfig& c) { return to_string(c.model.text_pooling); }};
    k["model.history_mode"] = {
        [](RunConfig& c, auto& key, auto& v) {
          c.model.history_mode = enum_value(key, v, &history_mode_from_string);
        },
        [](const RunConfig& c) { return to_string(c.model.history_mode); }};
    k["model.system_prompt"] = {
        [](RunConfig& c, auto&, auto& v) { c.model.chat.system_prompt = v; },
        [](const RunConfig& c) { return c.model.chat.system_prompt; }};
    k["model.visual_placement"] = {
        [](RunConfig& c, auto&, auto& v) { c.model.chat.placement = placement_from_string(v); },
        [](const RunConfig& c) { return to_string(c.model.chat.placement); }};
    add_stage_keys(k, "align", &RunConfig::align, &RunConfig::align_seed_set);
    add_stage_keys(k, "instruct", &RunConfig::instruct, &RunConfig::instruct_seed_set);
    k["synthetic.videos"] = int_field([](RunConfig& c) -> int& { return c.synthetic.videos; });
    k["synthetic.frames"] = int_field([](RunConfig& c) -> int& { return c.synthetic.frames; });
    k["synthetic.images"] = int_field([](RunConfig& c) -> int& { return c.synthetic.images; });
    k["tokenizer.max_words"] = {
        [](RunConfig& c, auto& key, auto& v) {
          c.tokenizer_max_words = static_cast<std::size_t>(parse_u64(key, v));
        },
        [](const RunConfig& c) { return std::to_string(c.tokenizer_max_words); }};
    k["decode.max_new_tokens"] = int_field([](RunConfig& c) -> int& { return c.max_new_tokens; });
    return k;
  }();
  return table;
}

}  // namespace

KeyValues parse_key_values(std::istream& in, const std::string& source) {
  KeyValues out;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    const std::string t = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(fmt::format("{}:{}: expected key = value", source, lineno));
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) throw ConfigError(fmt::format("{}:{}: empty key", source, lineno));
    if (!out.emplace(key, value).second) {
      throw ConfigError(fmt::format("{}:{}: duplicate key '{}'", source, lineno, key));
    }
  }
  return out;
}

KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  return parse_key_values(in, path.string());
}

RunConfig apply_key_values(const KeyValues& kv, RunConfig base) {
  const auto& table = key_table();
  for (const auto& [key, value] : kv) {
    const auto it = table.find(key);
    if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second.set(base, key, value);
  }
  if (!base.align_seed_set) base.align.seed = derive_seed(base.seed, 1);
  if (!base.instruct_seed_set) base.instruct.seed = derive_seed(base.seed, 2);
  base.synthetic.height = base.model.encoder.image_height;
  base.synthetic.width = base.model.encoder.image_width;
  validate(base.align);
  validate(base.instruct);
  if (base.align.stage != Stage::align || base.instruct.stage != Stage::instruct) {
    throw ConfigError("stage sections are fixed");
  }
  return base;
}

std::string effective_config(const RunConfig& config) {
  std::string out;
  for (const auto& [key, k] : key_table()) out += key + " = " + k.get(config) + "\n";
  return out;
}

std::vector<std::string> known_config_keys() {
  std::vector<std::string> out;
  for (const auto& [key, k] : key_table()) out.push_back(key);
  return out;
}

}  // namespace surgvl
