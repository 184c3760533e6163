// Copyright 2026 The surgvl Authors
// SPDX-License-Identifier: Apache-2.0

#include "surgvl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "surgvl/errors.hpp"
#include "surgvl/half.hpp"
#include "surgvl/hash.hpp"
#include "surgvl/rng.hpp"

namespace surgvl {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are written in host order");

json to_json(const AssistantConfig& c) {
  return {
      {"encoder_kind", c.encoder_kind},
      {"encoder",
       {{"patch_grid", c.encoder.patch_grid},
        {"embed_dim", c.encoder.embed_dim},
        {"image_height", c.encoder.image_height},
        {"image_width", c.encoder.image_width},
        {"channels", c.encoder.channels},
        {"seed", c.encoder.seed}}},
      {"projection_seed", c.projection_seed},
      {"lm",
       {{"vocab_size", c.lm.vocab_size},
        {"width", c.lm.width},
        {"layers", c.lm.layers},
        {"heads", c.lm.heads},
        {"mlp_hidden", c.lm.mlp_hidden},
        {"max_positions", c.lm.max_positions},
        {"seed", c.lm.seed},
        {"init_std", c.lm.init_std}}},
      {"visual",
       {{"concat_order", to_string(c.visual.concat_order)},
        {"max_frames", c.visual.max_frames}}},
      {"text_pooling", to_string(c.text_pooling)},
      {"chat",
       {{"system_prompt", c.chat.system_prompt},
        {"user_marker", c.chat.user_marker},
        {"assistant_marker", c.chat.assistant_marker},
        {"visual_placeholder", c.chat.visual_placeholder},
        {"end_of_turn", c.chat.end_of_turn},
        {"placement", c.chat.placement == VisualPlacement::before_first_query
                          ? "before_first_query"
                          : "after_first_query"}}},
      {"history_mode", to_string(c.history_mode)},
  };
}

AssistantConfig assistant_config_from_json(const json& j) {
  AssistantConfig c;
  c.encoder_kind = j.at("encoder_kind").get<std::string>();
  const json& e = j.at("encoder");
  c.encoder.patch_grid = e.at("patch_grid").get<int>();
  c.encoder.embed_dim = e.at("embed_dim").get<int>();
  c.encoder.image_height = e.at("image_height").get<int>();
  c.encoder.image_width = e.at("image_width").get<int>();
  c.encoder.channels = e.at("channels").get<int>();
  c.encoder.seed = e.at("seed").get<std::uint64_t>();
  c.projection_seed = j.at("projection_seed").get<std::uint64_t>();
  const json& l = j.at("lm");
  c.lm.vocab_size = l.at("vocab_size").get<int>();
  c.lm.width = l.at("width").get<int>();
  c.lm.layers = l.at("layers").get<int>();
  c.lm.heads = l.at("heads").get<int>();
  c.lm.mlp_hidden = l.at("mlp_hidden").get<int>();
  c.lm.max_positions = l.at("max_positions").get<int>();
  c.lm.seed = l.at("seed").get<std::uint64_t>();
  c.lm.init_std = l.at("init_std").get<double>();
  const json& v = j.at("visual");
  c.visual.concat_order = concat_order_from_string(v.at("concat_order").get<std::string>());
  c.visual.max_frames = v.at("max_frames").get<int>();
  c.text_pooling = text_pooling_from_string(j.at("text_pooling").get<std::string>());
  const json& t = j.at("chat");
  c.chat.system_prompt = t.at("system_prompt").get<std::string>();
  c.chat.user_marker = t.at("user_marker").get<std::string>();
  c.chat.assistant_marker = t.at("assistant_marker").get<std::string>();
  c.chat.visual_placeholder = t.at("visual_placeholder").get<std::string>();
  c.chat.end_of_turn = t.at("end_of_turn").get<std::string>();
  const std::string placement = t.at("placement").get<std::string>();
  if (placement == "before_first_query") {
    c.chat.placement = VisualPlacement::before_first_query;
  } else if (placement == "after_first_query") {
    c.chat.placement = VisualPlacement::after_first_query;
  } else {
    throw ConfigError("unknown visual placement '" + placement + "'");
  }
  c.history_mode = history_mode_from_string(j.at("history_mode").get<std::string>());
  return c;
}

json to_json(const StageConfig& c) {
  json parts = json::array();
  for (ModelPart p : c.trainable_parts) parts.push_back(to_string(p));
  return {{"stage", to_string(c.stage)},
          {"learning_rate", c.learning_rate},
          {"lr_schedule", to_string(c.lr_schedule)},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"seed", c.seed},
          {"precision", to_string(c.precision)},
          {"trainable_parts", parts},
          {"grad_clip_norm", c.grad_clip_norm},
          {"temperature", c.temperature},
          {"symmetric_loss", c.symmetric_loss},
          {"modality_mix", to_string(c.modality_mix)},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"adam_epsilon", c.adam_epsilon}};
}

StageConfig stage_config_from_json(const json& j) {
  StageConfig c = StageConfig::defaults(stage_from_string(j.at("stage").get<std::string>()));
  c.learning_rate = j.at("learning_rate").get<double>();
  c.lr_schedule = lr_schedule_from_string(j.value("lr_schedule", std::string("constant")));
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.precision = precision_from_string(j.at("precision").get<std::string>());
  c.trainable_parts.clear();
  for (const json& p : j.at("trainable_parts")) {
    c.trainable_parts.insert(model_part_from_string(p.get<std::string>()));
  }
  c.grad_clip_norm = j.at("grad_clip_norm").get<double>();
  c.temperature = j.at("temperature").get<double>();
  c.symmetric_loss = j.at("symmetric_loss").get<bool>();
  c.modality_mix = modality_mix_from_string(j.at("modality_mix").get<std::string>());
  c.adam_beta1 = j.at("adam_beta1").get<double>();
  c.adam_beta2 = j.at("adam_beta2").get<double>();
  c.adam_epsilon = j.at("adam_epsilon").get<double>();
  return c;
}

namespace {

std::string encode_blob(const Matrix& m, Precision precision) {
  const auto n = static_cast<std::size_t>(m.size());
  std::string out;
  // Row-major element order regardless of Eigen's storage order.
  if (precision == Precision::half) {
    out.resize(n * sizeof(std::uint16_t));
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c, ++k) {
        const std::uint16_t h = double_to_half(m(r, c));
        std::memcpy(out.data() + k * sizeof h, &h, sizeof h);
      }
    }
  } else {
    out.resize(n * sizeof(double));
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c, ++k) {
        const double d = m(r, c);
        std::memcpy(out.data() + k * sizeof d, &d, sizeof d);
      }
    }
  }
  return out;
}

Matrix decode_blob(const std::string& bytes, Eigen::Index rows, Eigen::Index cols,
                   const std::string& dtype) {
  Matrix m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c, ++k) {
      if (dtype == "f16") {
        std::uint16_t h = 0;
        std::memcpy(&h, bytes.data() + k * sizeof h, sizeof h);
        m(r, c) = half_to_double(h);
      } else {
        double d = 0.0;
        std::memcpy(&d, bytes.data() + k * sizeof d, sizeof d);
        m(r, c) = d;
      }
    }
  }
  return m;
}

std::size_t dtype_width(const std::string& dtype) {
  if (dtype == "f64") return sizeof(double);
  if (dtype == "f16") return sizeof(std::uint16_t);
  return 0;
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("cannot write " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string blob_name(const std::string& name, const char* suffix) {
  std::string out;
  for (char ch : name) out += (ch == '.' || ch == '/') ? '_' : ch;
  return out + suffix;
}

json history_json(const std::vector<MetricRow>& rows) {
  json arr = json::array();
  for (const MetricRow& r : rows) {
    arr.push_back({{"step", r.step},
                   {"stage", to_string(r.stage)},
                   {"loss", r.loss},
                   {"lr", r.lr},
                   {"wall_ms", r.wall_ms}});
  }
  return arr;
}

}  // namespace

fs::path epoch_checkpoint_dir(const fs::path& root, int epoch) {
  return root / fmt::format("epoch-{:03d}", epoch);
}

std::optional<fs::path> latest_checkpoint(const fs::path& root) {
  if (!fs::is_directory(root)) return std::nullopt;
  std::optional<fs::path> best;
  for (const auto& entry : fs::directory_iterator(root)) {
    const std::string name = entry.path().filename().string();
    if (!entry.is_directory() || name.rfind("epoch-", 0) != 0) continue;
    if (!fs::exists(entry.path() / "manifest.json")) continue;
    if (!best || name > best->filename().string()) best = entry.path();
  }
  return best;
}

void save_checkpoint(const TrainState& state, const fs::path& dir, Precision precision) {
  const fs::path parent = dir.parent_path().empty() ? fs::path(".") : dir.parent_path();
  fs::create_directories(parent);
  Rng rng(derive_seed(static_cast<std::uint64_t>(state.step),
                      std::hash<std::string>{}(dir.string())));
  const fs::path tmp =
      parent / fmt::format(".{}.tmp-{:016x}", dir.filename().string(), rng.next_u64());
  fs::remove_all(tmp);
  fs::create_directories(tmp);

  try {
    const Assistant& model = state.model;
    const std::string dtype = precision == Precision::half ? "f16" : "f64";
    json params = json::array();
    for (ModelPart part :
         {ModelPart::encoder, ModelPart::projection, ModelPart::language_model}) {
      for (const NamedParameter& p : model.parameters(part)) {
        const std::string file = blob_name(p.name, ".bin");
        const std::string bytes = encode_blob(p.var.value(), precision);
        write_file(tmp / file, bytes);
        params.push_back({{"name", p.name},
                          {"part", to_string(part)},
                          {"rows", p.var.rows()},
                          {"cols", p.var.cols()},
                          {"dtype", dtype},
                          {"file", file},
                          {"sha256", sha256_hex(bytes)}});
      }
    }
    json slots = json::array();
    for (const auto& [name, mo] : state.optimizer.moments()) {
      const std::string mfile = blob_name(name, ".adam_m.bin");
      const std::string vfile = blob_name(name, ".adam_v.bin");
      write_file(tmp / mfile, encode_blob(mo.m, Precision::full));
      write_file(tmp / vfile, encode_blob(mo.v, Precision::full));
      slots.push_back({{"name", name},
                       {"rows", mo.m.rows()},
                       {"cols", mo.m.cols()},
                       {"m_file", mfile},
                       {"v_file", vfile}});
    }
    json manifest = {
        {"format", "surgvl-checkpoint"},
        {"format_version", kCheckpointFormatVersion},
        {"step", state.step},
        {"stage", to_string(state.stage)},
        {"epochs_completed", state.epochs_completed},
        {"dtype", dtype},
        {"dtype_widening", {{"f16", "f64"}, {"f64", "f64"}}},
        {"model", to_json(model.config())},
        {"tokenizer",
         {{"kind", model.tokenizer().kind()},
          {"vocabulary", model.tokenizer().vocabulary()}}},
        {"parameters", params},
        {"optimizer", {{"kind", "adam"}, {"steps", state.optimizer.steps()}, {"slots", slots}}},
        {"history", history_json(state.history)},
    };
    write_file(tmp / "manifest.json", manifest.dump(2));

    if (fs::exists(dir)) {
      const fs::path old = parent / fmt::format(".{}.old-{:016x}", dir.filename().string(),
                                                rng.next_u64());
      fs::rename(dir, old);
      fs::rename(tmp, dir);
      fs::remove_all(old);
    } else {
      fs::rename(tmp, dir);
    }
  } catch (const fs::filesystem_error& e) {
    fs::remove_all(tmp);
    throw IoError(std::string("checkpoint write failed: ") + e.what());
  } catch (...) {
    fs::remove_all(tmp);
    throw;
  }
}

namespace {

const json& field(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) {
    throw CheckpointError("manifest is missing " + path, path);
  }
  return j.at(key);
}

template <typename T>
T field_as(const json& j, const std::string& key, const std::string& path) {
  try {
    return field(j, key, path).get<T>();
  } catch (const json::exception&) {
    throw CheckpointError("manifest field " + path + " has the wrong type", path);
  }
}

Matrix load_matrix(const fs::path& dir, const json& entry, const std::string& path,
                   const std::string& file_key, Eigen::Index rows, Eigen::Index cols,
                   const std::string& dtype) {
  const std::string file = field_as<std::string>(entry, file_key, path + "." + file_key);
  const fs::path blob = dir / file;
  if (!fs::exists(blob)) {
    throw CheckpointError("missing blob " + file, path + "." + file_key);
  }
  const std::string bytes = read_file(blob);
  const std::size_t expected = static_cast<std::size_t>(rows * cols) * dtype_width(dtype);
  if (bytes.size() != expected) {
    throw CheckpointError(fmt::format("blob {} has {} bytes, manifest implies {}", file,
                                      bytes.size(), expected),
                          path + "." + file_key);
  }
  if (entry.contains("sha256") &&
      entry.at("sha256").get<std::string>() != sha256_hex(bytes)) {
    throw CheckpointError("blob " + file + " does not match its digest", path + ".sha256");
  }
  return decode_blob(bytes, rows, cols, dtype);
}

}  // namespace

TrainState load_checkpoint(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) {
    throw CheckpointError("no manifest.json in " + dir.string(), "manifest");
  }
  json m;
  try {
    m = json::parse(read_file(manifest_path));
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("manifest is not valid JSON: ") + e.what(), "manifest");
  }
  const int version = field_as<int>(m, "format_version", "format_version");
  if (version != kCheckpointFormatVersion) {
    throw CheckpointError(fmt::format("unsupported checkpoint format version {}", version),
                          "format_version");
  }

  AssistantConfig config;
  try {
    config = assistant_config_from_json(field(m, "model", "model"));
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("bad model config: ") + e.what(), "model");
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("bad model config: ") + e.what(), "model");
  }
  const json& tok = field(m, "tokenizer", "tokenizer");
  if (field_as<std::string>(tok, "kind", "tokenizer.kind") != "word_bytes") {
    throw CheckpointError("unsupported tokenizer kind", "tokenizer.kind");
  }
  auto tokenizer = std::make_unique<WordTokenizer>(
      field_as<std::vector<std::string>>(tok, "vocabulary", "tokenizer.vocabulary"));
  if (config.lm.vocab_size != tokenizer->vocab_size()) {
    throw CheckpointError(fmt::format("model.lm.vocab_size {} != tokenizer vocabulary {}",
                                      config.lm.vocab_size, tokenizer->vocab_size()),
                          "model.lm.vocab_size");
  }

  std::optional<Assistant> model;
  try {
    model.emplace(config, std::move(tokenizer));
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("cannot build model: ") + e.what(), "model");
  }

  std::map<std::string, ag::Var> by_name;
  for (const NamedParameter& p : model->all_parameters()) by_name.emplace(p.name, p.var);

  const json& params = field(m, "parameters", "parameters");
  if (!params.is_array() || params.size() != by_name.size()) {
    throw CheckpointError(fmt::format("manifest lists {} parameters, model has {}",
                                      params.is_array() ? params.size() : 0, by_name.size()),
                          "parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string path = fmt::format("parameters[{}]", i);
    const json& e = params[i];
    const std::string name = field_as<std::string>(e, "name", path + ".name");
    auto it = by_name.find(name);
    if (it == by_name.end()) {
      throw CheckpointError("unknown parameter " + name, path + ".name");
    }
    const auto rows = field_as<Eigen::Index>(e, "rows", path + ".rows");
    const auto cols = field_as<Eigen::Index>(e, "cols", path + ".cols");
    if (rows != it->second.rows()) {
      throw CheckpointError(fmt::format("{} has {} rows in the manifest, model expects {}",
                                        name, rows, it->second.rows()),
                            path + ".rows");
    }
    if (cols != it->second.cols()) {
      throw CheckpointError(fmt::format("{} has {} cols in the manifest, model expects {}",
                                        name, cols, it->second.cols()),
                            path + ".cols");
    }
    const std::string dtype = field_as<std::string>(e, "dtype", path + ".dtype");
    if (dtype_width(dtype) == 0) {
      throw CheckpointError("unknown dtype " + dtype, path + ".dtype");
    }
    it->second.mutable_value() = load_matrix(dir, e, path, "file", rows, cols, dtype);
  }

  TrainState state(std::move(*model));
  state.step = field_as<long>(m, "step", "step");
  try {
    state.stage = stage_from_string(field_as<std::string>(m, "stage", "stage"));
  } catch (const ConfigError&) {
    throw CheckpointError("unknown stage", "stage");
  }
  state.epochs_completed = field_as<int>(m, "epochs_completed", "epochs_completed");

  const json& opt = field(m, "optimizer", "optimizer");
  std::map<std::string, AdamOptimizer::Moments> moments;
  const json& slots = field(opt, "slots", "optimizer.slots");
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const std::string path = fmt::format("optimizer.slots[{}]", i);
    const json& e = slots[i];
    const std::string name = field_as<std::string>(e, "name", path + ".name");
    auto it = by_name.find(name);
    if (it == by_name.end()) {
      throw CheckpointError("optimizer state for unknown parameter " + name, path + ".name");
    }
    const auto rows = field_as<Eigen::Index>(e, "rows", path + ".rows");
    const auto cols = field_as<Eigen::Index>(e, "cols", path + ".cols");
    if (rows != it->second.rows() || cols != it->second.cols()) {
      throw CheckpointError("optimizer moment shape does not match " + name,
                            path + (rows != it->second.rows() ? ".rows" : ".cols"));
    }
    AdamOptimizer::Moments mo;
    mo.m = load_matrix(dir, e, path, "m_file", rows, cols, "f64");
    mo.v = load_matrix(dir, e, path, "v_file", rows, cols, "f64");
    moments.emplace(name, std::move(mo));
  }
  state.optimizer.restore(field_as<long>(opt, "steps", "optimizer.steps"), std::move(moments));

  if (m.contains("history")) {
    for (const json& r : m.at("history")) {
      MetricRow row;
      row.step = r.at("step").get<long>();
      row.stage = stage_from_string(r.at("stage").get<std::string>());
      row.loss = r.at("loss").get<double>();
      row.lr = r.at("lr").get<double>();
      row.wall_ms = r.at("wall_ms").get<double>();
      state.history.push_back(row);
    }
  }
  return state;
}

}  // namespace surgvl
