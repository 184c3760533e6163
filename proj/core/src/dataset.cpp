// Copyright 2026 The surgvl Authors
// SPDX-License-Identifier: Apache-2.0

#include "surgvl/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "surgvl/errors.hpp"
#include "surgvl/rng.hpp"

namespace surgvl {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Split s) { return s == Split::train ? "train" : "test"; }

namespace {

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  throw InvalidInputError("unknown split '" + s + "'");
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void require_dir(const fs::path& path, const std::string& what) {
  if (!fs::is_directory(path)) {
    throw IoError(fmt::format("{} not found: expected directory {}", what, path.string()));
  }
}

std::vector<fs::path> sorted_entries(const fs::path& dir, bool directories) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (directories ? e.is_directory() : e.is_regular_file()) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct QaPair {
  std::string question;
  std::string answer;
};

std::vector<QaPair> read_qa_file(const fs::path& path) {
  std::vector<QaPair> out;
  std::istringstream in(read_text(path));
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto bar = t.find('|');
    if (bar == std::string::npos) {
      throw InvalidInputError(fmt::format("{}:{}: expected 'question|answer'", path.string(), lineno));
    }
    QaPair p{trim(t.substr(0, bar)), trim(t.substr(bar + 1))};
    if (p.question.empty() || p.answer.empty()) {
      throw InvalidInputError(fmt::format("{}:{}: empty question or answer", path.string(), lineno));
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::optional<fs::path> find_frame(const fs::path& dir, const std::string& stem) {
  for (const char* ext : {".ppm", ".png", ".jpg", ".jpeg"}) {
    const fs::path p = dir / (stem + ext);
    if (fs::is_regular_file(p)) return p;
  }
  return std::nullopt;
}

std::string relative_to(const fs::path& p, const fs::path& root) {
  return fs::relative(p, root).generic_string();
}

void finish_manifest(DatasetManifest& m, const std::vector<VQARecord>& records, long reference,
                     const std::string& name) {
  m.counts[Split::train] = 0;
  m.counts[Split::test] = 0;
  for (const VQARecord& r : records) ++m.counts[r.split];
  m.total = static_cast<long>(records.size());
  m.reference_total = reference;
  if (m.total != reference) {
    m.discrepancy = fmt::format("loaded {} Q&A pairs; the reference {} release has {}", m.total,
                                name, reference);
  }
}

}  // namespace

json to_json(const VQARecord& r) {
  return {{"sample_id", r.sample_id},
          {"visual_path", r.visual_path},
          {"question", r.question},
          {"answer", r.answer},
          {"answer_class", r.answer_class ? json(*r.answer_class) : json(nullptr)},
          {"dataset", to_string(r.dataset)},
          {"split", to_string(r.split)}};
}

VQARecord vqa_record_from_json(const json& j) {
  VQARecord r;
  try {
    r.sample_id = j.at("sample_id").get<std::string>();
    r.visual_path = j.at("visual_path").get<std::string>();
    r.question = j.at("question").get<std::string>();
    r.answer = j.at("answer").get<std::string>();
    if (j.contains("answer_class") && !j.at("answer_class").is_null()) {
      r.answer_class = j.at("answer_class").get<int>();
    }
    r.dataset = source_dataset_from_string(j.at("dataset").get<std::string>());
    r.split = split_from_string(j.at("split").get<std::string>());
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad VQA record: ") + e.what(), j.dump());
  }
  return r;
}

json DatasetManifest::to_json() const {
  json counts_j = json::object();
  for (const auto& [s, n] : counts) counts_j[surgvl::to_string(s)] = n;
  json j = {{"dataset", surgvl::to_string(dataset)},
            {"counts", counts_j},
            {"total", total},
            {"reference_total", reference_total ? json(*reference_total) : json(nullptr)},
            {"total_matches_reference", matches_reference()},
            {"fps_rule", fps_rule},
            {"raw_counts", raw_counts},
            {"classes_present", classes_present}};
  j["class_vocabulary"] = class_vocabulary ? json(*class_vocabulary) : json(nullptr);
  if (!discrepancy.empty()) j["discrepancy"] = discrepancy;
  return j;
}

long cholec80_frame_index(long second, double source_fps) {
  if (second < 0) throw InvalidInputError("negative annotation second");
  return static_cast<long>(std::floor(static_cast<double>(second) * source_fps /
                                      kCholec80SampleFps));
}

Split cholec80_split(int video_number) {
  if (video_number < 1 || video_number > 80) {
    throw InvalidInputError(fmt::format("Cholec80 has videos 1-80, got {}", video_number));
  }
  return video_number >= 71 ? Split::test : Split::train;
}

LoadedDataset load_cholec80_vqa(const fs::path& root) {
  require_dir(root, "Cholec80-VQA root");
  require_dir(root / "qa", "Cholec80-VQA annotations");
  require_dir(root / "frames", "Cholec80-VQA frames");
  double source_fps = kCholec80SourceFps;
  if (fs::exists(root / "meta.json")) {
    source_fps = json::parse(read_text(root / "meta.json")).value("source_fps", source_fps);
  }

  LoadedDataset out;
  out.manifest.dataset = SourceDataset::cholec80;
  out.manifest.fps_rule = fmt::format(
      "1 fps: annotation second S uses source frame floor(S * {})", source_fps);
  long annotated = 0;
  for (const fs::path& vdir : sorted_entries(root / "qa", true)) {
    const std::string vname = vdir.filename().string();
    if (vname.rfind("video", 0) != 0) {
      throw InvalidInputError("unexpected directory " + vdir.string() + " (want videoNN)");
    }
    int video = 0;
    try {
      video = std::stoi(vname.substr(5));
    } catch (const std::exception&) {
      throw InvalidInputError("cannot read a video number from " + vname);
    }
    const Split split = cholec80_split(video);
    std::vector<std::pair<long, fs::path>> seconds;
    for (const fs::path& f : sorted_entries(vdir, false)) {
      if (f.extension() != ".txt") continue;
      seconds.emplace_back(std::stol(f.stem().string()), f);
    }
    std::sort(seconds.begin(), seconds.end());
    for (const auto& [second, file] : seconds) {
      ++annotated;
      const long index = cholec80_frame_index(second, source_fps);
      const fs::path frame = root / "frames" / vname / fmt::format("{:06d}.ppm", index);
      if (!fs::is_regular_file(frame)) {
        throw AlignmentError(fmt::format("{} second {} has no frame {}", vname, second,
                                         frame.filename().string()),
                             -1);
      }
      const auto pairs = read_qa_file(file);
      for (std::size_t q = 0; q < pairs.size(); ++q) {
        VQARecord r;
        r.sample_id = fmt::format("cholec80/{}/{:06d}/{}", vname, second, q);
        r.visual_path = relative_to(frame, root);
        r.question = pairs[q].question;
        r.answer = pairs[q].answer;
        r.dataset = SourceDataset::cholec80;
        r.split = split;
        out.records.push_back(std::move(r));
      }
    }
  }
  out.manifest.raw_counts["annotated_seconds"] = annotated;
  finish_manifest(out.manifest, out.records, kCholec80ReferencePairs, "Cholec80-VQA");
  return out;
}

namespace {

struct SplitLists {
  std::map<std::string, Split> by_sequence;
};

SplitLists read_splits(const fs::path& root) {
  const fs::path p = root / "splits.json";
  if (!fs::exists(p)) throw IoError("missing " + p.string());
  SplitLists out;
  json j;
  try {
    j = json::parse(read_text(p));
  } catch (const json::exception& e) {
    throw InvalidInputError(p.string() + ": " + e.what());
  }
  for (Split s : {Split::train, Split::test}) {
    for (const json& seq : j.value(to_string(s), json::array())) {
      const auto name = seq.get<std::string>();
      if (!out.by_sequence.emplace(name, s).second) {
        throw InvalidInputError("sequence " + name + " is listed in both splits");
      }
    }
  }
  return out;
}

template <typename OnPair>
void load_sequence_layout(const fs::path& root, SourceDataset dataset, const std::string& name,
                          DatasetManifest& manifest, OnPair&& on_pair) {
  require_dir(root, name + " root");
  const SplitLists splits = read_splits(root);
  long annotated = 0;
  long images = 0;
  for (const auto& [seq, split] : splits.by_sequence) {
    const fs::path sdir = root / seq;
    require_dir(sdir / "qa", name + " annotations for " + seq);
    require_dir(sdir / "frames", name + " frames for " + seq);
    for (const fs::path& f : sorted_entries(sdir / "frames", false)) {
      (void)f;
      ++images;
    }
    for (const fs::path& f : sorted_entries(sdir / "qa", false)) {
      if (f.extension() != ".txt") continue;
      ++annotated;
      const std::string stem = f.stem().string();
      const auto frame = find_frame(sdir / "frames", stem);
      if (!frame) {
        throw AlignmentError(fmt::format("{} {} annotation {} has no frame", name, seq, stem), -1);
      }
      const auto pairs = read_qa_file(f);
      for (std::size_t q = 0; q < pairs.size(); ++q) {
        VQARecord r;
        r.sample_id = fmt::format("{}/{}/{}/{}", to_string(dataset), seq, stem, q);
        r.visual_path = relative_to(*frame, root);
        r.question = pairs[q].question;
        r.answer = pairs[q].answer;
        r.dataset = dataset;
        r.split = split;
        on_pair(r);
      }
    }
  }
  manifest.dataset = dataset;
  manifest.raw_counts["annotated_frames"] = annotated;
  manifest.raw_counts["images"] = images;
  manifest.raw_counts["sequences"] = static_cast<long>(splits.by_sequence.size());
}

}  // namespace

LoadedDataset load_endovis18_vqa(const fs::path& root) {
  LoadedDataset out;
  load_sequence_layout(root, SourceDataset::endovis18, "EndoVis18-VQA", out.manifest,
                       [&](VQARecord& r) { out.records.push_back(std::move(r)); });
  out.manifest.fps_rule = "annotated frames as released";
  finish_manifest(out.manifest, out.records, kEndoVis18ReferencePairs, "EndoVis18-VQA");
  return out;
}

LoadedDataset load_psiava_vqa(const fs::path& root) {
  require_dir(root, "PSI-AVA-VQA root");
  const fs::path classes_path = root / "classes.txt";
  if (!fs::exists(classes_path)) throw IoError("missing " + classes_path.string());
  std::vector<std::string> vocab;
  {
    std::istringstream in(read_text(classes_path));
    std::string line;
    while (std::getline(in, line)) {
      const std::string t = trim(line);
      if (!t.empty()) vocab.push_back(t);
    }
  }
  if (vocab.size() != kPsiAvaClassCount) {
    throw InvalidInputError(fmt::format("{} lists {} classes, expected {}", classes_path.string(),
                                        vocab.size(), kPsiAvaClassCount));
  }
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    if (!index.emplace(vocab[i], static_cast<int>(i)).second) {
      throw InvalidInputError("duplicate class label '" + vocab[i] + "'");
    }
  }

  LoadedDataset out;
  std::set<int> present;
  load_sequence_layout(root, SourceDataset::psiava, "PSI-AVA-VQA", out.manifest,
                       [&](VQARecord& r) {
                         auto it = index.find(r.answer);
                         if (it == index.end()) {
                           throw InvalidInputError(fmt::format(
                               "answer '{}' of {} is not in the class vocabulary", r.answer,
                               r.sample_id));
                         }
                         r.answer_class = it->second;
                         present.insert(it->second);
                         out.records.push_back(std::move(r));
                       });
  out.manifest.fps_rule = "annotated keyframes as released";
  out.manifest.class_vocabulary = vocab;
  for (int c : present) out.manifest.classes_present.push_back(vocab[static_cast<std::size_t>(c)]);
  finish_manifest(out.manifest, out.records, kPsiAvaReferencePairs, "PSI-AVA-VQA");
  return out;
}

LoadedDataset load_dataset(SourceDataset dataset, const fs::path& root) {
  switch (dataset) {
    case SourceDataset::cholec80: return load_cholec80_vqa(root);
    case SourceDataset::endovis18: return load_endovis18_vqa(root);
    case SourceDataset::psiava: return load_psiava_vqa(root);
    case SourceDataset::synthetic: break;
  }
  throw InvalidInputError("synthetic data is generated, not loaded");
}

void write_vqa_jsonl(const fs::path& path, std::span<const VQARecord> records) {
  std::ofstream out(path, std::ios::trunc);
  for (const VQARecord& r : records) out << to_json(r).dump() << '\n';
  if (!out) throw IoError("cannot write " + path.string());
}

std::vector<VQARecord> read_vqa_jsonl(const fs::path& path) {
  std::vector<VQARecord> out;
  std::istringstream in(read_text(path));
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    try {
      out.push_back(vqa_record_from_json(json::parse(line)));
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("bad JSON line: ") + e.what(), line);
    }
  }
  return out;
}

namespace {

// Reads the next header token (skipping whitespace and # comments).
std::string ppm_token(std::istream& in) {
  std::string tok;
  int ch = 0;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok += static_cast<char>(ch);
  }
  return tok;
}

}  // namespace

Image read_ppm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  const std::string magic = ppm_token(in);
  if (magic != "P6" && magic != "P3") {
    throw InvalidInputError(path.string() + " is not a PPM image");
  }
  int w = 0;
  int h = 0;
  int maxval = 0;
  try {
    w = std::stoi(ppm_token(in));
    h = std::stoi(ppm_token(in));
    maxval = std::stoi(ppm_token(in));
  } catch (const std::exception&) {
    throw InvalidInputError(path.string() + " has a malformed PPM header");
  }
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) {
    throw InvalidInputError(path.string() + " has unsupported PPM dimensions or depth");
  }
  Image img(h, w, 3);
  if (magic == "P6") {
    std::vector<unsigned char> buf(img.data.size());
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() != static_cast<std::streamsize>(buf.size())) {
      throw InvalidInputError(path.string() + " is truncated");
    }
    for (std::size_t i = 0; i < buf.size(); ++i) img.data[i] = buf[i] / double(maxval);
  } else {
    for (double& v : img.data) {
      const std::string tok = ppm_token(in);
      if (tok.empty()) throw InvalidInputError(path.string() + " is truncated");
      v = std::stoi(tok) / double(maxval);
    }
  }
  return img;
}

void write_ppm(const fs::path& path, const Image& image) {
  if (image.channels != 3) throw InvalidInputError("PPM output needs 3 channels");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  std::vector<unsigned char> buf(image.data.size());
  for (std::size_t i = 0; i < buf.size(); ++i) {
    buf[i] = static_cast<unsigned char>(std::lround(std::clamp(image.data[i], 0.0, 1.0) * 255.0));
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("cannot write " + path.string());
}

Visual load_visual(const fs::path& path, double fps) {
  if (fs::is_directory(path)) {
    std::vector<Image> frames;
    for (const fs::path& f : sorted_entries(path, false)) {
      if (f.extension() == ".ppm") frames.push_back(read_ppm(f));
    }
    if (frames.empty()) throw InvalidInputError(path.string() + " holds no .ppm frames");
    return VideoTensor::from_frames(frames, fps);
  }
  if (fs::is_regular_file(path)) return read_ppm(path);
  throw IoError("no visual at " + path.string());
}

void save_visual(const fs::path& path, const Visual& visual) {
  if (const auto* img = std::get_if<Image>(&visual)) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_ppm(path, *img);
    return;
  }
  const auto& video = std::get<VideoTensor>(visual);
  fs::create_directories(path);
  for (int t = 0; t < video.frames; ++t) {
    write_ppm(path / fmt::format("{:03d}.ppm", t), video.frame(t));
  }
}

const std::vector<std::string>& synthetic_phases() {
  static const std::vector<std::string> kPhases = {
      "preparation",          "calot triangle dissection", "clipping and cutting",
      "gallbladder dissection", "gallbladder packaging",   "cleaning and coagulation",
      "gallbladder retraction"};
  return kPhases;
}

const std::vector<std::string>& synthetic_tools() {
  static const std::vector<std::string> kTools = {"grasper",  "bipolar",  "hook",
                                                  "scissors", "clipper",  "irrigator",
                                                  "specimen bag"};
  return kTools;
}

std::string synthetic_caption(const std::string& phase, const std::string& tool) {
  return "during " + phase + " the " + tool + " is visible";
}

std::optional<std::pair<std::string, std::string>> parse_synthetic_caption(
    const std::string& caption) {
  static const std::string kPrefix = "during ";
  static const std::string kMid = " the ";
  static const std::string kSuffix = " is visible";
  if (caption.rfind(kPrefix, 0) != 0 || caption.size() < kPrefix.size() + kSuffix.size() ||
      caption.compare(caption.size() - kSuffix.size(), kSuffix.size(), kSuffix) != 0) {
    return std::nullopt;
  }
  const std::string body =
      caption.substr(kPrefix.size(), caption.size() - kPrefix.size() - kSuffix.size());
  const auto mid = body.find(kMid);
  if (mid == std::string::npos) return std::nullopt;
  return std::make_pair(body.substr(0, mid), body.substr(mid + kMid.size()));
}

namespace {

// RGB background per phase.
constexpr double kPhaseColours[7][3] = {{0.8, 0.2, 0.2}, {0.2, 0.8, 0.2}, {0.2, 0.2, 0.8},
                                        {0.8, 0.8, 0.2}, {0.8, 0.2, 0.8}, {0.2, 0.8, 0.8},
                                        {0.5, 0.5, 0.5}};

// RGB glyph colour per tool.
constexpr double kToolColours[7][3] = {{0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}, {1.0, 0.5, 0.0},
                                       {0.0, 0.5, 1.0}, {0.5, 0.0, 1.0}, {1.0, 1.0, 0.5},
                                       {0.0, 0.4, 0.2}};

// 3x3 glyph per tool, row-major bits.
constexpr unsigned kToolGlyphs[7] = {0b111101111, 0b010111010, 0b100100111, 0b101010101,
                                     0b111000111, 0b001010100, 0b110110000};

Image draw_frame(int h, int w, int phase, int tool, int oy, int ox, Rng& rng) {
  Image img(h, w, 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool glyph = false;
      const int gy = y - oy;
      const int gx = x - ox;
      if (gy >= 0 && gy < 3 && gx >= 0 && gx < 3) {
        glyph = (kToolGlyphs[tool] >> (8 - (gy * 3 + gx))) & 1u;
      }
      for (int c = 0; c < 3; ++c) {
        const double v = glyph ? kToolColours[tool][c] : kPhaseColours[phase][c];
        img.at(y, x, c) = std::clamp(v + rng.uniform(-0.03, 0.03), 0.0, 1.0);
      }
    }
  }
  return img;
}

}  // namespace

SyntheticCorpus make_synthetic_corpus(std::uint64_t seed, const SyntheticSizes& sizes) {
  if (sizes.videos < 0 || sizes.images < 0 || sizes.videos + sizes.images < 1 ||
      sizes.frames < 1 || sizes.height < 3 || sizes.width < 3) {
    throw InvalidInputError("synthetic sizes must be >= 1 (frames) and >= 3 pixels per side");
  }
  const auto& phases = synthetic_phases();
  const auto& tools = synthetic_tools();
  // Item i takes phase slot i mod P and tool slot (i + 3 * (i / P)) mod T,
  // which keeps both balanced and (for P = T = 7) the first 49 pairs
  // distinct. Slots map to names through seeded permutations.
  const int np = static_cast<int>(phases.size());
  const int nt = static_cast<int>(tools.size());
  std::vector<int> phase_perm(phases.size());
  std::vector<int> tool_perm(tools.size());
  std::iota(phase_perm.begin(), phase_perm.end(), 0);
  std::iota(tool_perm.begin(), tool_perm.end(), 0);
  Rng rng(seed);
  rng.shuffle(std::span<int>(phase_perm));
  rng.shuffle(std::span<int>(tool_perm));
  std::vector<std::pair<int, int>> combos;
  for (int i = 0; i < np * nt; ++i) {
    combos.emplace_back(phase_perm[static_cast<std::size_t>(i % np)],
                        tool_perm[static_cast<std::size_t>((i + 3 * (i / np)) % nt)]);
  }

  SyntheticCorpus out;
  const int total = sizes.videos + sizes.images;
  for (int i = 0; i < total; ++i) {
    const auto [p, t] = combos[static_cast<std::size_t>(i) % combos.size()];
    SyntheticItem item;
    item.phase = phases[static_cast<std::size_t>(p)];
    item.tool = tools[static_cast<std::size_t>(t)];
    item.caption = synthetic_caption(item.phase, item.tool);
    const int span_y = sizes.height - 3;
    const int span_x = sizes.width - 3;
    if (i < sizes.videos) {
      item.sample_id = fmt::format("syn-v{:03d}", i);
      std::vector<Image> frames;
      const int oy = static_cast<int>(rng.below(static_cast<std::uint64_t>(span_y + 1)));
      for (int f = 0; f < sizes.frames; ++f) {
        const int ox = span_x == 0 ? 0 : (f * span_x) / std::max(1, sizes.frames - 1);
        frames.push_back(draw_frame(sizes.height, sizes.width, p, t, oy, ox, rng));
      }
      item.visual = VideoTensor::from_frames(frames, 1.0);
    } else {
      item.sample_id = fmt::format("syn-i{:03d}", i - sizes.videos);
      const int oy = static_cast<int>(rng.below(static_cast<std::uint64_t>(span_y + 1)));
      const int ox = static_cast<int>(rng.below(static_cast<std::uint64_t>(span_x + 1)));
      item.visual = draw_frame(sizes.height, sizes.width, p, t, oy, ox, rng);
    }
    item.source_id = item.sample_id;
    const std::string visual_path = modality_of(item.visual) == Modality::video
                                        ? "visuals/" + item.sample_id
                                        : "visuals/" + item.sample_id + ".ppm";
    out.records.push_back({item.sample_id + "/phase", visual_path, kPhaseQuestion, item.phase,
                           p, SourceDataset::synthetic, Split::train});
    out.records.push_back({item.sample_id + "/tool", visual_path, kToolQuestion, item.tool, t,
                           SourceDataset::synthetic, Split::train});
    out.items.push_back(std::move(item));
  }
  return out;
}

std::vector<SourceCaption> SyntheticCorpus::captions() const {
  std::vector<SourceCaption> out;
  for (const SyntheticItem& it : items) {
    out.push_back({it.sample_id, it.caption, SourceDataset::synthetic, modality_of(it.visual)});
  }
  return out;
}

std::vector<AlignmentSample> SyntheticCorpus::alignment_samples() const {
  std::vector<AlignmentSample> out;
  for (const SyntheticItem& it : items) {
    out.push_back({it.sample_id, it.source_id, it.visual, it.caption});
  }
  return out;
}

std::vector<InstructionSample> SyntheticCorpus::instruction_samples() const {
  std::vector<InstructionSample> out;
  for (const SyntheticItem& it : items) {
    ConversationRecord rec{it.sample_id,
                           {{kPhaseQuestion, it.phase}, {kToolQuestion, it.tool}},
                           TaskKind::conversation};
    out.push_back({it.sample_id, std::move(rec), it.visual});
  }
  return out;
}

void write_synthetic_corpus(const fs::path& root, const SyntheticCorpus& corpus) {
  fs::create_directories(root / "visuals");
  for (const SyntheticItem& it : corpus.items) {
    const fs::path p = modality_of(it.visual) == Modality::video
                           ? root / "visuals" / it.sample_id
                           : root / "visuals" / (it.sample_id + ".ppm");
    save_visual(p, it.visual);
  }
  const auto caps = corpus.captions();
  write_captions(root / "captions.jsonl", caps);
  write_vqa_jsonl(root / "vqa.jsonl", corpus.records);
  std::vector<GeneratedInstruction> convs;
  for (const InstructionSample& s : corpus.instruction_samples()) {
    GeneratedInstruction g;
    g.sample_id = s.sample_id;
    g.dataset = SourceDataset::synthetic;
    g.modality = modality_of(s.visual);
    g.task_kind = TaskKind::conversation;
    g.rounds = s.record.rounds;
    g.generator = "synthetic/template-1";
    const auto it = std::find_if(corpus.items.begin(), corpus.items.end(),
                                 [&](const SyntheticItem& x) { return x.sample_id == s.sample_id; });
    g.prompt_hash = prompt_hash(render_prompt(it->caption, TaskKind::conversation));
    convs.push_back(std::move(g));
  }
  write_corpus(root / "conversations.jsonl", convs);
}

TrainingCorpus load_training_workspace(const fs::path& root,
                                       const std::optional<fs::path>& instructions) {
  require_dir(root, "workspace");
  TrainingCorpus out;
  std::map<std::string, std::size_t> visual_index;
  for (const SourceCaption& c : read_captions(root / "captions.jsonl")) {
    const fs::path dir = root / "visuals" / c.sample_id;
    const fs::path file = root / "visuals" / (c.sample_id + ".ppm");
    Visual v = fs::is_directory(dir) ? load_visual(dir) : load_visual(file);
    visual_index[c.sample_id] = out.alignment.size();
    out.alignment.push_back({c.sample_id, c.sample_id, std::move(v), c.caption});
  }
  const fs::path conv_path = instructions ? *instructions : root / "conversations.jsonl";
  if (fs::exists(conv_path)) {
    for (const GeneratedInstruction& g : read_corpus(conv_path)) {
      auto it = visual_index.find(g.sample_id);
      if (it == visual_index.end()) {
        throw InvalidInputError("instruction record " + g.sample_id + " has no visual");
      }
      out.instructions.push_back({g.sample_id + ":" + to_string(g.task_kind), g.conversation(),
                                  out.alignment[it->second].visual});
    }
  } else if (instructions) {
    throw IoError("missing " + conv_path.string());
  }
  return out;
}

}  // namespace surgvl
