// Copyright 2026 The surgvl Authors
// SPDX-License-Identifier: Apache-2.0
//
// Surgical VQA ingestion into a common record schema, plus a seeded
// synthetic corpus.
//
// Layouts (annotation files hold one "question|answer" pair per line):
//
//   cholec80/
//     qa/videoNN/<second>.txt        pairs for integer second S of video NN
//     frames/videoNN/<index>.ppm     index = floor(S * source_fps), 6 digits
//     meta.json                      optional {"source_fps": 25}
//   Videos 71-80 form the test split, 1-70 the train split.
//
//   endovis18/ and psiava/
//     splits.json                    {"train": [seq...], "test": [seq...]}
//     <seq>/qa/<frame>.txt
//     <seq>/frames/<frame>.{ppm,png,jpg}
//     classes.txt                    psiava only: the 35 answer labels
//
// Loaders check the layout and frame/annotation agreement; they never
// download or decode anything.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "surgvl/contrastive.hpp"
#include "surgvl/datagen.hpp"
#include "surgvl/training.hpp"
#include "surgvl/visual_encoding.hpp"

namespace surgvl {

enum class Split { train, test };
std::string to_string(Split s);

struct VQARecord {
  std::string sample_id;
  std::string visual_path;  // relative to the dataset root
  std::string question;
  std::string answer;
  std::optional<int> answer_class;
  SourceDataset dataset = SourceDataset::synthetic;
  Split split = Split::train;
};

nlohmann::json to_json(const VQARecord& r);
VQARecord vqa_record_from_json(const nlohmann::json& j);

inline constexpr long kCholec80ReferencePairs = 97251;
inline constexpr long kEndoVis18ReferencePairs = 11783;
inline constexpr long kPsiAvaReferencePairs = 10291;
inline constexpr std::size_t kPsiAvaClassCount = 35;
inline constexpr double kCholec80SourceFps = 25.0;
inline constexpr double kCholec80SampleFps = 1.0;

struct DatasetManifest {
  SourceDataset dataset = SourceDataset::synthetic;
  std::optional<std::vector<std::string>> class_vocabulary;
  std::vector<std::string> classes_present;
  std::map<Split, long> counts;
  long total = 0;
  std::optional<long> reference_total;
  std::string fps_rule;
  std::map<std::string, long> raw_counts;  // e.g. annotated frames, images
  /// Empty when the total equals the reference, otherwise explains the gap.
  std::string discrepancy;

  bool matches_reference() const { return reference_total && *reference_total == total; }
  nlohmann::json to_json() const;
};

struct LoadedDataset {
  std::vector<VQARecord> records;
  DatasetManifest manifest;
};

/// Index of the source frame for annotation second S.
long cholec80_frame_index(long second, double source_fps = kCholec80SourceFps);
Split cholec80_split(int video_number);

/// Throws IoError on a missing layout, AlignmentError when an annotation
/// has no frame, InvalidInputError on malformed lines or out-of-set
/// answers.
LoadedDataset load_cholec80_vqa(const std::filesystem::path& root);
LoadedDataset load_endovis18_vqa(const std::filesystem::path& root);
LoadedDataset load_psiava_vqa(const std::filesystem::path& root);
LoadedDataset load_dataset(SourceDataset dataset, const std::filesystem::path& root);

void write_vqa_jsonl(const std::filesystem::path& path, std::span<const VQARecord> records);
std::vector<VQARecord> read_vqa_jsonl(const std::filesystem::path& path);

// Binary PPM (P6) with maxval 255; P3 is accepted on read. Pixels are
// scaled to [0, 1].
Image read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const Image& image);

/// A .ppm file is an image; a directory of .ppm files (sorted by name) is a
/// video at `fps`.
Visual load_visual(const std::filesystem::path& path, double fps = 1.0);
void save_visual(const std::filesystem::path& path, const Visual& visual);

struct SyntheticSizes {
  int videos = 3;
  int frames = 8;
  int images = 4;
  int height = 8;
  int width = 8;
};

/// Phases and tools are spread evenly over the items and no (phase, tool)
/// pair repeats within 49 items. The phase sets the background colour, the
/// tool the shape and colour of the glyph drawn on it; in videos the glyph
/// moves between frames.
/// Captions read "during <phase> the <tool> is visible": the phase answer is
/// the text between "during " and " the ", the tool answer the text between
/// " the " and " is visible".
struct SyntheticItem {
  std::string sample_id;
  std::string source_id;
  Visual visual;
  std::string phase;
  std::string tool;
  std::string caption;
};

inline constexpr const char* kPhaseQuestion = "What is the surgical phase?";
inline constexpr const char* kToolQuestion = "Which tool is visible?";

struct SyntheticCorpus {
  std::vector<SyntheticItem> items;  // videos first, then images
  std::vector<VQARecord> records;    // phase and tool question per item

  std::vector<SourceCaption> captions() const;
  std::vector<AlignmentSample> alignment_samples() const;
  /// One two-round conversation per item (phase question, tool question).
  std::vector<InstructionSample> instruction_samples() const;
};

const std::vector<std::string>& synthetic_phases();
const std::vector<std::string>& synthetic_tools();

std::string synthetic_caption(const std::string& phase, const std::string& tool);
/// Inverse of synthetic_caption; nullopt for other text.
std::optional<std::pair<std::string, std::string>> parse_synthetic_caption(
    const std::string& caption);

SyntheticCorpus make_synthetic_corpus(std::uint64_t seed, const SyntheticSizes& sizes = {});

/// Workspace layout: visuals/<sample_id>.ppm for images,
/// visuals/<sample_id>/NNN.ppm for videos, captions.jsonl, vqa.jsonl,
/// conversations.jsonl.
void write_synthetic_corpus(const std::filesystem::path& root, const SyntheticCorpus& corpus);

/// Reads a workspace written above (or any directory with captions.jsonl
/// and visuals/) into training samples. Instruction data comes from
/// `instructions` when given, else from conversations.jsonl.
TrainingCorpus load_training_workspace(const std::filesystem::path& root,
                                       const std::optional<std::filesystem::path>& instructions);

}  // namespace surgvl
