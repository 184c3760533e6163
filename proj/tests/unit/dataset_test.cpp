// Copyright 2026 The surgvl Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cstdlib>
#include <set>

#include <gtest/gtest.h>

#include "surgvl/dataset.hpp"
#include "surgvl/errors.hpp"
#include "test_support.hpp"

namespace surgvl {
namespace {

namespace fs = std::filesystem;
using testing::fixture_dir;

const std::vector<double>& pixels(const Visual& v) {
  return std::holds_alternative<Image>(v) ? std::get<Image>(v).data : std::get<VideoTensor>(v).data;
}

void expect_split_invariants(const LoadedDataset& d) {
  std::set<std::string> train, test;
  for (const auto& r : d.records) (r.split == Split::train ? train : test).insert(r.sample_id);
  for (const auto& id : train) EXPECT_EQ(test.count(id), 0u) << id;
  EXPECT_EQ(train.size() + test.size(), d.records.size());
  EXPECT_EQ(d.manifest.counts.at(Split::train) + d.manifest.counts.at(Split::test), d.manifest.total);
  EXPECT_EQ(d.manifest.total, static_cast<long>(d.records.size()));
}

TEST(Cholec80, FrameIndexAndSplitRule) {
  EXPECT_EQ(cholec80_frame_index(0), 0);
  EXPECT_EQ(cholec80_frame_index(2), 50);
  EXPECT_EQ(cholec80_frame_index(3, 30.0), 90);
  for (int v = 1; v <= 70; ++v) EXPECT_EQ(cholec80_split(v), Split::train);
  for (int v = 71; v <= 80; ++v) EXPECT_EQ(cholec80_split(v), Split::test);
  EXPECT_THROW(cholec80_split(81), InvalidInputError);
}

TEST(Cholec80, MiniFixture) {
  const auto d = load_cholec80_vqa(fixture_dir("cholec80_mini"));
  ASSERT_EQ(d.records.size(), 4u);
  const VQARecord& first = d.records[0];
  EXPECT_EQ(first.sample_id, "cholec80/video01/000000/0");
  EXPECT_EQ(first.visual_path, "frames/video01/000000.ppm");
  EXPECT_EQ(first.question, "What is the surgical phase?");
  EXPECT_EQ(first.answer, "preparation");
  EXPECT_FALSE(first.answer_class.has_value());
  EXPECT_EQ(first.split, Split::train);
  EXPECT_EQ(d.records[1].answer, "yes");
  EXPECT_EQ(d.records[2].visual_path, "frames/video01/000050.ppm");
  EXPECT_EQ(d.records[2].answer, "calot triangle dissection");
  const VQARecord& last = d.records[3];
  EXPECT_EQ(last.sample_id, "cholec80/video73/000001/0");
  EXPECT_EQ(last.visual_path, "frames/video73/000025.ppm");
  EXPECT_EQ(last.split, Split::test);
  EXPECT_EQ(d.manifest.counts.at(Split::train), 3);
  EXPECT_EQ(d.manifest.counts.at(Split::test), 1);
  EXPECT_EQ(d.manifest.raw_counts.at("annotated_seconds"), 3);
  EXPECT_EQ(d.manifest.reference_total, 97251);
  EXPECT_FALSE(d.manifest.discrepancy.empty());
  expect_split_invariants(d);
}

TEST(Cholec80, MissingFrameIsAlignmentError) {
  testing::TempDir dir;
  fs::copy(fixture_dir("cholec80_mini"), dir.path(), fs::copy_options::recursive);
  fs::remove(dir / "frames/video01/000050.ppm");
  EXPECT_THROW(load_cholec80_vqa(dir.path()), AlignmentError);
}

TEST(Cholec80, MissingLayoutIsIoError) {
  testing::TempDir dir;
  try {
    load_cholec80_vqa(dir / "nothing");
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("nothing"), std::string::npos);
  }
}

TEST(EndoVis18, OneImageThreeAnnotations) {
  const auto d = load_endovis18_vqa(fixture_dir("endovis18_mini"));
  ASSERT_EQ(d.records.size(), 4u);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(d.records[static_cast<std::size_t>(i)].visual_path, "seq_1/frames/frame000.ppm");
    EXPECT_EQ(d.records[static_cast<std::size_t>(i)].split, Split::train);
  }
  EXPECT_EQ(d.records[0].sample_id, "endovis18/seq_1/frame000/0");
  EXPECT_EQ(d.records[1].question, "What is the state of bipolar forceps?");
  EXPECT_EQ(d.records[1].answer, "grasping");
  EXPECT_EQ(d.records[2].answer, "left-top");
  EXPECT_EQ(d.records[3].sample_id, "endovis18/seq_16/frame010/0");
  EXPECT_EQ(d.records[3].answer, "cutting");
  EXPECT_EQ(d.records[3].split, Split::test);
  EXPECT_EQ(d.manifest.raw_counts.at("images"), 2);
  EXPECT_EQ(d.manifest.reference_total, 11783);
  expect_split_invariants(d);
}

TEST(EndoVis18, SequenceInBothSplitsIsRejected) {
  testing::TempDir dir;
  fs::copy(fixture_dir("endovis18_mini"), dir.path(), fs::copy_options::recursive);
  testing::write_file(dir / "splits.json", R"({"train": ["seq_1"], "test": ["seq_1"]})");
  EXPECT_THROW(load_endovis18_vqa(dir.path()), InvalidInputError);
}

TEST(PsiAva, MiniFixtureClassesAndVocabulary) {
  const auto d = load_psiava_vqa(fixture_dir("psiava_mini"));
  ASSERT_EQ(d.records.size(), 3u);
  ASSERT_TRUE(d.manifest.class_vocabulary.has_value());
  EXPECT_EQ(d.manifest.class_vocabulary->size(), kPsiAvaClassCount);
  EXPECT_EQ(kPsiAvaClassCount, 35u);
  EXPECT_EQ(d.manifest.classes_present, (std::vector<std::string>{"class_03", "class_17"}));
  EXPECT_EQ(d.records[0].answer_class, 3);
  EXPECT_EQ(d.records[1].answer_class, 17);
  EXPECT_EQ(d.records[2].split, Split::test);
  for (const auto& r : d.records) {
    ASSERT_TRUE(r.answer_class.has_value());
    EXPECT_GE(*r.answer_class, 0);
    EXPECT_LT(*r.answer_class, 35);
  }
  EXPECT_EQ(d.manifest.reference_total, 10291);
  expect_split_invariants(d);
}

TEST(PsiAva, AnswerOutsideVocabularyNamesTheString) {
  testing::TempDir dir;
  fs::copy(fixture_dir("psiava_mini"), dir.path(), fs::copy_options::recursive);
  testing::write_file(dir / "case_02/qa/00002.txt", "What is the phase?|suturing the bladder\n");
  try {
    load_psiava_vqa(dir.path());
    FAIL() << "expected InvalidInputError";
  } catch (const InvalidInputError& e) {
    EXPECT_NE(std::string(e.what()).find("suturing the bladder"), std::string::npos);
  }
}

TEST(PsiAva, WrongVocabularySizeIsRejected) {
  testing::TempDir dir;
  fs::copy(fixture_dir("psiava_mini"), dir.path(), fs::copy_options::recursive);
  testing::write_file(dir / "classes.txt", "class_03\nclass_17\n");
  EXPECT_THROW(load_psiava_vqa(dir.path()), InvalidInputError);
}

TEST(Loaders, PureFunctionsOfTheDirectory) {
  for (SourceDataset ds : {SourceDataset::cholec80, SourceDataset::endovis18, SourceDataset::psiava}) {
    const std::string name = ds == SourceDataset::cholec80    ? "cholec80_mini"
                             : ds == SourceDataset::endovis18 ? "endovis18_mini"
                                                              : "psiava_mini";
    const auto a = load_dataset(ds, fixture_dir(name));
    const auto b = load_dataset(ds, fixture_dir(name));
    EXPECT_EQ(a.manifest.to_json(), b.manifest.to_json());
    ASSERT_EQ(a.records.size(), b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
      EXPECT_EQ(to_json(a.records[i]), to_json(b.records[i]));
    }
  }
}

TEST(VqaJsonl, RoundTrip) {
  const auto d = load_psiava_vqa(fixture_dir("psiava_mini"));
  testing::TempDir dir;
  write_vqa_jsonl(dir / "vqa.jsonl", d.records);
  const auto back = read_vqa_jsonl(dir / "vqa.jsonl");
  ASSERT_EQ(back.size(), d.records.size());
  for (std::size_t i = 0; i < back.size(); ++i) EXPECT_EQ(to_json(back[i]), to_json(d.records[i]));
}

TEST(Ppm, ReadsFixtureAndRoundTrips) {
  const Image img = read_ppm(fixture_dir("cholec80_mini") / "frames/video01/000000.ppm");
  EXPECT_EQ(img.height, 8);
  EXPECT_EQ(img.width, 8);
  EXPECT_EQ(img.channels, 3);
  EXPECT_DOUBLE_EQ(img.at(0, 0, 0), 10.0 / 255.0);
  EXPECT_DOUBLE_EQ(img.at(2, 3, 1), (10.0 + 48.0) / 255.0);
  testing::TempDir dir;
  write_ppm(dir / "x.ppm", img);
  const Image back = read_ppm(dir / "x.ppm");
  EXPECT_EQ(back.data, img.data);
}

TEST(Ppm, AsciiVariantAndBadHeader) {
  testing::TempDir dir;
  testing::write_file(dir / "a.ppm", "P3\n# comment\n1 1\n255\n255 0 51\n");
  const Image img = read_ppm(dir / "a.ppm");
  EXPECT_EQ(img.data, (std::vector<double>{1.0, 0.0, 0.2}));
  testing::write_file(dir / "b.ppm", "P5\n1 1\n255\nx");
  EXPECT_ANY_THROW(read_ppm(dir / "b.ppm"));
}

TEST(Synthetic, SameSeedSameCorpus) {
  const auto a = make_synthetic_corpus(7);
  const auto b = make_synthetic_corpus(7);
  ASSERT_EQ(a.items.size(), b.items.size());
  for (std::size_t i = 0; i < a.items.size(); ++i) {
    EXPECT_EQ(a.items[i].caption, b.items[i].caption);
    EXPECT_EQ(pixels(a.items[i].visual), pixels(b.items[i].visual));
  }
  const auto c = make_synthetic_corpus(8);
  bool differs = false;
  for (std::size_t i = 0; i < a.items.size(); ++i) differs |= pixels(a.items[i].visual) != pixels(c.items[i].visual);
  EXPECT_TRUE(differs);
}

TEST(Synthetic, SizesGiveVideosOfRequestedLength) {
  const auto c = make_synthetic_corpus(1, SyntheticSizes{3, 8, 2, 8, 8});
  ASSERT_EQ(c.items.size(), 5u);
  for (int i = 0; i < 3; ++i) {
    const auto& v = std::get<VideoTensor>(c.items[static_cast<std::size_t>(i)].visual);
    EXPECT_EQ(v.frames, 8);
    EXPECT_EQ(v.height, 8);
  }
  EXPECT_TRUE(std::holds_alternative<Image>(c.items[3].visual));
  EXPECT_EQ(c.records.size(), 10u);
}

TEST(Synthetic, AnswersFollowFromCaptions) {
  const auto c = make_synthetic_corpus(3, SyntheticSizes{4, 3, 12, 8, 8});
  std::set<std::pair<std::string, std::string>> pairs;
  for (const auto& item : c.items) {
    const auto parsed = parse_synthetic_caption(item.caption);
    ASSERT_TRUE(parsed.has_value()) << item.caption;
    EXPECT_EQ(parsed->first, item.phase);
    EXPECT_EQ(parsed->second, item.tool);
    EXPECT_TRUE(pairs.insert(*parsed).second) << "repeated pair " << item.caption;
  }
  for (const auto& r : c.records) {
    const auto item = std::find_if(c.items.begin(), c.items.end(), [&](const SyntheticItem& it) {
      return r.visual_path.find(it.sample_id) != std::string::npos;
    });
    ASSERT_NE(item, c.items.end()) << r.sample_id;
    const auto parsed = parse_synthetic_caption(item->caption);
    EXPECT_EQ(r.answer, r.question == kPhaseQuestion ? parsed->first : parsed->second);
  }
  EXPECT_FALSE(parse_synthetic_caption("something else").has_value());
}

TEST(Synthetic, WorkspaceRoundTrip) {
  const auto c = make_synthetic_corpus(4, SyntheticSizes{2, 3, 2, 8, 8});
  testing::TempDir dir;
  write_synthetic_corpus(dir.path(), c);
  const auto loaded = load_training_workspace(dir.path(), std::nullopt);
  ASSERT_EQ(loaded.alignment.size(), 4u);
  ASSERT_EQ(loaded.instructions.size(), 4u);
  const auto original = c.alignment_samples();
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(loaded.alignment[i].caption, original[i].caption);
    EXPECT_EQ(loaded.alignment[i].modality(), original[i].modality());
  }
  const auto rec = read_vqa_jsonl(dir / "vqa.jsonl");
  EXPECT_EQ(rec.size(), 8u);
}

// Full releases, when a copy is available under SURGVL_DATA_ROOT/<name>.
struct Release {
  SourceDataset dataset;
  const char* name;
  long reference;
};

void PrintTo(const Release& r, std::ostream* os) { *os << r.name; }

class RealData : public ::testing::TestWithParam<Release> {};

TEST_P(RealData, TotalsMatchReferenceCountsOrReportDiscrepancy) {
  const char* root = std::getenv("SURGVL_DATA_ROOT");
  const auto [dataset, name, reference] = GetParam();
  if (root == nullptr || !fs::exists(fs::path(root) / name)) {
    GTEST_SKIP() << "SURGVL_DATA_ROOT/" << name << " not present";
  }
  const auto d = load_dataset(dataset, fs::path(root) / name);
  expect_split_invariants(d);
  if (d.manifest.total == reference) {
    EXPECT_TRUE(d.manifest.matches_reference());
    EXPECT_TRUE(d.manifest.discrepancy.empty());
  } else {
    EXPECT_NE(d.manifest.discrepancy.find(std::to_string(reference)), std::string::npos);
  }
}

INSTANTIATE_TEST_SUITE_P(
    Releases, RealData,
    ::testing::Values(Release{SourceDataset::cholec80, "cholec80", kCholec80ReferencePairs},
                      Release{SourceDataset::endovis18, "endovis18", kEndoVis18ReferencePairs},
                      Release{SourceDataset::psiava, "psiava", kPsiAvaReferencePairs}),
    [](const auto& info) { return std::string(info.param.name); });

}  // namespace
}  // namespace surgvl
