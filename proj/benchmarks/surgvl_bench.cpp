// Copyright 2026 The surgvl Authors
// SPDX-License-Identifier: Apache-2.0
//
// Microbenchmarks for the hot paths: pooling, the contrastive loss, a
// language-model forward pass and one training step of each stage.

#include <benchmark/benchmark.h>

#include <algorithm>
#include <filesystem>
#include <vector>

#include "surgvl/contrastive.hpp"
#include "surgvl/dataset.hpp"
#include "surgvl/pipeline.hpp"
#include "surgvl/rng.hpp"
#include "surgvl/run_config.hpp"
#include "surgvl/training.hpp"
#include "surgvl/visual_encoding.hpp"

namespace {

using surgvl::Matrix;

Matrix random_matrix(surgvl::Rng& rng, int rows, int cols) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

surgvl::RunConfig toy_config() {
  const auto path = std::filesystem::path(SURGVL_SOURCE_DIR) / "configs" / "toy.cfg";
  return surgvl::apply_key_values(surgvl::read_key_values(path));
}

struct Toy {
  surgvl::SyntheticCorpus synthetic;
  surgvl::TrainingCorpus corpus;
  surgvl::RunConfig config;
};

Toy make_toy() {
  Toy t;
  t.config = toy_config();
  t.synthetic = surgvl::make_synthetic_corpus(t.config.seed, t.config.synthetic);
  t.corpus.alignment = t.synthetic.alignment_samples();
  t.corpus.instructions = t.synthetic.instruction_samples();
  return t;
}

surgvl::Assistant make_model(const Toy& t) {
  const auto texts = surgvl::tokenizer_texts(t.corpus, t.synthetic.records);
  return surgvl::build_assistant(t.config, texts);
}

// Args: frames T, patches N, channels D.
void BM_VideoFeatures(benchmark::State& state) {
  surgvl::Rng rng(1);
  surgvl::PatchEmbeddings pe;
  for (int t = 0; t < state.range(0); ++t) {
    pe.frames.push_back(random_matrix(rng, static_cast<int>(state.range(1)),
                                      static_cast<int>(state.range(2))));
  }
  for (auto _ : state) benchmark::DoNotOptimize(surgvl::video_features(pe));
}
BENCHMARK(BM_VideoFeatures)->Args({8, 4, 32})->Args({32, 16, 64})->Args({100, 256, 64});

void BM_M2TLossAndGradient(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  surgvl::Rng rng(2);
  surgvl::EmbeddingBatch batch;
  batch.modality_vecs = surgvl::normalize_embeddings(random_matrix(rng, k, 64));
  batch.text_vecs = surgvl::normalize_embeddings(random_matrix(rng, k, 64));
  batch.temperature = 0.07;
  for (auto _ : state) benchmark::DoNotOptimize(surgvl::m2t_loss_and_gradient(batch));
}
BENCHMARK(BM_M2TLossAndGradient)->Arg(8)->Arg(64)->Arg(256);

void BM_LanguageModelForward(benchmark::State& state) {
  const Toy t = make_toy();
  const auto model = make_model(t);
  const auto& lm = model.language_model();
  std::vector<int> ids(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i) % lm.vocab_size();
  for (auto _ : state) {
    benchmark::DoNotOptimize(lm.logits(lm.hidden_states(lm.embed_tokens(ids))).value());
  }
}
BENCHMARK(BM_LanguageModelForward)->Arg(16)->Arg(64);

void BM_Stage1Step(benchmark::State& state) {
  const Toy t = make_toy();
  surgvl::TrainState ts(make_model(t));
  const auto batch = surgvl::build_joint_batch(t.corpus.alignment, static_cast<std::size_t>(t.config.align.batch_size), 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        surgvl::stage1_align_step(ts, t.corpus.alignment, batch, t.config.align));
  }
}
BENCHMARK(BM_Stage1Step)->Unit(benchmark::kMillisecond);

void BM_Stage2Step(benchmark::State& state) {
  const Toy t = make_toy();
  surgvl::TrainState ts(make_model(t));
  const auto examples = surgvl::prepare_examples(ts.model, t.corpus.instructions);
  const auto n = std::min(examples.size(), static_cast<std::size_t>(t.config.instruct.batch_size));
  const std::vector<surgvl::PreparedExample> batch(examples.begin(), examples.begin() + static_cast<std::ptrdiff_t>(n));
  for (auto _ : state) {
    benchmark::DoNotOptimize(surgvl::stage2_instruct_step(ts, batch, t.config.instruct));
  }
}
BENCHMARK(BM_Stage2Step)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
