// Copyright 2026 The surgvl Authors
// SPDX-License-Identifier: Apache-2.0
//
// Seeded synthetic corpora and untrained models for training-level tests.

#pragma once

#include "surgvl/dataset.hpp"
#include "surgvl/pipeline.hpp"
#include "surgvl/run_config.hpp"
#include "test_support.hpp"

namespace surgvl::testing {

/// configs/toy.cfg as shipped.
inline RunConfig toy_config() {
  return apply_key_values(read_key_values(source_dir() / "configs" / "toy.cfg"));
}

/// Narrow model for finite-difference checks, where every parameter entry
/// costs two forward passes.
inline RunConfig narrow_config() {
  return apply_key_values({{"seed", "5"},
                           {"model.embed_dim", "6"},
                           {"model.lm_width", "8"},
                           {"model.lm_layers", "1"},
                           {"model.lm_heads", "2"},
                           {"model.lm_mlp_hidden", "8"},
                           {"model.image_height", "4"},
                           {"model.image_width", "4"},
                           {"model.lm_init_std", "0.3"},
                           {"synthetic.videos", "2"},
                           {"synthetic.frames", "3"},
                           {"synthetic.images", "2"}});
}

struct ToyWorld {
  SyntheticCorpus synthetic;
  TrainingCorpus corpus;
};

inline ToyWorld make_world(const RunConfig& config) {
  ToyWorld w;
  w.synthetic = make_synthetic_corpus(config.seed, config.synthetic);
  w.corpus.alignment = w.synthetic.alignment_samples();
  w.corpus.instructions = w.synthetic.instruction_samples();
  return w;
}

inline Assistant model_for(const RunConfig& config, const ToyWorld& world) {
  const auto texts = tokenizer_texts(world.corpus, world.synthetic.records);
  return build_assistant(config, texts);
}

}  // namespace surgvl::testing
