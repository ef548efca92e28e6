#pragma once

// Shared test fixtures: tiny model configs and random records.

#include <cstdint>
#include <random>

#include "guidecap/optim.hpp"
#include "guidecap/trainer.hpp"

namespace guidecap::testing {

inline ModelConfig tiny_config(Variant variant) {
  ModelConfig cfg;
  cfg.vocab_size = 12;
  cfg.embed_dim = 6;
  cfg.hidden_dim = 8;
  cfg.annot_dim = 6;
  cfg.annot_count = 4;
  cfg.frequent = 5;
  cfg.variant = variant;
  cfg.review_steps = 3;
  return cfg;
}

inline AnnotationSet random_annotations(const ModelConfig& cfg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::uniform_int_distribution<int> coin(0, 1);
  AnnotationSet set;
  for (std::size_t i = 0; i < cfg.annot_count; ++i) {
    Tensor1 a(cfg.annot_dim);
    for (double& x : a) x = uni(rng);
    set.annots.push_back(std::move(a));
  }
  set.global = AttributePredictor::mean_annotation(set);
  set.attrs = Tensor1(cfg.frequent);
  for (double& x : set.attrs) x = static_cast<double>(coin(rng));
  return set;
}

inline std::vector<int> random_caption(const ModelConfig& cfg, std::size_t content_len,
                                       std::mt19937_64& rng) {
  std::uniform_int_distribution<int> word(3, static_cast<int>(cfg.vocab_size) - 1);
  std::vector<int> caption{Vocabulary::kStart};
  for (std::size_t i = 0; i < content_len; ++i) caption.push_back(word(rng));
  caption.push_back(Vocabulary::kEnd);
  return caption;
}

inline FrequentWordSet prefix_fws(std::size_t count) {
  FrequentWordSet fws;
  for (std::size_t i = 0; i < count; ++i) {
    fws.word_ids.push_back(static_cast<int>(3 + i));
    fws.rank_of.emplace(static_cast<int>(3 + i), static_cast<int>(i));
  }
  return fws;
}

inline Model random_model(const ModelConfig& cfg, std::uint64_t seed) {
  Model m;
  m.cfg = cfg;
  m.params = make_param_store(cfg);
  init_params(m.params, seed);
  for (std::size_t i = 3; i < cfg.vocab_size; ++i)
    m.vocab.add("w" + std::string(1, static_cast<char>('a' + (i - 3) % 26)) +
                    std::to_string(i),
                10);
  m.fws = prefix_fws(cfg.frequent);
  return m;
}

}  // namespace guidecap::testing
