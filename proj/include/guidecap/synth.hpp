#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "guidecap/corpus.hpp"
#include "guidecap/errors.hpp"

namespace guidecap {

/// Synthetic corpus settings. Each record draws 1..4 latent concepts; its
/// annotation vectors are the concept embeddings plus Gaussian noise, padded
/// with noise-only vectors up to annot_count; captions are grammar-generated
/// sentences that always mention every drawn concept by name.
struct SynthConfig {
  std::size_t concepts = 10;
  std::size_t annot_dim = 16;
  std::size_t annot_count = 6;
  std::size_t train_records = 200;
  std::size_t val_records = 50;
  std::size_t test_records = 50;
  std::size_t captions_per_record = 3;
  double noise = 0.05;

  bool operator==(const SynthConfig&) const = default;
};

/// Deterministic pseudo-words: pairwise distinct, purely alphabetic.
inline std::vector<std::string> synth_concept_words(std::size_t count) {
  static const char* first[] = {"ba", "de", "ki", "lo", "mu", "na", "po", "ri",
                                "su", "ta", "ve", "zo"};
  static const char* second[] = {"ra", "ne", "to", "mi", "la", "ko", "du", "si",
                                 "fa", "pe", "wu", "ga"};
  std::vector<std::string> words;
  words.reserve(count);
  for (std::size_t i = 0; words.size() < count; ++i) {
    std::string w = std::string(first[i % 12]) + second[(i / 12) % 12];
    if (i >= 144) w += first[(i / 144) % 12];
    words.push_back(w);
  }
  return words;
}

namespace detail {

// Word order is sampled, but which words appear is a deterministic function
// of the drawn concept set: the attribute oracle must be predictable from
// the annotation vectors for the surrogate predictor to have a fit target.
inline std::string synth_caption(const std::vector<std::string>& concept_words,
                                 std::vector<std::size_t> drawn, std::mt19937_64& rng) {
  std::shuffle(drawn.begin(), drawn.end(), rng);
  std::string caption;
  for (std::size_t i = 0; i < drawn.size(); ++i) {
    if (i) caption += " and ";
    caption += drawn[i] % 2 == 0 ? "a" : "the";
    caption += ' ';
    caption += concept_words[drawn[i]];
  }
  return caption;
}

inline std::vector<CaptionRecord> synth_records(const SynthConfig& cfg,
                                                const std::vector<Tensor1>& embeddings,
                                                const std::vector<std::string>& words,
                                                const std::string& id_prefix,
                                                std::size_t count, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  const std::size_t max_draw = std::min<std::size_t>({4, cfg.concepts, cfg.annot_count});
  std::uniform_int_distribution<std::size_t> n_pick(1, max_draw);
  std::vector<CaptionRecord> records;
  records.reserve(count);
  for (std::size_t r = 0; r < count; ++r) {
    CaptionRecord rec;
    rec.image_id = id_prefix + std::to_string(r);
    std::vector<std::size_t> pool(cfg.concepts);
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
    std::shuffle(pool.begin(), pool.end(), rng);
    const std::size_t n = n_pick(rng);
    std::vector<std::size_t> drawn(pool.begin(), pool.begin() + static_cast<long>(n));
    for (std::size_t i = 0; i < cfg.annot_count; ++i) {
      Tensor1 a(cfg.annot_dim);
      for (std::size_t d = 0; d < cfg.annot_dim; ++d) {
        const double jitter = cfg.noise * gauss(rng);
        a[d] = (i < n ? embeddings[drawn[i]][d] : 0.0) + jitter;
      }
      rec.annotations.annots.push_back(std::move(a));
    }
    Tensor1 global(cfg.annot_dim);
    for (const Tensor1& a : rec.annotations.annots)
      for (std::size_t d = 0; d < cfg.annot_dim; ++d) global[d] += a[d];
    for (std::size_t d = 0; d < cfg.annot_dim; ++d)
      global[d] /= static_cast<double>(cfg.annot_count);
    rec.annotations.global = std::move(global);
    for (std::size_t c = 0; c < cfg.captions_per_record; ++c)
      rec.raw_captions.push_back(synth_caption(words, drawn, rng));
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace detail

/// Deterministic under (cfg, seed): two calls produce identical splits.
inline DatasetSplit synth_generate(const SynthConfig& cfg, std::uint64_t seed) {
  if (cfg.concepts == 0 || cfg.annot_dim == 0 || cfg.annot_count == 0 ||
      cfg.train_records == 0 || cfg.val_records == 0 || cfg.test_records == 0 ||
      cfg.captions_per_record == 0) {
    throw ConfigError("synth_generate: zero-sized dimension or record count");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::vector<Tensor1> embeddings;
  for (std::size_t c = 0; c < cfg.concepts; ++c) {
    Tensor1 e(cfg.annot_dim);
    for (double& x : e) x = uni(rng);
    embeddings.push_back(std::move(e));
  }
  const std::vector<std::string> words = synth_concept_words(cfg.concepts);
  DatasetSplit split;
  split.train = detail::synth_records(cfg, embeddings, words, "synth_train_",
                                      cfg.train_records, rng);
  split.val = detail::synth_records(cfg, embeddings, words, "synth_val_",
                                    cfg.val_records, rng);
  split.test = detail::synth_records(cfg, embeddings, words, "synth_test_",
                                     cfg.test_records, rng);
  return split;
}

}  // namespace guidecap
