#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "guidecap/corpus.hpp"
#include "guidecap/optim.hpp"
#include "guidecap/tape.hpp"

namespace guidecap {

enum class AttributeMode { kOracle, kPredicted, kZero };

inline const char* attribute_mode_name(AttributeMode m) {
  switch (m) {
    case AttributeMode::kOracle: return "oracle";
    case AttributeMode::kPredicted: return "predicted";
    case AttributeMode::kZero: return "zero";
  }
  return "oracle";
}

inline AttributeMode attribute_mode_from(const std::string& s) {
  if (s == "oracle") return AttributeMode::kOracle;
  if (s == "predicted") return AttributeMode::kPredicted;
  if (s == "zero") return AttributeMode::kZero;
  throw ConfigError("unknown attribute mode '" + s + "'");
}

/// Stand-in for a region-wise word occurrence model: one logistic layer from
/// the mean annotation vector to per-word occurrence probabilities, trained
/// against oracle indicators.
class AttributePredictor {
 public:
  static constexpr const char* kW = "attr_W";
  static constexpr const char* kB = "attr_b";

  AttributePredictor() = default;

  AttributePredictor(std::size_t annot_dim, std::size_t frequent, std::uint64_t seed) {
    store_.add_matrix(kW, frequent, annot_dim);
    store_.add_vector(kB, frequent, /*is_bias=*/true);
    init_params(store_, seed);
  }

  bool trained() const { return trained_; }
  const ParamStore& params() const { return store_; }
  ParamStore& params() { return store_; }

  struct TrainSettings {
    double lr = 0.01;
    double weight_decay = 1e-4;
    double eps = 1e-8;
    std::size_t epochs = 50;
    std::size_t batch_size = 16;
    std::uint64_t seed = 1;
  };

  /// Returns the final epoch's mean per-word binary cross-entropy.
  double train(const std::vector<const CaptionRecord*>& records, const FrequentWordSet& fws,
               const TrainSettings& settings) {
    if (records.empty()) throw DataError("attribute predictor: empty training set");
    std::vector<std::vector<double>> targets;
    targets.reserve(records.size());
    for (const CaptionRecord* rec : records) {
      std::vector<char> mask(fws.size(), 0);
      for (const auto& cap : rec->captions)
        for (int id : cap) {
          const int r = fws.rank(id);
          if (r >= 0) mask[static_cast<std::size_t>(r)] = 1;
        }
      targets.emplace_back(mask.begin(), mask.end());
    }
    std::mt19937_64 rng(settings.seed);
    std::vector<std::size_t> order(records.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    double epoch_loss = 0.0;
    for (std::size_t epoch = 0; epoch < settings.epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng);
      epoch_loss = 0.0;
      for (std::size_t start = 0; start < order.size(); start += settings.batch_size) {
        const std::size_t stop = std::min(order.size(), start + settings.batch_size);
        const double inv = 1.0 / static_cast<double>(stop - start);
        for (std::size_t i = start; i < stop; ++i) {
          Tape tape(store_);
          const std::size_t idx = order[i];
          Tape::NodeId x = tape.constant(mean_annotation(records[idx]->annotations));
          Tape::NodeId logits = tape.affine(kW, x, kB);
          epoch_loss += tape.bce_logits(logits, targets[idx], 1.0);
          tape.backward(store_, inv);
        }
        adagrad_step(store_, settings.lr, settings.weight_decay, settings.eps);
      }
      epoch_loss /= static_cast<double>(records.size());
    }
    if (settings.epochs > 0 && !std::isfinite(epoch_loss))
      throw NumericError("attribute predictor: non-finite training loss");
    trained_ = settings.epochs > 0;
    return epoch_loss;
  }

  /// Per-word occurrence probabilities, strictly inside (0,1).
  Tensor1 predict(const AnnotationSet& annotations) const {
    const auto& w = store_.at(kW);
    const Tensor1 x = mean_annotation(annotations);
    if (x.size() != w.cols)
      throw DimensionError("attribute predictor: annotation dim " + std::to_string(x.size()) +
                           ", expected " + std::to_string(w.cols));
    const auto& b = store_.at(kB);
    Tensor1 out(w.rows);
    for (std::size_t r = 0; r < w.rows; ++r) {
      double z = b.value[r];
      for (std::size_t c = 0; c < w.cols; ++c) z += w.value[r * w.cols + c] * x[c];
      out[r] = sigmoid(z);
    }
    return out;
  }

  void mark_trained() { trained_ = true; }

  static Tensor1 mean_annotation(const AnnotationSet& annotations) {
    if (annotations.annots.empty())
      throw DimensionError("attribute predictor: record has no annotation vectors");
    Tensor1 m(annotations.annots.front().size());
    for (const Tensor1& a : annotations.annots)
      for (std::size_t d = 0; d < m.size(); ++d) m[d] += a[d];
    for (double& x : m) x /= static_cast<double>(annotations.annots.size());
    return m;
  }

 private:
  ParamStore store_;
  bool trained_ = false;
};

/// The attribute vector a record feeds the guiding network: oracle occurrence
/// indicators, predictor probabilities, or a zero vector (ablation arm).
inline Tensor1 attribute_vector(const CaptionRecord& record, const FrequentWordSet& fws,
                                AttributeMode mode,
                                const AttributePredictor* predictor = nullptr) {
  switch (mode) {
    case AttributeMode::kZero:
      return Tensor1(fws.size());
    case AttributeMode::kOracle: {
      Tensor1 e(fws.size());
      for (const auto& cap : record.captions) {
        for (int id : cap) {
          const int r = fws.rank(id);
          if (r >= 0) e[static_cast<std::size_t>(r)] = 1.0;
        }
      }
      return e;
    }
    case AttributeMode::kPredicted: {
      if (!predictor || !predictor->trained())
        throw StateError("attribute_vector: predicted mode without a trained predictor");
      return predictor->predict(record.annotations);
    }
  }
  throw StateError("attribute_vector: bad mode");
}

/// Fill every record's attribute vector according to the mode.
inline void apply_attribute_mode(Corpus& corpus, AttributeMode mode,
                                 const AttributePredictor* predictor = nullptr) {
  for (auto* split : {&corpus.data.train, &corpus.data.val, &corpus.data.test})
    for (CaptionRecord& rec : *split)
      rec.annotations.attrs = attribute_vector(rec, corpus.fws, mode, predictor);
}

}  // namespace guidecap
