#pragma once

#include <algorithm>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "guidecap/decode.hpp"
#include "guidecap/finite_diff.hpp"
#include "guidecap/metrics.hpp"
#include "guidecap/optim.hpp"
#include "guidecap/review.hpp"
#include "guidecap/synth.hpp"

namespace guidecap {

struct TrainConfig {
  double lr = 0.01;
  double weight_decay = 1e-4;
  double lambda1 = 10.0;
  double lambda2 = 10.0;
  double adagrad_eps = 1e-8;
  std::size_t max_epochs = 30;
  std::size_t patience = 10;
  std::size_t batch_size = 16;
  std::uint64_t seed = 1;
  AttributeMode attribute_mode = AttributeMode::kOracle;
  GuideMasks masks;
  std::size_t decode_max_len = 30;
};

struct EpochStats {
  LossBreakdown train_loss;  // per-pair means, total re-assembled from them
  LossBreakdown val_loss;
  double val_token_nll = 0.0;
  double val_cider = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  std::size_t best_epoch = 0;  // 1-based
  std::string stopping_reason;
};

struct TrainOutcome {
  Model model;
  TrainReport report;
};

// Loss history as line-oriented text: epoch, split, nll, dis1, dis2, total,
// plus validation series and the stopping summary.
inline void write_train_report(std::ostream& os, const TrainReport& r) {
  os << std::setprecision(17);
  os << "# epoch split nll dis1 dis2 total\n";
  for (std::size_t i = 0; i < r.epochs.size(); ++i) {
    const EpochStats& e = r.epochs[i];
    os << "epoch " << (i + 1) << " train " << e.train_loss.nll << ' ' << e.train_loss.dis1
       << ' ' << e.train_loss.dis2 << ' ' << e.train_loss.total << '\n';
    os << "epoch " << (i + 1) << " val " << e.val_loss.nll << ' ' << e.val_loss.dis1 << ' '
       << e.val_loss.dis2 << ' ' << e.val_loss.total << '\n';
    os << "epoch " << (i + 1) << " val_token_nll " << e.val_token_nll << '\n';
    os << "epoch " << (i + 1) << " val_cider " << e.val_cider << '\n';
  }
  os << "best_epoch " << r.best_epoch << '\n';
  os << "stopping_reason " << r.stopping_reason << '\n';
}

/// Patience-window early stopping on a maximized series. observe() returns
/// true when the series has not improved for `patience` observations.
struct EarlyStopper {
  std::size_t patience = 10;
  double best = -std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;  // 1-based
  std::size_t seen = 0;

  bool observe(double value) {
    ++seen;
    if (value > best) {
      best = value;
      best_epoch = seen;
    }
    return seen - best_epoch >= patience;
  }
};

namespace detail_train {

struct Pair {
  std::size_t record;
  std::size_t caption;
};

inline std::vector<Pair> collect_pairs(const std::vector<CaptionRecord>& records) {
  std::vector<Pair> pairs;
  for (std::size_t r = 0; r < records.size(); ++r)
    for (std::size_t c = 0; c < records[r].captions.size(); ++c) pairs.push_back({r, c});
  return pairs;
}

struct SplitEval {
  LossBreakdown mean_loss;
  double token_nll = 0.0;
};

inline SplitEval evaluate_split(const Model& model, const std::vector<CaptionRecord>& records,
                                const LossWeights& weights) {
  double nll = 0.0, dis1 = 0.0, dis2 = 0.0, tokens = 0.0, token_nll_sum = 0.0;
  std::size_t pairs = 0;
  for (const CaptionRecord& rec : records) {
    for (const auto& caption : rec.captions) {
      Tape tape(model.params);
      const ForwardResult fr = forward_pair(tape, model.cfg, rec.annotations, caption,
                                            model.fws, model.masks, GuideDrive::kLearned,
                                            weights);
      nll += fr.loss.nll;
      dis1 += fr.loss.dis1;
      dis2 += fr.loss.dis2;
      tokens += static_cast<double>(fr.loss.token_nll.size());
      token_nll_sum += fr.loss.nll;
      ++pairs;
    }
  }
  SplitEval out;
  if (pairs > 0) {
    const double inv = 1.0 / static_cast<double>(pairs);
    out.mean_loss = LossBreakdown::assemble(nll * inv, dis1 * inv, dis2 * inv, weights.dis1,
                                            weights.dis2);
    out.token_nll = tokens > 0.0 ? token_nll_sum / tokens : 0.0;
  }
  return out;
}

inline std::vector<std::vector<std::vector<std::string>>> reference_tokens(
    const std::vector<CaptionRecord>& records) {
  std::vector<std::vector<std::vector<std::string>>> refs;
  refs.reserve(records.size());
  for (const CaptionRecord& rec : records) {
    std::vector<std::vector<std::string>> per_image;
    for (const std::string& raw : rec.raw_captions) {
      auto toks = preprocess_caption(raw);
      if (!toks.empty()) per_image.push_back(std::move(toks));
    }
    refs.push_back(std::move(per_image));
  }
  return refs;
}

inline double validation_cider(const Model& model, const std::vector<CaptionRecord>& records,
                               const std::vector<std::vector<std::vector<std::string>>>& refs,
                               std::size_t max_len) {
  EvalInput input;
  const ModelStepper stepper(model);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const std::vector<int> tokens = greedy_decode(stepper, records[i].annotations, max_len);
    std::vector<std::string> words;
    words.reserve(tokens.size());
    for (int id : tokens) words.push_back(model.vocab.token(id));
    input.image_ids.push_back(records[i].image_id);
    input.candidates.push_back(std::move(words));
    input.references.push_back(refs[i]);
  }
  return cider(input);
}

}  // namespace detail_train

/// Teacher-forced training with AdaGrad and early stopping on validation
/// CIDEr. Per-pair losses are summed over tokens; batch gradients are
/// averaged over pairs. Returns the parameters of the best-CIDEr epoch.
inline TrainOutcome train(const Corpus& corpus, ModelConfig mcfg, const TrainConfig& tcfg) {
  if (tcfg.lr <= 0.0) throw ConfigError("train: learning rate must be > 0");
  if (tcfg.patience < 1) throw ConfigError("train: patience must be >= 1");
  if (tcfg.batch_size < 1) throw ConfigError("train: batch size must be >= 1");
  if (corpus.data.train.empty()) throw DataError("train: empty training split");
  if (corpus.data.val.size() < 2)
    throw DataError("train: validation split needs at least two records for CIDEr");

  mcfg.vocab_size = corpus.vocab.size();
  mcfg.frequent = corpus.fws.size();
  mcfg.annot_count = corpus.data.train.front().annotations.annots.size();
  mcfg.annot_dim = corpus.data.train.front().annotations.annots.front().size();

  TrainOutcome out;
  out.model.cfg = mcfg;
  out.model.vocab = corpus.vocab;
  out.model.fws = corpus.fws;
  out.model.attribute_mode = tcfg.attribute_mode;
  out.model.masks = tcfg.masks;
  out.model.params = make_param_store(mcfg);
  init_params(out.model.params, tcfg.seed);

  const LossWeights weights{1.0, tcfg.lambda1, tcfg.lambda2};
  const auto pairs_template = detail_train::collect_pairs(corpus.data.train);
  if (pairs_template.empty()) throw DataError("train: no usable training captions");
  const auto val_refs = detail_train::reference_tokens(corpus.data.val);

  std::mt19937_64 shuffle_rng(tcfg.seed);
  std::vector<detail_train::Pair> pairs = pairs_template;
  ParamStore best_params = out.model.params;
  EarlyStopper stopper{tcfg.patience};

  for (std::size_t epoch = 1; epoch <= tcfg.max_epochs; ++epoch) {
    std::shuffle(pairs.begin(), pairs.end(), shuffle_rng);
    double nll = 0.0, dis1 = 0.0, dis2 = 0.0;
    for (std::size_t start = 0; start < pairs.size(); start += tcfg.batch_size) {
      const std::size_t stop = std::min(pairs.size(), start + tcfg.batch_size);
      const double inv = 1.0 / static_cast<double>(stop - start);
      for (std::size_t i = start; i < stop; ++i) {
        const CaptionRecord& rec = corpus.data.train[pairs[i].record];
        Tape tape(out.model.params);
        const ForwardResult fr =
            forward_pair(tape, mcfg, rec.annotations, rec.captions[pairs[i].caption],
                         corpus.fws, tcfg.masks, GuideDrive::kLearned, weights);
        if (!std::isfinite(fr.loss.total))
          throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                             ", batch " + std::to_string(start / tcfg.batch_size));
        nll += fr.loss.nll;
        dis1 += fr.loss.dis1;
        dis2 += fr.loss.dis2;
        tape.backward(out.model.params, inv);
      }
      adagrad_step(out.model.params, tcfg.lr, tcfg.weight_decay, tcfg.adagrad_eps);
    }

    EpochStats stats;
    const double inv_pairs = 1.0 / static_cast<double>(pairs.size());
    stats.train_loss = LossBreakdown::assemble(nll * inv_pairs, dis1 * inv_pairs,
                                               dis2 * inv_pairs, weights.dis1, weights.dis2);
    const detail_train::SplitEval val =
        detail_train::evaluate_split(out.model, corpus.data.val, weights);
    stats.val_loss = val.mean_loss;
    stats.val_token_nll = val.token_nll;
    stats.val_cider = detail_train::validation_cider(out.model, corpus.data.val, val_refs,
                                                     tcfg.decode_max_len);
    out.report.epochs.push_back(stats);

    const bool stop = stopper.observe(stats.val_cider);
    if (stopper.best_epoch == epoch) best_params = out.model.params;
    out.report.best_epoch = stopper.best_epoch;
    if (stop) {
      out.report.stopping_reason = "patience";
      break;
    }
  }
  if (out.report.stopping_reason.empty()) out.report.stopping_reason = "max_epochs";
  out.model.params = std::move(best_params);
  return out;
}

// ---------------------------------------------------------------------------
// Gradient check: taped backward vs central finite differences on one random
// record, for either variant.

struct GradCheckConfig {
  ModelConfig model;
  std::uint64_t seed = 7;
  double step = 0.02;  // initial step of the extrapolation tableau
  LossWeights weights{1.0, 10.0, 10.0};
  GuideMasks masks;
  std::string corrupt_tensor;  // harness self-test: perturb this tensor's backward
  std::size_t caption_len = 6;
};

struct GradCheckReport {
  std::vector<GradCheckRow> rows;

  double max_rel_err() const {
    double worst = 0.0;
    for (const GradCheckRow& r : rows) worst = std::max(worst, r.max_rel_err);
    return worst;
  }
  bool passed(double tol) const { return max_rel_err() <= tol; }
};

struct GradCheckFixture {
  AnnotationSet annotations;
  std::vector<int> caption;
  FrequentWordSet fws;
};

inline GradCheckFixture make_grad_check_fixture(const ModelConfig& cfg, std::uint64_t seed,
                                                std::size_t caption_len = 6) {
  if (cfg.vocab_size < 4) throw ConfigError("grad check: vocabulary too small");
  if (cfg.frequent + 3 > cfg.vocab_size)
    throw ConfigError("grad check: frequent-word count exceeds non-reserved vocabulary");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::uniform_int_distribution<int> word(3, static_cast<int>(cfg.vocab_size) - 1);
  std::uniform_int_distribution<int> coin(0, 1);
  GradCheckFixture fx;
  for (std::size_t i = 0; i < cfg.annot_count; ++i) {
    Tensor1 a(cfg.annot_dim);
    for (double& x : a) x = uni(rng);
    fx.annotations.annots.push_back(std::move(a));
  }
  fx.annotations.global = AttributePredictor::mean_annotation(fx.annotations);
  fx.annotations.attrs = Tensor1(cfg.frequent);
  for (double& x : fx.annotations.attrs) x = static_cast<double>(coin(rng));
  for (std::size_t i = 0; i < cfg.frequent; ++i) {
    fx.fws.word_ids.push_back(static_cast<int>(3 + i));
    fx.fws.rank_of.emplace(static_cast<int>(3 + i), static_cast<int>(i));
  }
  fx.caption.push_back(Vocabulary::kStart);
  for (std::size_t i = 0; i < caption_len; ++i) fx.caption.push_back(word(rng));
  fx.caption.push_back(Vocabulary::kEnd);
  return fx;
}

inline GradCheckReport grad_check(const GradCheckConfig& gc) {
  // The loss is differentiable away from pooling switches and hinge kinks,
  // but a random evaluation point can sit arbitrarily close to one (at small
  // initialization the review thought vectors nearly tie, so some closeness
  // is structural). Probe a deterministic series of draws and keep the one
  // with the most clearance.
  GradCheckFixture fx;
  ParamStore params;
  double best_margin = -1.0;
  std::uint64_t best_salt = 0;
  for (std::uint64_t salt = 0; salt < 64; ++salt) {
    const GradCheckFixture cand = make_grad_check_fixture(gc.model, gc.seed + salt,
                                                          gc.caption_len);
    ParamStore cand_params = make_param_store(gc.model);
    init_params(cand_params, gc.seed + salt);
    Tape probe(cand_params);
    const ForwardResult fr = forward_pair(probe, gc.model, cand.annotations, cand.caption,
                                          cand.fws, gc.masks, GuideDrive::kLearned,
                                          gc.weights);
    if (fr.min_kink_margin > best_margin) {
      best_margin = fr.min_kink_margin;
      best_salt = salt;
    }
    if (best_margin > 5e-3) break;
  }
  fx = make_grad_check_fixture(gc.model, gc.seed + best_salt, gc.caption_len);
  params = make_param_store(gc.model);
  init_params(params, gc.seed + best_salt);

  const auto loss_fn = [&](const ParamStore& p) {
    Tape tape(p);
    forward_pair(tape, gc.model, fx.annotations, fx.caption, fx.fws, gc.masks,
                 GuideDrive::kLearned, gc.weights);
    return tape.loss();
  };

  Tape tape(params);
  forward_pair(tape, gc.model, fx.annotations, fx.caption, fx.fws, gc.masks,
               GuideDrive::kLearned, gc.weights);
  tape.backward(params, 1.0);
  if (!gc.corrupt_tensor.empty()) {
    auto& grads = params.at(gc.corrupt_tensor).grad;
    for (double& g : grads) g = g * 1.1 + 0.05;
  }

  // Per-coordinate central differences with Ridders extrapolation. A single
  // step cannot serve every coordinate: cancellation noise is about
  // eps * |loss| / (2h) regardless of the coordinate, while the gradient
  // magnitudes span many orders, so a narrow step drowns the weak
  // coordinates and a wide one biases the curved ones. The tableau tracks
  // its own error and settles per coordinate.
  ParamStore numeric = params;
  for (auto& [name, e] : numeric.entries()) {
    for (std::size_t i = 0; i < e.size(); ++i) {
      const double saved = e.value[i];
      const auto probe = [&](double h) {
        e.value[i] = saved + h;
        const double up = loss_fn(numeric);
        e.value[i] = saved - h;
        const double down = loss_fn(numeric);
        e.value[i] = saved;
        return (up - down) / (2.0 * h);
      };
      e.grad[i] = consistent_central_diff(probe, gc.step);
    }
  }

  GradCheckReport report;
  report.rows = compare_grads(params, numeric);
  return report;
}

}  // namespace guidecap
