#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <sstream>

#include "fixtures.hpp"
#include "guidecap/synth.hpp"
#include "guidecap/trainer.hpp"

using namespace guidecap;
using guidecap::testing::tiny_config;

TEST_CASE("parameter initialization draws uniform weights and zero biases") {
  const ModelConfig cfg = tiny_config(Variant::kSoftAttention);
  ParamStore a = make_param_store(cfg);
  init_params(a, 99);
  for (const auto& [name, e] : a.entries()) {
    for (double x : e.value) {
      CHECK(x >= -0.1);
      CHECK(x <= 0.1);
      if (e.is_bias) CHECK(x == 0.0);
    }
  }
  ParamStore b = make_param_store(cfg);
  init_params(b, 99);
  CHECK(a.to_string() == b.to_string());
  ParamStore c = make_param_store(cfg);
  init_params(c, 100);
  CHECK(a.to_string() != c.to_string());
}

TEST_CASE("adagrad first step and no-op behavior") {
  ParamStore store;
  store.add_vector("theta", 1);
  store.at("theta").value[0] = 1.0;
  store.at("theta").grad[0] = 3.0;
  adagrad_step(store, 0.01, 0.0, 0.0);
  CHECK(store.at("theta").value[0] == Catch::Approx(1.0 - 0.01).margin(1e-15));
  CHECK(store.at("theta").grad[0] == 0.0);
  CHECK(store.at("theta").accum[0] == 9.0);

  ParamStore idle;
  idle.add_vector("theta", 1);
  idle.at("theta").value[0] = 0.5;
  adagrad_step(idle, 0.01, 0.0);
  CHECK(idle.at("theta").value[0] == 0.5);
  CHECK(idle.at("theta").accum[0] == 0.0);
}

TEST_CASE("adagrad steps shrink with the accumulator") {
  ParamStore store;
  store.add_vector("theta", 1);
  double prev_step = std::numeric_limits<double>::infinity();
  double prev_value = store.at("theta").value[0];
  double prev_accum = 0.0;
  for (int n = 1; n <= 10; ++n) {
    store.at("theta").grad[0] = 2.0;
    adagrad_step(store, 0.05, 0.0, 0.0);
    const double step = std::abs(store.at("theta").value[0] - prev_value);
    // closed form: lr*g / sqrt(n*g*g) = lr / sqrt(n)
    CHECK(step == Catch::Approx(0.05 / std::sqrt(static_cast<double>(n))).epsilon(1e-12));
    CHECK(step < prev_step);
    CHECK(store.at("theta").accum[0] > prev_accum);
    prev_step = step;
    prev_value = store.at("theta").value[0];
    prev_accum = store.at("theta").accum[0];
  }
}

TEST_CASE("weight decay applies to weights but never biases") {
  ParamStore store;
  store.add_vector("w", 1);
  store.add_vector("b", 1, /*is_bias=*/true);
  store.at("w").value[0] = 2.0;
  store.at("b").value[0] = 2.0;
  adagrad_step(store, 0.1, 0.01);
  CHECK(store.at("w").value[0] < 2.0);
  CHECK(store.at("b").value[0] == 2.0);
}

TEST_CASE("adagrad rejects non-finite gradients by name") {
  ParamStore store;
  store.add_vector("broken", 1);
  store.at("broken").grad[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH(adagrad_step(store, 0.01, 0.0),
                    Catch::Matchers::ContainsSubstring("broken"));
}

TEST_CASE("early stopper follows the patience rule") {
  EarlyStopper stopper{1};
  CHECK_FALSE(stopper.observe(0.5));  // epoch 1, new best
  CHECK(stopper.observe(0.4));        // epoch 2, no improvement -> stop
  CHECK(stopper.best_epoch == 1);

  EarlyStopper lenient{2};
  CHECK_FALSE(lenient.observe(0.5));
  CHECK_FALSE(lenient.observe(0.4));
  CHECK(lenient.observe(0.45));
  CHECK(lenient.best_epoch == 1);

  EarlyStopper improving{1};
  CHECK_FALSE(improving.observe(0.1));
  CHECK_FALSE(improving.observe(0.2));
  CHECK_FALSE(improving.observe(0.3));
  CHECK(improving.best_epoch == 3);
}

namespace {

Corpus trainer_corpus(std::uint64_t seed) {
  SynthConfig cfg;
  cfg.concepts = 5;
  cfg.annot_dim = 6;
  cfg.annot_count = 3;
  cfg.train_records = 12;
  cfg.val_records = 4;
  cfg.test_records = 2;
  cfg.captions_per_record = 2;
  Corpus corpus = build_corpus(synth_generate(cfg, seed), 1, 50);
  apply_attribute_mode(corpus, AttributeMode::kOracle);
  return corpus;
}

}  // namespace

TEST_CASE("training is deterministic and tracks the best validation epoch") {
  const Corpus corpus = trainer_corpus(21);
  ModelConfig mcfg;
  mcfg.embed_dim = 8;
  mcfg.hidden_dim = 10;
  mcfg.variant = Variant::kSoftAttention;
  TrainConfig tcfg;
  tcfg.max_epochs = 4;
  tcfg.patience = 10;
  tcfg.batch_size = 8;
  tcfg.seed = 5;

  const TrainOutcome a = train(corpus, mcfg, tcfg);
  const TrainOutcome b = train(corpus, mcfg, tcfg);
  std::ostringstream ra, rb;
  write_train_report(ra, a.report);
  write_train_report(rb, b.report);
  CHECK(ra.str() == rb.str());
  CHECK(a.model.params.to_string() == b.model.params.to_string());

  REQUIRE(!a.report.epochs.empty());
  double best = -1.0;
  std::size_t best_epoch = 0;
  for (std::size_t i = 0; i < a.report.epochs.size(); ++i) {
    if (a.report.epochs[i].val_cider > best) {
      best = a.report.epochs[i].val_cider;
      best_epoch = i + 1;
    }
  }
  CHECK(a.report.best_epoch == best_epoch);
  CHECK((a.report.stopping_reason == "patience" || a.report.stopping_reason == "max_epochs"));

  // per-pair loss identity holds for the reported means
  for (const EpochStats& e : a.report.epochs) {
    CHECK(std::abs(e.train_loss.total -
                   (e.train_loss.nll + tcfg.lambda1 * e.train_loss.dis1 +
                    tcfg.lambda2 * e.train_loss.dis2)) <= 1e-12);
  }
}

TEST_CASE("adagrad accumulators never decrease during training") {
  const Corpus corpus = trainer_corpus(22);
  ModelConfig mcfg;
  mcfg.embed_dim = 6;
  mcfg.hidden_dim = 8;
  mcfg.variant = Variant::kSoftAttention;
  mcfg.vocab_size = corpus.vocab.size();
  mcfg.frequent = corpus.fws.size();
  mcfg.annot_dim = 6;
  mcfg.annot_count = 3;
  ParamStore params = make_param_store(mcfg);
  init_params(params, 7);
  const FrequentWordSet& fws = corpus.fws;
  std::vector<double> last_accum(params.scalar_count(), 0.0);
  for (int step = 0; step < 5; ++step) {
    for (const CaptionRecord& rec : corpus.data.train) {
      Tape tape(params);
      forward_soft_attention(tape, mcfg, rec.annotations, rec.captions.front(), fws, {},
                             GuideDrive::kLearned, {1.0, 10.0, 0.0});
      tape.backward(params, 1.0);
    }
    adagrad_step(params, 0.01, 1e-4);
    std::size_t i = 0;
    for (const auto& [name, e] : params.entries())
      for (double acc : e.accum) {
        CHECK(acc >= last_accum[i]);
        last_accum[i++] = acc;
      }
  }
}

TEST_CASE("gradient check harness validates both variants and flags corruption") {
  for (const Variant variant : {Variant::kSoftAttention, Variant::kReviewNet}) {
    GradCheckConfig gc;
    gc.model = tiny_config(variant);
    gc.seed = 17;
    const GradCheckReport report = grad_check(gc);
    CHECK_FALSE(report.rows.empty());
    INFO(variant_name(variant));
    CHECK(report.passed(1e-4));
  }

  GradCheckConfig corrupted;
  corrupted.model = tiny_config(Variant::kSoftAttention);
  corrupted.seed = 17;
  corrupted.corrupt_tensor = pname::kGuideProjW;
  const GradCheckReport report = grad_check(corrupted);
  double err = 0.0;
  for (const GradCheckRow& row : report.rows)
    if (row.tensor == pname::kGuideProjW) err = row.max_rel_err;
  CHECK(err >= 1e-2);
}

TEST_CASE("comparing empty stores yields an empty report") {
  ParamStore empty;
  const ParamStore numeric =
      finite_diff_grad([](const ParamStore&) { return 1.0; }, empty, 1e-5);
  CHECK(compare_grads(empty, numeric).empty());
}

TEST_CASE("training aborts with location on non-finite loss") {
  Corpus corpus = trainer_corpus(23);
  ModelConfig mcfg;
  mcfg.variant = Variant::kSoftAttention;
  TrainConfig tcfg;
  tcfg.max_epochs = 1;
  // poison one annotation vector; the forward pass reports it as non-finite
  corpus.data.train.front().annotations.annots.front()[0] =
      std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(train(corpus, mcfg, tcfg), NumericError);
}
