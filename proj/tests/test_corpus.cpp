#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <sstream>

#include "guidecap/attributes.hpp"
#include "guidecap/corpus.hpp"
#include "guidecap/synth.hpp"

using namespace guidecap;

TEST_CASE("caption preprocessing strips, lowercases and truncates") {
  CHECK(preprocess_caption("A Dog, runs!") ==
        std::vector<std::string>{"a", "dog", "runs"});
  CHECK(preprocess_caption("123").empty());

  std::string long_caption;
  for (int i = 0; i < 35; ++i) long_caption += "tok ";
  CHECK(preprocess_caption(long_caption).size() == 30);
}

TEST_CASE("caption preprocessing is idempotent") {
  const std::vector<std::string> raws = {"A Dog, runs!", "x9y z", "  many   spaces ",
                                         "ALL CAPS HERE", "don't stop-me now"};
  for (const std::string& raw : raws) {
    const auto once = preprocess_caption(raw);
    std::string joined;
    for (const auto& t : once) joined += t + " ";
    CHECK(preprocess_caption(joined) == once);
  }
}

TEST_CASE("vocabulary keeps tokens meeting the count threshold") {
  const std::vector<std::vector<std::string>> corpus = {{"a", "a", "a"}, {"a", "b"}};
  const Vocabulary vocab = build_vocabulary(corpus, 2);
  CHECK(vocab.size() == 4);  // three reserved plus "a"
  CHECK(vocab.contains("a"));
  CHECK(vocab.id_or_unk("b") == Vocabulary::kUnk);

  const Vocabulary keep_all = build_vocabulary(corpus, 1);
  CHECK(keep_all.contains("a"));
  CHECK(keep_all.contains("b"));

  CHECK_THROWS_AS(build_vocabulary({}, 1), DataError);
  CHECK_THROWS_AS(build_vocabulary({{}, {}}, 1), DataError);
}

TEST_CASE("vocabulary ids round-trip") {
  const std::vector<std::vector<std::string>> corpus = {
      {"dog", "dog", "cat", "sat", "mat", "dog", "cat"}};
  const Vocabulary vocab = build_vocabulary(corpus, 1);
  for (std::size_t id = 0; id < vocab.size(); ++id)
    CHECK(vocab.id_or_unk(vocab.token(static_cast<int>(id))) == static_cast<int>(id));
  CHECK_THROWS_AS(vocab.token(static_cast<int>(vocab.size())), IndexError);
}

TEST_CASE("frequent words order by count then alphabet") {
  std::vector<std::vector<std::string>> corpus;
  for (int i = 0; i < 5; ++i) corpus.push_back({"dog"});
  for (int i = 0; i < 3; ++i) corpus.push_back({"cat", "sat"});
  const Vocabulary vocab = build_vocabulary(corpus, 1);
  const FrequentWordSet top2 = frequent_words(corpus, vocab, 2);
  REQUIRE(top2.size() == 2);
  CHECK(vocab.token(top2.word_ids[0]) == "dog");
  CHECK(vocab.token(top2.word_ids[1]) == "cat");
  CHECK_FALSE(top2.truncated);

  const FrequentWordSet all = frequent_words(corpus, vocab, 50);
  CHECK(all.size() == 3);
  CHECK(all.truncated);
}

TEST_CASE("synthetic generation is deterministic and respects counts") {
  SynthConfig cfg;
  cfg.concepts = 10;
  cfg.annot_dim = 16;
  cfg.annot_count = 6;
  cfg.train_records = 200;
  cfg.val_records = 50;
  cfg.test_records = 50;
  const DatasetSplit a = synth_generate(cfg, 3);
  const DatasetSplit b = synth_generate(cfg, 3);
  CHECK(a.train.size() == 200);
  CHECK(a.val.size() == 50);
  CHECK(a.test.size() == 50);

  std::ostringstream sa, sb;
  write_dataset(sa, a.train);
  write_dataset(sb, b.train);
  CHECK(sa.str() == sb.str());

  std::set<std::string> ids;
  for (const auto* split : {&a.train, &a.val, &a.test})
    for (const auto& rec : *split) CHECK(ids.insert(rec.image_id).second);

  SynthConfig bad = cfg;
  bad.annot_dim = 0;
  CHECK_THROWS_AS(synth_generate(bad, 3), ConfigError);
}

TEST_CASE("noise-free single-concept records expose the concept embedding") {
  SynthConfig cfg;
  cfg.concepts = 1;
  cfg.annot_dim = 4;
  cfg.annot_count = 3;
  cfg.train_records = 5;
  cfg.val_records = 2;
  cfg.test_records = 2;
  cfg.noise = 0.0;
  const DatasetSplit split = synth_generate(cfg, 9);
  // every record draws the single concept; its first annotation vector is the
  // exact embedding and repeats across records
  const Tensor1& embedding = split.train.front().annotations.annots.front();
  for (const CaptionRecord& rec : split.train)
    CHECK(rec.annotations.annots.front() == embedding);
}

TEST_CASE("dataset files round-trip") {
  SynthConfig cfg;
  cfg.concepts = 4;
  cfg.annot_dim = 3;
  cfg.annot_count = 2;
  cfg.train_records = 6;
  cfg.val_records = 2;
  cfg.test_records = 2;
  const DatasetSplit split = synth_generate(cfg, 17);
  std::ostringstream os;
  write_dataset(os, split.train);
  std::istringstream is(os.str());
  const std::vector<CaptionRecord> back = read_dataset(is);
  REQUIRE(back.size() == split.train.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].image_id == split.train[i].image_id);
    CHECK(back[i].annotations.global == split.train[i].annotations.global);
    REQUIRE(back[i].annotations.annots.size() == split.train[i].annotations.annots.size());
    for (std::size_t k = 0; k < back[i].annotations.annots.size(); ++k)
      CHECK(back[i].annotations.annots[k] == split.train[i].annotations.annots[k]);
    CHECK(back[i].raw_captions == split.train[i].raw_captions);
  }

  std::istringstream broken("id_only\n");
  CHECK_THROWS_AS(read_dataset(broken), DataError);
}

namespace {

Corpus small_corpus(double noise, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.concepts = 6;
  cfg.annot_dim = 8;
  cfg.annot_count = 4;
  cfg.train_records = 60;
  cfg.val_records = 8;
  cfg.test_records = 8;
  cfg.noise = noise;
  return build_corpus(synth_generate(cfg, seed), 1, 50);
}

}  // namespace

TEST_CASE("oracle attribute vectors are binary occurrence indicators") {
  Corpus corpus = small_corpus(0.05, 4);
  const CaptionRecord& rec = corpus.data.train.front();
  const Tensor1 oracle = attribute_vector(rec, corpus.fws, AttributeMode::kOracle);
  REQUIRE(oracle.size() == corpus.fws.size());
  for (std::size_t r = 0; r < oracle.size(); ++r) {
    bool present = false;
    for (const auto& cap : rec.captions)
      for (int id : cap) present = present || id == corpus.fws.word_ids[r];
    CHECK(oracle[r] == (present ? 1.0 : 0.0));
  }

  const Tensor1 zero = attribute_vector(rec, corpus.fws, AttributeMode::kZero);
  for (double x : zero) CHECK(x == 0.0);

  CHECK_THROWS_AS(attribute_vector(rec, corpus.fws, AttributeMode::kPredicted, nullptr),
                  StateError);
  AttributePredictor untrained(8, corpus.fws.size(), 1);
  CHECK_THROWS_AS(attribute_vector(rec, corpus.fws, AttributeMode::kPredicted, &untrained),
                  StateError);
}

TEST_CASE("attribute predictor fits noise-free data and stays in (0,1)") {
  Corpus corpus = small_corpus(0.0, 8);
  std::vector<const CaptionRecord*> recs;
  for (const auto& r : corpus.data.train) recs.push_back(&r);

  AttributePredictor fresh(8, corpus.fws.size(), 3);
  for (double& x : fresh.params().at(AttributePredictor::kW).value) x = 0.0;
  const Tensor1 prior = fresh.predict(corpus.data.train.front().annotations);
  for (double p : prior) CHECK(p == Catch::Approx(0.5).margin(1e-12));

  AttributePredictor predictor(8, corpus.fws.size(), 3);
  AttributePredictor::TrainSettings settings;
  // AdaGrad at lr 0.01 moves a coordinate by roughly 2*lr*sqrt(updates), so
  // pushing the logits past +-3 takes tens of thousands of updates
  settings.epochs = 500;
  settings.batch_size = 1;
  settings.seed = 3;
  const double final_bce = predictor.train(recs, corpus.fws, settings);
  CHECK(final_bce < 0.1);
  CHECK(predictor.trained());
  const Tensor1 probs = predictor.predict(corpus.data.train.front().annotations);
  for (double p : probs) {
    CHECK(p > 0.0);
    CHECK(p < 1.0);
  }

  AttributePredictor again(8, corpus.fws.size(), 3);
  AttributePredictor::TrainSettings quick = settings;
  quick.epochs = 20;
  AttributePredictor third(8, corpus.fws.size(), 3);
  const double a = again.train(recs, corpus.fws, quick);
  const double b = third.train(recs, corpus.fws, quick);
  CHECK(a == b);
}

TEST_CASE("corpus building encodes captions within the length budget") {
  Corpus corpus = small_corpus(0.05, 12);
  CHECK(corpus.dropped_captions == 0);
  for (const auto* split :
       {&corpus.data.train, &corpus.data.val, &corpus.data.test}) {
    for (const CaptionRecord& rec : *split) {
      CHECK_FALSE(rec.captions.empty());
      for (const auto& cap : rec.captions) {
        CHECK(cap.size() <= kMaxCaptionTokens + 2);
        CHECK(cap.front() == Vocabulary::kStart);
        CHECK(cap.back() == Vocabulary::kEnd);
        for (int id : cap) CHECK(id < static_cast<int>(corpus.vocab.size()));
      }
    }
  }
}
