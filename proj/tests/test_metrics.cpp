#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "guidecap/metrics.hpp"
#include "oracles.hpp"

using namespace guidecap;
using guidecap::testing::brute_bleu;
using guidecap::testing::brute_cider;
using guidecap::testing::brute_rouge_l;

namespace {

EvalInput mini_suite() {
  EvalInput input;
  input.image_ids = {"img_a", "img_b", "img_c"};
  input.candidates = {{"a", "dog", "runs", "in", "grass"},
                      {"the", "cat", "sat", "on", "a", "mat"},
                      {"two", "birds", "fly", "over", "water"}};
  input.references = {
      {{"a", "dog", "runs", "through", "green", "grass"},
       {"the", "dog", "is", "running", "in", "the", "grass"}},
      {{"a", "cat", "sitting", "on", "a", "mat"}, {"the", "cat", "sat", "on", "the", "mat"}},
      {{"birds", "flying", "over", "the", "water"},
       {"two", "birds", "glide", "over", "a", "lake"}}};
  return input;
}

EvalInput identical_pairs() {
  EvalInput input;
  input.image_ids = {"x", "y"};
  input.candidates = {{"a", "red", "ball", "bounces"}, {"the", "tall", "tree", "stands"}};
  input.references = {{{"a", "red", "ball", "bounces"}}, {{"the", "tall", "tree", "stands"}}};
  return input;
}

}  // namespace

TEST_CASE("perfect candidates score one across metrics and ten on cider") {
  const EvalInput input = identical_pairs();
  for (std::size_t n = 1; n <= 4; ++n) CHECK(bleu(input, n) == 1.0);
  CHECK(rouge_l(input) == 1.0);
  CHECK(std::abs(cider(input) - 10.0) <= 1e-9);
}

TEST_CASE("bleu clipping and brevity follow the corpus formula") {
  EvalInput input;
  input.image_ids = {"img"};
  input.candidates = {{"the", "the", "the", "the"}};
  input.references = {{{"the", "cat"}}};
  // the reference holds a single "the", so the clipped unigram count is 1 of
  // 4; the candidate is longer than the reference, so no brevity penalty
  CHECK(bleu(input, 1) == Catch::Approx(0.25).margin(1e-12));
  CHECK(bleu(input, 1) ==
        Catch::Approx(brute_bleu(input.candidates, input.references, 1)).margin(1e-12));
  // a reference with a doubled "the" raises the clip ceiling
  input.references = {{{"the", "cat", "the", "mat"}}};
  CHECK(bleu(input, 1) == Catch::Approx(0.5).margin(1e-12));

  // short candidates do get penalized
  EvalInput brief;
  brief.image_ids = {"img"};
  brief.candidates = {{"the", "cat"}};
  brief.references = {{{"the", "cat", "sat", "on", "the", "mat"}}};
  CHECK(bleu(brief, 1) == Catch::Approx(std::exp(1.0 - 6.0 / 2.0)).margin(1e-12));

  EvalInput disjoint;
  disjoint.image_ids = {"img"};
  disjoint.candidates = {{"dog", "runs"}};
  disjoint.references = {{{"cat", "sits"}}};
  for (std::size_t n = 1; n <= 4; ++n) CHECK(bleu(disjoint, n) == 0.0);
}

TEST_CASE("rouge-l matches the hand-computed f-measure") {
  EvalInput input;
  input.image_ids = {"img"};
  input.candidates = {{"a", "b", "c"}};
  input.references = {{{"a", "x", "c"}}};
  CHECK(rouge_l(input) == Catch::Approx(2.0 / 3.0).margin(1e-12));

  EvalInput none;
  none.image_ids = {"img"};
  none.candidates = {{"a", "b"}};
  none.references = {{{"x", "y"}}};
  CHECK(rouge_l(none) == 0.0);

  EvalInput empty_cand;
  empty_cand.image_ids = {"img", "img2"};
  empty_cand.candidates = {{}, {"x", "y"}};
  empty_cand.references = {{{"x", "y"}}, {{"x", "y"}}};
  CHECK(rouge_l(empty_cand) == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("the mini suite matches independent brute-force computations") {
  const EvalInput input = mini_suite();
  for (std::size_t n = 1; n <= 4; ++n)
    CHECK(bleu(input, n) ==
          Catch::Approx(brute_bleu(input.candidates, input.references, n)).margin(1e-6));
  CHECK(rouge_l(input) ==
        Catch::Approx(brute_rouge_l(input.candidates, input.references)).margin(1e-6));
  std::vector<double> per_image;
  CHECK(cider(input, &per_image) ==
        Catch::Approx(brute_cider(input.candidates, input.references)).margin(1e-6));
  CHECK(per_image.size() == input.size());
}

TEST_CASE("cider needs a corpus and rewards shared rare n-grams") {
  EvalInput single;
  single.image_ids = {"only"};
  single.candidates = {{"a", "b", "c", "d"}};
  single.references = {{{"a", "b", "c", "d"}}};
  CHECK_THROWS_AS(cider(single), DataError);

  EvalInput nothing_shared;
  nothing_shared.image_ids = {"p", "q"};
  nothing_shared.candidates = {{"u", "v", "w", "x"}, {"m", "n", "o", "p"}};
  nothing_shared.references = {{{"a", "b", "c", "d"}}, {{"e", "f", "g", "h"}}};
  CHECK(cider(nothing_shared) == 0.0);
}

TEST_CASE("metrics ignore evaluation-set ordering") {
  EvalInput input = mini_suite();
  EvalInput reversed = input;
  std::reverse(reversed.image_ids.begin(), reversed.image_ids.end());
  std::reverse(reversed.candidates.begin(), reversed.candidates.end());
  std::reverse(reversed.references.begin(), reversed.references.end());
  for (std::size_t n = 1; n <= 4; ++n)
    CHECK(bleu(input, n) == Catch::Approx(bleu(reversed, n)).margin(1e-12));
  CHECK(rouge_l(input) == Catch::Approx(rouge_l(reversed)).margin(1e-12));
  CHECK(cider(input) == Catch::Approx(cider(reversed)).margin(1e-12));
}

TEST_CASE("appending a reference never lowers clipped bleu counts") {
  std::mt19937_64 rng(31);
  const std::vector<std::string> words{"a", "b", "c", "d", "e"};
  std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1);
  std::uniform_int_distribution<std::size_t> len(1, 8);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t ref_len = len(rng);
    auto sentence = [&](std::size_t n) {
      std::vector<std::string> s(n);
      for (auto& w : s) w = words[pick(rng)];
      return s;
    };
    EvalInput input;
    input.image_ids = {"img"};
    input.candidates = {sentence(len(rng))};
    input.references = {{sentence(ref_len)}};
    const double before = bleu(input, 1);
    // same-length extra reference: the brevity penalty is untouched, so the
    // clipped-count monotonicity shows up directly in the score
    input.references[0].push_back(sentence(ref_len));
    CHECK(bleu(input, 1) >= before - 1e-12);
  }
}

TEST_CASE("distinct word counts skip reserved markers") {
  CHECK(distinct_words({{"a", "dog"}, {"a", "cat"}}) == 3);
  CHECK(distinct_words({}) == 0);
  CHECK(distinct_words({{"<s>", "a", "</s>", "<unk>"}}) == 1);
}

TEST_CASE("evaluation reports aggregate every metric") {
  const EvalInput input = mini_suite();
  const EvalReport report = evaluate_all(input);
  CHECK(report.bleu1 > 0.0);
  CHECK(report.bleu4 >= 0.0);
  CHECK(report.rouge_l > 0.0);
  CHECK(report.cider > 0.0);
  CHECK(report.distinct_words == 15);
  CHECK(report.per_image_cider.size() == 3);

  std::ostringstream os;
  write_report(os, report);
  CHECK(os.str().find("bleu1=") != std::string::npos);
  CHECK(os.str().find("distinct_words=15") != std::string::npos);
  CHECK(os.str().find("img_b=") != std::string::npos);
}
