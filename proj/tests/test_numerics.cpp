#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <random>

#include "guidecap/finite_diff.hpp"
#include "guidecap/optim.hpp"
#include "guidecap/tape.hpp"
#include "guidecap/tensor.hpp"

using namespace guidecap;

namespace {

// Compare taped backward against finite differences for a loss builder. The
// builder reads parameters through whatever store its tape was built over,
// so the same closure serves both passes.
double max_grad_error(const ParamStore& params,
                      const std::function<void(Tape&)>& build) {
  ParamStore analytic = params;
  Tape tape(analytic);
  build(tape);
  tape.backward(analytic, 1.0);
  const ParamStore numeric = finite_diff_grad(
      [&build](const ParamStore& p) {
        Tape t(p);
        build(t);
        return t.loss();
      },
      analytic, 1e-6);
  double worst = 0.0;
  for (const GradCheckRow& row : compare_grads(analytic, numeric))
    worst = std::max(worst, row.max_rel_err);
  return worst;
}

}  // namespace

TEST_CASE("affine matches hand-computed products") {
  Tensor2 eye = Tensor2::identity(2);
  CHECK(affine(eye, {3, 4}, {0, 0}) == Tensor1{3, 4});

  Tensor2 w(2, 2);
  w.at(0, 0) = 1;
  w.at(0, 1) = 1;
  w.at(1, 0) = 0;
  w.at(1, 1) = 2;
  CHECK(affine(w, {1, 2}, {1, 0}) == Tensor1{4, 4});

  Tensor2 zeros(2, 2);
  CHECK(affine(zeros, {5, 6}, {7, 8}) == Tensor1{7, 8});

  CHECK_THROWS_AS(affine(eye, {1, 2, 3}, {0, 0}), DimensionError);
  CHECK_THROWS_AS(affine(eye, {1, 2}, {0, 0, 0}), DimensionError);
}

TEST_CASE("softmax handles symmetry, closed forms and large inputs") {
  const Tensor1 sym = softmax({0, 0});
  CHECK(sym[0] == Catch::Approx(0.5));
  CHECK(sym[1] == Catch::Approx(0.5));

  const Tensor1 closed = softmax({std::log(2.0), 0.0});
  CHECK(closed[0] == Catch::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(closed[1] == Catch::Approx(1.0 / 3.0).epsilon(1e-12));

  const Tensor1 big = softmax({1000.0, 0.0});
  CHECK(big[0] == Catch::Approx(1.0));
  CHECK(big[1] >= 0.0);
  CHECK(std::isfinite(big[0]));

  CHECK_THROWS_AS(softmax(Tensor1{}), DimensionError);
}

TEST_CASE("softmax normalizes over random draws") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> len(1, 64);
  std::uniform_real_distribution<double> val(-30.0, 30.0);
  for (int trial = 0; trial < 1000; ++trial) {
    Tensor1 z(len(rng));
    for (double& x : z) x = val(rng);
    const Tensor1 p = softmax(z);
    double sum = 0.0;
    for (double x : p) {
      CHECK(x > 0.0);
      CHECK(x <= 1.0);
      sum += x;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-9);
  }
}

TEST_CASE("elementwise max pool picks per-dimension winners") {
  std::vector<std::size_t> winners;
  CHECK(elementwise_max_pool({{1, 5}, {3, 2}}, &winners) == Tensor1{3, 5});
  CHECK(winners == std::vector<std::size_t>{1, 0});

  CHECK(elementwise_max_pool({{7, 7}}) == Tensor1{7, 7});

  CHECK(elementwise_max_pool({{1, 2}, {1, 2}}, &winners) == Tensor1{1, 2});
  CHECK(winners == std::vector<std::size_t>{0, 0});

  CHECK_THROWS_AS(elementwise_max_pool({}), DimensionError);
  CHECK_THROWS_AS(elementwise_max_pool({{1, 2}, {1}}), DimensionError);
}

TEST_CASE("elementwise max pool value is permutation invariant") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> val(-2.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Tensor1> xs(4, Tensor1(6));
    for (auto& x : xs)
      for (double& e : x) e = val(rng);
    const Tensor1 base = elementwise_max_pool(xs);
    std::shuffle(xs.begin(), xs.end(), rng);
    CHECK(elementwise_max_pool(xs) == base);
  }
}

TEST_CASE("finite differences recover analytic derivatives") {
  ParamStore store;
  store.add_vector("theta", 1);
  store.at("theta").value[0] = 3.0;
  const ParamStore squared = finite_diff_grad(
      [](const ParamStore& p) {
        const double x = p.at("theta").value[0];
        return x * x;
      },
      store, 1e-5);
  CHECK(squared.at("theta").grad[0] == Catch::Approx(6.0).margin(1e-5));

  ParamStore several;
  several.add_vector("a", 3);
  several.add_matrix("b", 2, 2);
  const ParamStore constant =
      finite_diff_grad([](const ParamStore&) { return 42.0; }, several, 1e-5);
  for (const auto& [name, e] : constant.entries())
    for (double g : e.grad) CHECK(g == 0.0);

  const ParamStore sum = finite_diff_grad(
      [](const ParamStore& p) {
        double total = 0.0;
        for (const auto& [name, e] : p.entries())
          for (double x : e.value) total += x;
        return total;
      },
      several, 1e-5);
  for (const auto& [name, e] : sum.entries())
    for (double g : e.grad) CHECK(g == Catch::Approx(1.0).margin(1e-6));

  CHECK_THROWS_AS(finite_diff_grad([](const ParamStore&) { return 0.0; }, store, 0.0),
                  ConfigError);
  CHECK_THROWS_WITH(
      finite_diff_grad(
          [](const ParamStore&) { return std::numeric_limits<double>::quiet_NaN(); }, store,
          1e-5),
      Catch::Matchers::ContainsSubstring("theta"));
}

TEST_CASE("taped affine and activations match finite differences") {
  ParamStore params;
  params.add_matrix("W", 3, 4);
  params.add_vector("b", 3, true);
  init_params(params, 21);
  const Tensor1 x{0.3, -0.8, 1.2, 0.05};
  const double err = max_grad_error(params, [&x](Tape& t) {
    const Tape::NodeId xn = t.constant(x);
    const Tape::NodeId y = t.tanh_op(t.affine("W", xn, "b"));
    const Tape::NodeId z = t.sigmoid_op(y);
    t.nll_pick(t.softmax_op(z), 1, 1.0);
  });
  CHECK(err <= 1e-4);
}

TEST_CASE("taped elementwise ops match finite differences") {
  ParamStore params;
  params.add_vector("u", 5);
  params.add_vector("v", 5);
  init_params(params, 22);
  const double err = max_grad_error(params, [](Tape& t) {
    const Tape::NodeId u = t.param_vector("u");
    const Tape::NodeId v = t.param_vector("v");
    const Tape::NodeId prod = t.mul(u, t.add(v, t.tanh_op(u)));
    t.nll_pick(t.softmax_op(prod), 2, 1.0);
  });
  CHECK(err <= 1e-4);
}

TEST_CASE("taped max pool, concat, slice and weighted sum match finite differences") {
  ParamStore params;
  params.add_vector("p", 4);
  params.add_vector("q", 4);
  params.add_vector("alpha_source", 2);
  init_params(params, 23);
  const double err = max_grad_error(params, [](Tape& t) {
    const Tape::NodeId p = t.param_vector("p");
    const Tape::NodeId q = t.param_vector("q");
    const std::array<Tape::NodeId, 2> pooled{p, q};
    const Tape::NodeId mx = t.max_pool(pooled);
    const std::array<Tape::NodeId, 2> pieces{t.slice(mx, 0, 2), t.slice(mx, 2, 2)};
    const Tape::NodeId cat = t.concat(pieces);
    const Tape::NodeId alpha = t.softmax_op(t.param_vector("alpha_source"));
    const std::array<Tape::NodeId, 2> items{cat, t.mul(p, q)};
    const Tape::NodeId mix = t.weighted_sum(alpha, items);
    t.nll_pick(t.softmax_op(mix), 0, 1.0);
  });
  CHECK(err <= 1e-4);
}

TEST_CASE("taped embedding rows, dots and mean match finite differences") {
  ParamStore params;
  params.add_matrix("E", 6, 5);
  params.add_vector("w", 5);
  init_params(params, 24);
  const double err = max_grad_error(params, [](Tape& t) {
    const Tape::NodeId r2 = t.embedding_row("E", 2);
    const Tape::NodeId r4 = t.embedding_row("E", 4);
    const std::array<Tape::NodeId, 2> rows{r2, r4};
    const Tape::NodeId m = t.mean_of(rows);
    const std::array<Tape::NodeId, 3> items{r2, r4, m};
    const Tape::NodeId scores = t.dots_with("w", items);
    t.nll_pick(t.softmax_op(scores), 1, 1.0);
  });
  CHECK(err <= 1e-4);
}

TEST_CASE("embedding row gradient flows only to the selected row") {
  ParamStore params;
  params.add_matrix("E", 4, 3);
  init_params(params, 25);
  Tape tape(params);
  tape.nll_pick(tape.softmax_op(tape.embedding_row("E", 1)), 0, 1.0);
  tape.backward(params, 1.0);
  const auto& e = params.at("E");
  for (std::size_t r = 0; r < e.rows; ++r)
    for (std::size_t c = 0; c < e.cols; ++c)
      if (r != 1) CHECK(e.grad[r * e.cols + c] == 0.0);
  CHECK_THROWS_AS(Tape(params).embedding_row("E", 9), IndexError);
}

TEST_CASE("taped hinge and bce losses match finite differences") {
  ParamStore params;
  params.add_vector("scores", 5);
  init_params(params, 26);
  for (double& x : params.at("scores").value) x *= 3.0;  // keep clear of the hinge kinks
  const std::vector<char> positive{1, 0, 0, 1, 0};
  const double hinge_err = max_grad_error(params, [&positive](Tape& t) {
    t.hinge_rank(t.param_vector("scores"), positive, 2.5);
  });
  CHECK(hinge_err <= 1e-4);

  ParamStore bce_params;
  bce_params.add_vector("logits", 4);
  init_params(bce_params, 27);
  const std::vector<double> targets{1.0, 0.0, 1.0, 0.0};
  const double bce_err = max_grad_error(bce_params, [&targets](Tape& t) {
    t.bce_logits(t.param_vector("logits"), targets, 1.5);
  });
  CHECK(bce_err <= 1e-4);
}

TEST_CASE("tape rejects a foreign store at backward time") {
  ParamStore a, b;
  a.add_vector("x", 2);
  b.add_vector("x", 2);
  Tape tape(a);
  tape.param_vector("x");
  CHECK_THROWS_AS(tape.backward(b, 1.0), StateError);
}

TEST_CASE("non-finite op results are reported") {
  ParamStore params;
  params.add_matrix("W", 1, 1);
  params.at("W").value[0] = std::numeric_limits<double>::infinity();
  Tape tape(params);
  const Tape::NodeId x = tape.constant(Tensor1{2.0});
  CHECK_THROWS_AS(tape.matvec("W", x), NumericError);
}
