#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "guidecap/param_store.hpp"

namespace guidecap {

/// Weights i.i.d. uniform on [-0.1, 0.1]; biases zero. Draw order follows the
/// store's name order, so a seed pins the whole initialization.
inline void init_params(ParamStore& params, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-0.1, 0.1);
  for (auto& [name, e] : params.entries()) {
    if (e.is_bias) {
      std::fill(e.value.begin(), e.value.end(), 0.0);
    } else {
      for (double& x : e.value) x = uni(rng);
    }
    std::fill(e.grad.begin(), e.grad.end(), 0.0);
    std::fill(e.accum.begin(), e.accum.end(), 0.0);
  }
}

/// One AdaGrad update over the whole store. Weight decay is added to the raw
/// gradient for non-bias tensors only; accumulators grow by the squared
/// effective gradient; gradients are cleared afterwards.
inline void adagrad_step(ParamStore& params, double lr, double weight_decay,
                         double eps = 1e-8) {
  for (auto& [name, e] : params.entries()) {
    const bool decay = !e.is_bias && weight_decay != 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) {
      double g = e.grad[i];
      if (!std::isfinite(g))
        throw NumericError("adagrad_step: non-finite gradient in tensor '" + name + "'");
      if (decay) g += weight_decay * e.value[i];
      e.accum[i] += g * g;
      if (g != 0.0) e.value[i] -= lr * g / (std::sqrt(e.accum[i]) + eps);
      e.grad[i] = 0.0;
    }
  }
}

}  // namespace guidecap
