#pragma once
#include <limits>

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "guidecap/param_store.hpp"

namespace guidecap {

using LossFn = std::function<double(const ParamStore&)>;

/// Central finite differences of `loss` with respect to every scalar in
/// `params`. Returns a copy of the store whose grad buffers hold the
/// numerical derivatives. This is the verification oracle; it never touches
/// the taped backward path.
inline ParamStore finite_diff_grad(const LossFn& loss, const ParamStore& params, double h) {
  if (!(h > 0.0)) throw ConfigError("finite_diff_grad: step must be positive");
  ParamStore work = params;
  for (auto& [name, e] : work.entries()) {
    for (std::size_t i = 0; i < e.size(); ++i) {
      const double saved = e.value[i];
      e.value[i] = saved + h;
      const double up = loss(work);
      e.value[i] = saved - h;
      const double down = loss(work);
      e.value[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down))
        throw NumericError("finite_diff_grad: non-finite loss at '" + name + "'[" +
                           std::to_string(i) + "]");
      e.grad[i] = (up - down) / (2.0 * h);
    }
  }
  return work;
}

inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max(1e-8, std::abs(a) + std::abs(b));
}

/// Central difference over a shrinking step cascade, returning the first
/// step pair that agrees to near machine precision. Large steps carry the
/// least cancellation noise but may straddle a hinge kink or a pooling
/// switch; small steps are smooth but noisy. Scanning from the large end and
/// accepting the first consistent pair picks the quietest step that is
/// provably on one smooth piece. Falls back to the globally most consistent
/// pair when nothing meets the threshold.
template <class Probe>
double consistent_central_diff(const Probe& central_diff_at, double h0) {
  constexpr double kContract = 1.4;
  constexpr int kLevels = 18;
  double fd[kLevels];
  double h = h0;
  for (int k = 0; k < kLevels; ++k) {
    fd[k] = central_diff_at(h);
    h /= kContract;
  }
  int best = 0;
  double best_gap = std::numeric_limits<double>::max();
  for (int k = 0; k + 1 < kLevels; ++k) {
    const double gap = std::abs(fd[k] - fd[k + 1]);
    if (gap <= 1e-12 || gap <= 1e-7 * (std::abs(fd[k]) + std::abs(fd[k + 1])))
      return fd[k + 1];
    if (gap < best_gap) {
      best_gap = gap;
      best = k;
    }
  }
  return fd[best + 1];
}

struct GradCheckRow {
  std::string tensor;
  double max_rel_err = 0.0;
};

/// Per-tensor maximum relative error between two stores' grad buffers.
inline std::vector<GradCheckRow> compare_grads(const ParamStore& analytic,
                                               const ParamStore& numeric) {
  std::vector<GradCheckRow> rows;
  for (const auto& [name, e] : analytic.entries()) {
    const auto& n = numeric.at(name);
    double worst = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i)
      worst = std::max(worst, relative_error(e.grad[i], n.grad[i]));
    rows.push_back({name, worst});
  }
  return rows;
}

}  // namespace guidecap
