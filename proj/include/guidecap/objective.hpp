#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "guidecap/errors.hpp"
#include "guidecap/tensor.hpp"

namespace guidecap {

inline constexpr double kLogFloor = 1e-300;

inline double clamped_neg_log(double p) { return -std::log(std::max(p, kLogFloor)); }

/// One evaluated objective: language-model term, the two discriminative
/// terms (the second is zero outside the review variant) and their weighted
/// total. `total` is always assembled from the components so the identity
/// total = nll + l1*dis1 + l2*dis2 holds exactly.
struct LossBreakdown {
  double nll = 0.0;
  double dis1 = 0.0;
  double dis2 = 0.0;
  double total = 0.0;
  std::vector<double> token_nll;

  static LossBreakdown assemble(double nll, double dis1, double dis2, double lambda1,
                                double lambda2, std::vector<double> token_nll = {}) {
    LossBreakdown out;
    out.nll = nll;
    out.dis1 = dis1;
    out.dis2 = dis2;
    out.total = nll + lambda1 * dis1 + lambda2 * dis2;
    out.token_nll = std::move(token_nll);
    return out;
  }
};

/// Negative log-likelihood of the targets under per-step distributions.
inline std::pair<double, std::vector<double>> nll_loss(const std::vector<Tensor1>& dists,
                                                       std::span<const int> targets) {
  if (dists.size() != targets.size())
    throw DataError("nll_loss: " + std::to_string(dists.size()) + " distributions for " +
                    std::to_string(targets.size()) + " targets");
  std::vector<double> per_token;
  per_token.reserve(dists.size());
  double total = 0.0;
  for (std::size_t t = 0; t < dists.size(); ++t) {
    const int y = targets[t];
    if (y < 0 || static_cast<std::size_t>(y) >= dists[t].size())
      throw IndexError("nll_loss: target " + std::to_string(y) + " out of range");
    const double v = clamped_neg_log(dists[t][static_cast<std::size_t>(y)]);
    per_token.push_back(v);
    total += v;
  }
  return {total, per_token};
}

inline LossBreakdown total_loss_soft(double nll, double dis, double lambda,
                                     std::vector<double> token_nll = {}) {
  if (lambda < 0) throw ConfigError("total_loss_soft: lambda must be >= 0");
  return LossBreakdown::assemble(nll, dis, 0.0, lambda, 0.0, std::move(token_nll));
}

inline LossBreakdown total_loss_review(double nll, double dis1, double dis2, double lambda1,
                                       double lambda2, std::vector<double> token_nll = {}) {
  if (lambda1 < 0 || lambda2 < 0)
    throw ConfigError("total_loss_review: lambdas must be >= 0");
  return LossBreakdown::assemble(nll, dis1, dis2, lambda1, lambda2, std::move(token_nll));
}

}  // namespace guidecap
