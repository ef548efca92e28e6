#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "guidecap/errors.hpp"

namespace guidecap {

/// Dense vector of doubles.
struct Tensor1 {
  std::vector<double> v;

  Tensor1() = default;
  explicit Tensor1(std::size_t n, double fill = 0.0) : v(n, fill) {}
  explicit Tensor1(std::vector<double> xs) : v(std::move(xs)) {}
  Tensor1(std::initializer_list<double> xs) : v(xs) {}

  std::size_t size() const { return v.size(); }
  bool empty() const { return v.empty(); }
  double& operator[](std::size_t i) { return v[i]; }
  double operator[](std::size_t i) const { return v[i]; }
  double* data() { return v.data(); }
  const double* data() const { return v.data(); }
  auto begin() { return v.begin(); }
  auto end() { return v.end(); }
  auto begin() const { return v.begin(); }
  auto end() const { return v.end(); }
  bool operator==(const Tensor1&) const = default;
};

/// Dense row-major matrix.
struct Tensor2 {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> v;

  Tensor2() = default;
  Tensor2(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), v(r * c, fill) {}

  double& at(std::size_t r, std::size_t c) { return v[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
  std::span<const double> row(std::size_t r) const {
    return {v.data() + r * cols, cols};
  }
  std::span<double> row(std::size_t r) {
    return {v.data() + r * cols, cols};
  }

  static Tensor2 identity(std::size_t n) {
    Tensor2 m(n, n);
    for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
  }
  bool operator==(const Tensor2&) const = default;
};

inline void ensure_finite(const char* label, std::span<const double> xs) {
  for (double x : xs) {
    if (!std::isfinite(x)) {
      throw NumericError(std::string(label) + ": produced a non-finite value");
    }
  }
}

inline std::string shape_of(const Tensor2& m) {
  return std::to_string(m.rows) + "x" + std::to_string(m.cols);
}

/// out[i] = sum_j W[i,j]*x[j] + b[i]
inline Tensor1 affine(const Tensor2& W, const Tensor1& x, const Tensor1& b) {
  if (W.cols != x.size() || W.rows != b.size()) {
    throw DimensionError("affine: W " + shape_of(W) + ", x len " +
                         std::to_string(x.size()) + ", b len " +
                         std::to_string(b.size()));
  }
  Tensor1 out(W.rows);
  for (std::size_t r = 0; r < W.rows; ++r) {
    double acc = b[r];
    const double* wr = W.v.data() + r * W.cols;
    for (std::size_t c = 0; c < W.cols; ++c) acc += wr[c] * x[c];
    out[r] = acc;
  }
  ensure_finite("affine", out.v);
  return out;
}

/// Max-shifted softmax; the result sums to one.
inline Tensor1 softmax(const Tensor1& z) {
  if (z.empty()) throw DimensionError("softmax: empty input");
  const double m = *std::max_element(z.begin(), z.end());
  Tensor1 out(z.size());
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = std::exp(z[i] - m);
    total += out[i];
  }
  for (double& p : out) p /= total;
  ensure_finite("softmax", out.v);
  return out;
}

/// Element-wise maximum across a set of equally sized vectors. Ties go to the
/// lowest list index so the backward routing is deterministic.
inline Tensor1 elementwise_max_pool(const std::vector<Tensor1>& xs,
                                    std::vector<std::size_t>* winners = nullptr) {
  if (xs.empty()) throw DimensionError("elementwise_max_pool: empty input list");
  const std::size_t dim = xs.front().size();
  for (const Tensor1& x : xs) {
    if (x.size() != dim) {
      throw DimensionError("elementwise_max_pool: ragged member lengths " +
                           std::to_string(dim) + " vs " + std::to_string(x.size()));
    }
  }
  Tensor1 out(dim);
  if (winners) winners->assign(dim, 0);
  for (std::size_t d = 0; d < dim; ++d) {
    double best = xs[0][d];
    std::size_t who = 0;
    for (std::size_t i = 1; i < xs.size(); ++i) {
      if (xs[i][d] > best) {
        best = xs[i][d];
        who = i;
      }
    }
    out[d] = best;
    if (winners) (*winners)[d] = who;
  }
  ensure_finite("elementwise_max_pool", out.v);
  return out;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace guidecap
