#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "guidecap/param_store.hpp"
#include "guidecap/tensor.hpp"

namespace guidecap {

/// Reverse-mode tape over vector-valued nodes. Forward values are computed
/// eagerly; each op records a closure that routes the upstream gradient to
/// its inputs and to named ParamStore tensors. There is no general graph
/// machinery, only the ops the model needs, each with a hand-written
/// backward rule.
///
/// A tape is single-threaded. backward() must be handed the same store the
/// tape was built over.
class Tape {
 public:
  using NodeId = std::size_t;
  static constexpr NodeId npos = static_cast<NodeId>(-1);

  explicit Tape(const ParamStore& params) : params_(&params) {}

  const Tensor1& value(NodeId id) const { return nodes_[id].val; }
  std::size_t size(NodeId id) const { return nodes_[id].val.size(); }

  /// Weighted sum of every scalar contribution added so far.
  double loss() const { return loss_; }

  NodeId constant(Tensor1 v) {
    ensure_finite("constant", v.v);
    return push(std::move(v));
  }

  NodeId zeros(std::size_t len) { return push(Tensor1(len)); }

  NodeId param_vector(const std::string& name) {
    const auto& e = params_->at(name);
    if (e.is_matrix()) throw DimensionError("param_vector: '" + name + "' is a matrix");
    NodeId out = push(Tensor1{std::vector<double>(e.value)});
    ops_.push_back([out, name](Tape& t, ParamStore& s, double) {
      auto& g = s.at(name).grad;
      const Tensor1& og = t.nodes_[out].grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += og[i];
    });
    return out;
  }

  NodeId embedding_row(const std::string& name, std::size_t row) {
    const auto& e = params_->at(name);
    if (!e.is_matrix()) throw DimensionError("embedding_row: '" + name + "' is a vector");
    if (row >= e.rows)
      throw IndexError("embedding_row: row " + std::to_string(row) + " out of range for '" +
                       name + "' with " + std::to_string(e.rows) + " rows");
    Tensor1 v(e.cols);
    for (std::size_t c = 0; c < e.cols; ++c) v[c] = e.value[row * e.cols + c];
    NodeId out = push(std::move(v));
    ops_.push_back([out, name, row](Tape& t, ParamStore& s, double) {
      auto& e2 = s.at(name);
      const Tensor1& og = t.nodes_[out].grad;
      for (std::size_t c = 0; c < e2.cols; ++c) e2.grad[row * e2.cols + c] += og[c];
    });
    return out;
  }

  /// W x + b with gradients into W, x and b.
  NodeId affine(const std::string& w_name, NodeId x, const std::string& b_name) {
    NodeId out = linear(w_name, x, &b_name);
    return out;
  }

  /// W x (no bias term).
  NodeId matvec(const std::string& w_name, NodeId x) { return linear(w_name, x, nullptr); }

  NodeId add(NodeId a, NodeId b) {
    check_same(a, b, "add");
    Tensor1 v(size(a));
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = value(a)[i] + value(b)[i];
    NodeId out = push(std::move(v));
    ops_.push_back([out, a, b](Tape& t, ParamStore&, double) {
      const Tensor1& og = t.nodes_[out].grad;
      Tensor1& ga = t.nodes_[a].grad;
      Tensor1& gb = t.nodes_[b].grad;
      for (std::size_t i = 0; i < og.size(); ++i) {
        ga[i] += og[i];
        gb[i] += og[i];
      }
    });
    return out;
  }

  NodeId mul(NodeId a, NodeId b) {
    check_same(a, b, "mul");
    Tensor1 v(size(a));
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = value(a)[i] * value(b)[i];
    NodeId out = push(std::move(v));
    ops_.push_back([out, a, b](Tape& t, ParamStore&, double) {
      const Tensor1& og = t.nodes_[out].grad;
      Tensor1& ga = t.nodes_[a].grad;
      Tensor1& gb = t.nodes_[b].grad;
      const Tensor1& av = t.nodes_[a].val;
      const Tensor1& bv = t.nodes_[b].val;
      for (std::size_t i = 0; i < og.size(); ++i) {
        ga[i] += og[i] * bv[i];
        gb[i] += og[i] * av[i];
      }
    });
    return out;
  }

  NodeId tanh_op(NodeId a) {
    Tensor1 v(size(a));
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::tanh(value(a)[i]);
    NodeId out = push(std::move(v));
    ops_.push_back([out, a](Tape& t, ParamStore&, double) {
      const Tensor1& og = t.nodes_[out].grad;
      const Tensor1& ov = t.nodes_[out].val;
      Tensor1& ga = t.nodes_[a].grad;
      for (std::size_t i = 0; i < og.size(); ++i) ga[i] += og[i] * (1.0 - ov[i] * ov[i]);
    });
    return out;
  }

  NodeId sigmoid_op(NodeId a) {
    Tensor1 v(size(a));
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = sigmoid(value(a)[i]);
    NodeId out = push(std::move(v));
    ops_.push_back([out, a](Tape& t, ParamStore&, double) {
      const Tensor1& og = t.nodes_[out].grad;
      const Tensor1& ov = t.nodes_[out].val;
      Tensor1& ga = t.nodes_[a].grad;
      for (std::size_t i = 0; i < og.size(); ++i) ga[i] += og[i] * ov[i] * (1.0 - ov[i]);
    });
    return out;
  }

  NodeId softmax_op(NodeId a) {
    NodeId out = push(softmax(value(a)));
    ops_.push_back([out, a](Tape& t, ParamStore&, double) {
      const Tensor1& og = t.nodes_[out].grad;
      const Tensor1& p = t.nodes_[out].val;
      Tensor1& ga = t.nodes_[a].grad;
      double s = 0.0;
      for (std::size_t i = 0; i < og.size(); ++i) s += og[i] * p[i];
      for (std::size_t i = 0; i < og.size(); ++i) ga[i] += p[i] * (og[i] - s);
    });
    return out;
  }

  NodeId slice(NodeId a, std::size_t offset, std::size_t len) {
    if (offset + len > size(a))
      throw DimensionError("slice: [" + std::to_string(offset) + ", " +
                           std::to_string(offset + len) + ") exceeds length " +
                           std::to_string(size(a)));
    Tensor1 v(len);
    for (std::size_t i = 0; i < len; ++i) v[i] = value(a)[offset + i];
    NodeId out = push(std::move(v));
    ops_.push_back([out, a, offset, len](Tape& t, ParamStore&, double) {
      const Tensor1& og = t.nodes_[out].grad;
      Tensor1& ga = t.nodes_[a].grad;
      for (std::size_t i = 0; i < len; ++i) ga[offset + i] += og[i];
    });
    return out;
  }

  NodeId concat(std::span<const NodeId> parts) {
    if (parts.empty()) throw DimensionError("concat: empty part list");
    std::size_t total = 0;
    for (NodeId p : parts) total += size(p);
    Tensor1 v(total);
    std::size_t off = 0;
    for (NodeId p : parts) {
      for (std::size_t i = 0; i < size(p); ++i) v[off + i] = value(p)[i];
      off += size(p);
    }
    NodeId out = push(std::move(v));
    std::vector<NodeId> ps(parts.begin(), parts.end());
    ops_.push_back([out, ps](Tape& t, ParamStore&, double) {
      const Tensor1& og = t.nodes_[out].grad;
      std::size_t off2 = 0;
      for (NodeId p : ps) {
        Tensor1& gp = t.nodes_[p].grad;
        for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += og[off2 + i];
        off2 += gp.size();
      }
    });
    return out;
  }

  NodeId mean_of(std::span<const NodeId> parts) {
    if (parts.empty()) throw DimensionError("mean_of: empty part list");
    const std::size_t dim = size(parts.front());
    Tensor1 v(dim);
    for (NodeId p : parts) {
      check_len(p, dim, "mean_of");
      for (std::size_t i = 0; i < dim; ++i) v[i] += value(p)[i];
    }
    const double inv = 1.0 / static_cast<double>(parts.size());
    for (double& x : v) x *= inv;
    NodeId out = push(std::move(v));
    std::vector<NodeId> ps(parts.begin(), parts.end());
    ops_.push_back([out, ps, inv](Tape& t, ParamStore&, double) {
      const Tensor1& og = t.nodes_[out].grad;
      for (NodeId p : ps) {
        Tensor1& gp = t.nodes_[p].grad;
        for (std::size_t i = 0; i < og.size(); ++i) gp[i] += og[i] * inv;
      }
    });
    return out;
  }

  /// Element-wise max across nodes; the backward pass routes each dimension's
  /// gradient only to the winning input (ties to the lowest index).
  NodeId max_pool(std::span<const NodeId> parts, std::vector<std::size_t>* winners = nullptr) {
    std::vector<Tensor1> vals;
    vals.reserve(parts.size());
    for (NodeId p : parts) vals.push_back(value(p));
    std::vector<std::size_t> who;
    Tensor1 v = elementwise_max_pool(vals, &who);
    if (winners) *winners = who;
    NodeId out = push(std::move(v));
    std::vector<NodeId> ps(parts.begin(), parts.end());
    ops_.push_back([out, ps, who](Tape& t, ParamStore&, double) {
      const Tensor1& og = t.nodes_[out].grad;
      for (std::size_t d = 0; d < og.size(); ++d) t.nodes_[ps[who[d]]].grad[d] += og[d];
    });
    return out;
  }

  /// out[i] = dot(w, items[i]) for a parameter vector w.
  NodeId dots_with(const std::string& w_name, std::span<const NodeId> items) {
    const auto& e = params_->at(w_name);
    if (e.is_matrix()) throw DimensionError("dots_with: '" + w_name + "' is a matrix");
    Tensor1 v(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
      check_len(items[i], e.rows, "dots_with");
      v[i] = dot({e.value.data(), e.rows}, {value(items[i]).data(), e.rows});
    }
    ensure_finite("dots_with", v.v);
    NodeId out = push(std::move(v));
    std::vector<NodeId> is(items.begin(), items.end());
    ops_.push_back([out, is, w_name](Tape& t, ParamStore& s, double) {
      const Tensor1& og = t.nodes_[out].grad;
      auto& we = s.at(w_name);
      for (std::size_t i = 0; i < is.size(); ++i) {
        const Tensor1& uv = t.nodes_[is[i]].val;
        Tensor1& gu = t.nodes_[is[i]].grad;
        for (std::size_t d = 0; d < we.rows; ++d) {
          we.grad[d] += og[i] * uv[d];
          gu[d] += og[i] * we.value[d];
        }
      }
    });
    return out;
  }

  /// out = sum_i weights[i] * items[i]. Both the weights and the items
  /// receive gradients.
  NodeId weighted_sum(NodeId weights, std::span<const NodeId> items) {
    if (size(weights) != items.size())
      throw DimensionError("weighted_sum: " + std::to_string(size(weights)) +
                           " weights for " + std::to_string(items.size()) + " items");
    if (items.empty()) throw DimensionError("weighted_sum: empty item list");
    const std::size_t dim = size(items.front());
    Tensor1 v(dim);
    for (std::size_t i = 0; i < items.size(); ++i) {
      check_len(items[i], dim, "weighted_sum");
      const double w = value(weights)[i];
      for (std::size_t d = 0; d < dim; ++d) v[d] += w * value(items[i])[d];
    }
    ensure_finite("weighted_sum", v.v);
    NodeId out = push(std::move(v));
    std::vector<NodeId> is(items.begin(), items.end());
    ops_.push_back([out, is, weights](Tape& t, ParamStore&, double) {
      const Tensor1& og = t.nodes_[out].grad;
      const Tensor1& wv = t.nodes_[weights].val;
      Tensor1& gw = t.nodes_[weights].grad;
      for (std::size_t i = 0; i < is.size(); ++i) {
        const Tensor1& iv = t.nodes_[is[i]].val;
        Tensor1& gi = t.nodes_[is[i]].grad;
        double acc = 0.0;
        for (std::size_t d = 0; d < og.size(); ++d) {
          acc += og[d] * iv[d];
          gi[d] += og[d] * wv[i];
        }
        gw[i] += acc;
      }
    });
    return out;
  }

  /// -log(dist[index]) with the log floored at 1e-300. Returns the unweighted
  /// value; `weight` scales the gradient contribution.
  double nll_pick(NodeId dist, std::size_t index, double weight) {
    if (index >= size(dist))
      throw IndexError("nll_pick: index " + std::to_string(index) + " out of range");
    const double p = value(dist)[index];
    const double contribution = -std::log(std::max(p, kLogFloor));
    loss_ += weight * contribution;
    ops_.push_back([dist, index, p, weight](Tape& t, ParamStore&, double seed) {
      if (p > kLogFloor) t.nodes_[dist].grad[index] += weight * seed * (-1.0 / p);
    });
    return contribution;
  }

  /// Margin ranking loss over score entries: positives must exceed every
  /// negative by 1. Normalized by the score length. Subgradient at the hinge
  /// kink is zero.
  double hinge_rank(NodeId scores, std::span<const char> positive, double weight) {
    const std::size_t z = size(scores);
    if (positive.size() != z)
      throw DimensionError("hinge_rank: mask length " + std::to_string(positive.size()) +
                           " vs scores length " + std::to_string(z));
    const Tensor1& s = value(scores);
    double total = 0.0;
    for (std::size_t j = 0; j < z; ++j) {
      if (!positive[j]) continue;
      for (std::size_t i = 0; i < z; ++i) {
        if (positive[i]) continue;
        total += std::max(0.0, 1.0 - (s[j] - s[i]));
      }
    }
    const double contribution = total / static_cast<double>(z);
    loss_ += weight * contribution;
    std::vector<char> pos(positive.begin(), positive.end());
    ops_.push_back([scores, pos, weight, z](Tape& t, ParamStore&, double seed) {
      const Tensor1& sv = t.nodes_[scores].val;
      Tensor1& g = t.nodes_[scores].grad;
      const double unit = weight * seed / static_cast<double>(z);
      for (std::size_t j = 0; j < z; ++j) {
        if (!pos[j]) continue;
        for (std::size_t i = 0; i < z; ++i) {
          if (pos[i]) continue;
          if (1.0 - (sv[j] - sv[i]) > 0.0) {
            g[j] -= unit;
            g[i] += unit;
          }
        }
      }
    });
    return contribution;
  }

  /// Mean binary cross-entropy straight from logits (numerically stable).
  double bce_logits(NodeId logits, std::span<const double> targets, double weight) {
    const std::size_t n = size(logits);
    if (targets.size() != n)
      throw DimensionError("bce_logits: target length " + std::to_string(targets.size()) +
                           " vs logits length " + std::to_string(n));
    const Tensor1& zv = value(logits);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = zv[i];
      total += std::max(z, 0.0) - z * targets[i] + std::log1p(std::exp(-std::abs(z)));
    }
    const double contribution = total / static_cast<double>(n);
    loss_ += weight * contribution;
    std::vector<double> ts(targets.begin(), targets.end());
    ops_.push_back([logits, ts, weight, n](Tape& t, ParamStore&, double seed) {
      const Tensor1& zv2 = t.nodes_[logits].val;
      Tensor1& g = t.nodes_[logits].grad;
      const double unit = weight * seed / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) g[i] += unit * (sigmoid(zv2[i]) - ts[i]);
    });
    return contribution;
  }

  /// Runs the recorded backward rules in reverse order, accumulating into the
  /// grad buffers of `params`. Must be the store the tape was built over.
  void backward(ParamStore& params, double seed = 1.0) {
    if (&params != params_)
      throw StateError("Tape::backward: store differs from the one the tape was built over");
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)(*this, params, seed);
  }

  static constexpr double kLogFloor = 1e-300;

 private:
  struct Node {
    Tensor1 val;
    Tensor1 grad;
  };

  NodeId push(Tensor1 v) {
    Node n;
    n.grad = Tensor1(v.size());
    n.val = std::move(v);
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
  }

  NodeId linear(const std::string& w_name, NodeId x, const std::string* b_name) {
    const auto& w = params_->at(w_name);
    if (!w.is_matrix()) throw DimensionError("linear: '" + w_name + "' is not a matrix");
    if (w.cols != size(x))
      throw DimensionError("linear: '" + w_name + "' is " + std::to_string(w.rows) + "x" +
                           std::to_string(w.cols) + " but input has length " +
                           std::to_string(size(x)));
    const ParamStore::Entry* b = nullptr;
    if (b_name) {
      b = &params_->at(*b_name);
      if (b->is_matrix() || b->rows != w.rows)
        throw DimensionError("linear: bias '" + *b_name + "' does not match '" + w_name + "'");
    }
    Tensor1 v(w.rows);
    const Tensor1& xv = value(x);
    for (std::size_t r = 0; r < w.rows; ++r) {
      double acc = b ? b->value[r] : 0.0;
      const double* wr = w.value.data() + r * w.cols;
      for (std::size_t c = 0; c < w.cols; ++c) acc += wr[c] * xv[c];
      v[r] = acc;
    }
    ensure_finite("linear", v.v);
    NodeId out = push(std::move(v));
    const std::string bname = b_name ? *b_name : std::string();
    ops_.push_back([out, x, w_name, bname](Tape& t, ParamStore& s, double) {
      auto& we = s.at(w_name);
      const Tensor1& og = t.nodes_[out].grad;
      const Tensor1& xv2 = t.nodes_[x].val;
      Tensor1& gx = t.nodes_[x].grad;
      for (std::size_t r = 0; r < we.rows; ++r) {
        const double gr = og[r];
        if (gr == 0.0) continue;
        double* wg = we.grad.data() + r * we.cols;
        const double* wv = we.value.data() + r * we.cols;
        for (std::size_t c = 0; c < we.cols; ++c) {
          wg[c] += gr * xv2[c];
          gx[c] += gr * wv[c];
        }
      }
      if (!bname.empty()) {
        auto& be = s.at(bname);
        for (std::size_t r = 0; r < be.rows; ++r) be.grad[r] += og[r];
      }
    });
    return out;
  }

  void check_same(NodeId a, NodeId b, const char* op) const {
    if (size(a) != size(b))
      throw DimensionError(std::string(op) + ": lengths " + std::to_string(size(a)) +
                           " vs " + std::to_string(size(b)));
  }
  void check_len(NodeId a, std::size_t want, const char* op) const {
    if (size(a) != want)
      throw DimensionError(std::string(op) + ": member length " + std::to_string(size(a)) +
                           ", expected " + std::to_string(want));
  }

  const ParamStore* params_;
  std::vector<Node> nodes_;
  std::vector<std::function<void(Tape&, ParamStore&, double)>> ops_;
  double loss_ = 0.0;
};

}  // namespace guidecap
