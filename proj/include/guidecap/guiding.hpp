#pragma once

#include <limits>
#include <span>
#include <string>
#include <vector>

#include "guidecap/model.hpp"

namespace guidecap {

struct GuidingNames {
  std::string W, bias, proj_W;
};

inline GuidingNames soft_guiding() {
  return {pname::kGuideW, pname::kGuideB, pname::kGuideProjW};
}
inline GuidingNames review_guiding1() {
  return {pname::kGuide1W, pname::kGuide1B, pname::kGuide1ProjW};
}
inline GuidingNames review_guiding2() {
  return {pname::kGuide2W, pname::kGuide2B, pname::kGuide2ProjW};
}

struct GuidingVectorNode {
  Tape::NodeId v = Tape::npos;
  std::vector<std::size_t> winners;  // per-dimension argmax annotation index
  double min_pool_margin = std::numeric_limits<double>::infinity();
};

/// The guiding network: a linear layer over each [annotation; attributes]
/// concatenation followed by element-wise max-pooling across the set. The
/// masks realize the ablation arms by zeroing one side of the concatenation.
/// The pooling margin (smallest winner-versus-runner-up gap) is reported for
/// harnesses that must stay away from argmax switches.
inline GuidingVectorNode guiding_forward(Tape& tape, const GuidingNames& names,
                                         std::span<const Tape::NodeId> annots,
                                         Tape::NodeId attrs, GuideMasks masks) {
  if (annots.empty()) throw DimensionError("guiding_forward: empty annotation list");
  const Tape::NodeId zero_attrs = masks.attributes ? tape.zeros(tape.size(attrs)) : attrs;
  std::vector<Tape::NodeId> pooled;
  pooled.reserve(annots.size());
  for (Tape::NodeId a : annots) {
    const Tape::NodeId annot = masks.annotations ? tape.zeros(tape.size(a)) : a;
    const std::array<Tape::NodeId, 2> both{annot, zero_attrs};
    pooled.push_back(tape.affine(names.W, tape.concat(both), names.bias));
  }
  GuidingVectorNode out;
  out.v = tape.max_pool(pooled, &out.winners);
  if (annots.size() > 1) {
    for (std::size_t d = 0; d < tape.size(out.v); ++d) {
      double runner_up = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < pooled.size(); ++i) {
        if (i == out.winners[d]) continue;
        runner_up = std::max(runner_up, tape.value(pooled[i])[d]);
      }
      out.min_pool_margin =
          std::min(out.min_pool_margin, tape.value(out.v)[d] - runner_up);
    }
  }
  return out;
}

/// Decoder input composition: word embedding plus the projected guiding
/// vector. The same guiding vector is reused at every time step.
inline Tape::NodeId compose_input(Tape& tape, const std::string& proj_W, int token,
                                  Tape::NodeId guide) {
  return tape.add(embed(tape, token), tape.matvec(proj_W, guide));
}

/// Margin-based multi-label criterion over the guiding vector treated as
/// word scores: every word present in the caption must outscore every absent
/// frequent word by 1. Normalized by the score length; empty positive set
/// gives zero.
inline double discriminative_loss(const Tensor1& scores, const std::vector<char>& positive) {
  if (positive.size() != scores.size())
    throw DimensionError("discriminative_loss: mask length " +
                         std::to_string(positive.size()) + " vs scores length " +
                         std::to_string(scores.size()));
  double total = 0.0;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (!positive[j]) continue;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (positive[i]) continue;
      total += std::max(0.0, 1.0 - (scores[j] - scores[i]));
    }
  }
  return total / static_cast<double>(scores.size());
}

/// Fraction of (present word, absent word) pairs whose scores are not
/// separated, i.e. s_present <= s_absent. Used to measure the effect of
/// discriminative supervision.
struct ViolationCount {
  std::size_t violated = 0;
  std::size_t pairs = 0;

  double fraction() const {
    return pairs == 0 ? 0.0 : static_cast<double>(violated) / static_cast<double>(pairs);
  }
};

inline void count_violations(const Tensor1& scores, const std::vector<char>& positive,
                             ViolationCount& acc) {
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (!positive[j]) continue;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (positive[i]) continue;
      ++acc.pairs;
      if (scores[j] <= scores[i]) ++acc.violated;
    }
  }
}

/// Distance of the closest score pair to the hinge kink.
inline double min_hinge_margin(const Tensor1& scores, const std::vector<char>& positive) {
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (!positive[j]) continue;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (positive[i]) continue;
      margin = std::min(margin, std::abs(1.0 - (scores[j] - scores[i])));
    }
  }
  return margin;
}

/// Teacher-forced rollout of the guided soft-attention variant. Emits one
/// distribution per predicted token and the discriminative loss of the
/// guiding vector against the caption's frequent words.
inline ForwardResult forward_soft_attention(Tape& tape, const ModelConfig& cfg,
                                            const AnnotationSet& annotations,
                                            std::span<const int> caption,
                                            const FrequentWordSet& fws, GuideMasks masks,
                                            GuideDrive drive, const LossWeights& weights) {
  detail_model::check_caption(caption);
  const std::vector<Tape::NodeId> annots = detail_model::wrap_annotations(tape, annotations);
  ForwardResult out;

  const bool guided = cfg.use_guiding && drive != GuideDrive::kDisabled;
  double dis1 = 0.0;
  Tape::NodeId guide = Tape::npos;
  if (guided) {
    if (drive == GuideDrive::kForcedZero) {
      guide = tape.zeros(cfg.frequent);
    } else {
      const Tape::NodeId attrs = tape.constant(annotations.attrs);
      const GuidingVectorNode gv = guiding_forward(tape, soft_guiding(), annots, attrs, masks);
      guide = gv.v;
      out.min_kink_margin = std::min(out.min_kink_margin, gv.min_pool_margin);
    }
    out.guide1 = guide;
    const std::vector<char> mask =
        fws.caption_mask(std::vector<int>(caption.begin(), caption.end()));
    dis1 = tape.hinge_rank(guide, mask, weights.dis1);
    out.min_kink_margin =
        std::min(out.min_kink_margin, min_hinge_margin(tape.value(guide), mask));
  }

  LstmNodes state = init_decoder_state(tape, annots);
  double nll = 0.0;
  std::vector<double> token_nll;
  for (std::size_t t = 0; t + 1 < caption.size(); ++t) {
    const AttendedContext att = attend(tape, decoder_attention(), annots, state.h);
    const Tape::NodeId x = guided
                               ? compose_input(tape, pname::kGuideProjW, caption[t], guide)
                               : embed(tape, caption[t]);
    state = lstm_step(tape, pname::kDecLstmW, pname::kDecLstmB, x, state.h, state.c,
                      att.context);
    const Tape::NodeId dist = output_distribution(tape, state.h);
    out.dists.push_back(dist);
    const double step_nll =
        tape.nll_pick(dist, static_cast<std::size_t>(caption[t + 1]), weights.nll);
    token_nll.push_back(step_nll);
    nll += step_nll;
  }
  out.loss = LossBreakdown::assemble(nll, dis1, 0.0, weights.dis1, 0.0, std::move(token_nll));
  return out;
}

}  // namespace guidecap
