#pragma once

#include <span>
#include <vector>

#include "guidecap/guiding.hpp"
#include "guidecap/model.hpp"

namespace guidecap {

struct ReviewConfig {
  std::size_t steps = 8;
  bool share_params = true;
};

struct ReviewRollout {
  std::vector<Tape::NodeId> thoughts;  // hidden state of each review step
  LstmNodes final_state;
};

/// Review steps: an attention LSTM over the encoder annotations whose hidden
/// states become the decoder's annotation set and whose final state seeds the
/// decoder. The per-step input is the projected first guiding vector, or a
/// zero vector for the plain variant.
inline ReviewRollout review_rollout(Tape& tape, const ModelConfig& cfg,
                                    std::span<const Tape::NodeId> annots,
                                    Tape::NodeId input /* npos -> zero input */) {
  if (annots.empty()) throw DimensionError("review_rollout: empty annotation list");
  if (cfg.review_steps < 1) throw ConfigError("review_rollout: need at least one step");
  ReviewRollout out;
  const Tape::NodeId x =
      input == Tape::npos ? tape.zeros(cfg.embed_dim) : input;
  LstmNodes state = init_decoder_state(tape, annots);
  for (std::size_t r = 0; r < cfg.review_steps; ++r) {
    const AttendedContext att = attend(tape, review_attention(), annots, state.h);
    state = lstm_step(tape, pname::rev_lstm_w(cfg, r), pname::rev_lstm_b(cfg, r), x, state.h,
                      state.c, att.context);
    out.thoughts.push_back(state.h);
  }
  out.final_state = state;
  return out;
}

/// Teacher-forced rollout of the review variant with two guiding networks:
/// one driving the review steps from the encoder annotations, one driving the
/// decoder from the thought vectors. Emits per-step distributions plus both
/// guiding vectors and discriminative terms.
inline ForwardResult forward_review_net(Tape& tape, const ModelConfig& cfg,
                                        const AnnotationSet& annotations,
                                        std::span<const int> caption,
                                        const FrequentWordSet& fws, GuideMasks masks,
                                        GuideDrive drive, const LossWeights& weights) {
  detail_model::check_caption(caption);
  const std::vector<Tape::NodeId> annots = detail_model::wrap_annotations(tape, annotations);
  ForwardResult out;

  const bool guided = cfg.use_guiding && drive != GuideDrive::kDisabled;
  const std::vector<char> mask =
      guided ? fws.caption_mask(std::vector<int>(caption.begin(), caption.end()))
             : std::vector<char>();

  double dis1 = 0.0;
  Tape::NodeId review_input = Tape::npos;
  Tape::NodeId attrs = Tape::npos;
  if (guided) {
    Tape::NodeId guide1;
    if (drive == GuideDrive::kForcedZero) {
      guide1 = tape.zeros(cfg.frequent);
    } else {
      attrs = tape.constant(annotations.attrs);
      const GuidingVectorNode gv =
          guiding_forward(tape, review_guiding1(), annots, attrs, masks);
      guide1 = gv.v;
      out.min_kink_margin = std::min(out.min_kink_margin, gv.min_pool_margin);
    }
    out.guide1 = guide1;
    dis1 = tape.hinge_rank(guide1, mask, weights.dis1);
    out.min_kink_margin =
        std::min(out.min_kink_margin, min_hinge_margin(tape.value(guide1), mask));
    review_input = tape.matvec(pname::kGuide1ProjW, guide1);
  }

  const ReviewRollout review = review_rollout(tape, cfg, annots, review_input);

  double dis2 = 0.0;
  Tape::NodeId guide2 = Tape::npos;
  if (guided) {
    if (drive == GuideDrive::kForcedZero) {
      guide2 = tape.zeros(cfg.frequent);
    } else {
      const GuidingVectorNode gv =
          guiding_forward(tape, review_guiding2(), review.thoughts, attrs, masks);
      guide2 = gv.v;
      out.min_kink_margin = std::min(out.min_kink_margin, gv.min_pool_margin);
    }
    out.guide2 = guide2;
    dis2 = tape.hinge_rank(guide2, mask, weights.dis2);
    out.min_kink_margin =
        std::min(out.min_kink_margin, min_hinge_margin(tape.value(guide2), mask));
  }

  LstmNodes state = review.final_state;
  double nll = 0.0;
  std::vector<double> token_nll;
  for (std::size_t t = 0; t + 1 < caption.size(); ++t) {
    const AttendedContext att = attend(tape, decoder_attention(), review.thoughts, state.h);
    const Tape::NodeId x = guided
                               ? compose_input(tape, pname::kGuide2ProjW, caption[t], guide2)
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
  out.loss = LossBreakdown::assemble(nll, dis1, dis2, weights.dis1, weights.dis2,
                                     std::move(token_nll));
  return out;
}

/// Dispatch on the configured variant.
inline ForwardResult forward_pair(Tape& tape, const ModelConfig& cfg,
                                  const AnnotationSet& annotations,
                                  std::span<const int> caption, const FrequentWordSet& fws,
                                  GuideMasks masks, GuideDrive drive,
                                  const LossWeights& weights) {
  return cfg.variant == Variant::kSoftAttention
             ? forward_soft_attention(tape, cfg, annotations, caption, fws, masks, drive,
                                      weights)
             : forward_review_net(tape, cfg, annotations, caption, fws, masks, drive, weights);
}

}  // namespace guidecap
