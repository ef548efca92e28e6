#pragma once

#include <array>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "guidecap/attributes.hpp"
#include "guidecap/corpus.hpp"
#include "guidecap/objective.hpp"
#include "guidecap/tape.hpp"

namespace guidecap {

enum class Variant { kSoftAttention, kReviewNet };

inline const char* variant_name(Variant v) {
  return v == Variant::kSoftAttention ? "soft" : "review";
}

inline Variant variant_from(const std::string& s) {
  if (s == "soft") return Variant::kSoftAttention;
  if (s == "review") return Variant::kReviewNet;
  throw ConfigError("unknown variant '" + s + "' (expected 'soft' or 'review')");
}

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 32;
  std::size_t hidden_dim = 64;
  std::size_t annot_dim = 16;
  std::size_t annot_count = 6;
  std::size_t frequent = 50;  // guiding vector length == frequent-word count
  Variant variant = Variant::kSoftAttention;
  std::size_t review_steps = 8;
  bool share_review_params = true;
  bool use_guiding = true;

  bool operator==(const ModelConfig&) const = default;
};

// Parameter names. The decoder attends over encoder annotations in the
// soft-attention variant and over thought vectors in the review variant, so
// its attention shapes differ per variant but the names stay the same.
namespace pname {
inline constexpr const char* kEmbedding = "embedding";
inline constexpr const char* kOutputW = "output_W";
inline constexpr const char* kInitHW = "init_h_W";
inline constexpr const char* kInitCW = "init_c_W";
inline constexpr const char* kDecLstmW = "dec_lstm_W";
inline constexpr const char* kDecLstmB = "dec_lstm_b";
inline constexpr const char* kDecAttAnnotW = "dec_att_annot_W";
inline constexpr const char* kDecAttStateW = "dec_att_state_W";
inline constexpr const char* kDecAttB = "dec_att_b";
inline constexpr const char* kDecAttScoreW = "dec_att_score_w";
inline constexpr const char* kGuideW = "guide_W";
inline constexpr const char* kGuideB = "guide_b";
inline constexpr const char* kGuideProjW = "guide_proj_W";
inline constexpr const char* kRevLstmW = "rev_lstm_W";
inline constexpr const char* kRevLstmB = "rev_lstm_b";
inline constexpr const char* kRevAttAnnotW = "rev_att_annot_W";
inline constexpr const char* kRevAttStateW = "rev_att_state_W";
inline constexpr const char* kRevAttB = "rev_att_b";
inline constexpr const char* kRevAttScoreW = "rev_att_score_w";
inline constexpr const char* kGuide1W = "guide1_W";
inline constexpr const char* kGuide1B = "guide1_b";
inline constexpr const char* kGuide1ProjW = "guide1_proj_W";
inline constexpr const char* kGuide2W = "guide2_W";
inline constexpr const char* kGuide2B = "guide2_b";
inline constexpr const char* kGuide2ProjW = "guide2_proj_W";

inline std::string rev_lstm_w(const ModelConfig& cfg, std::size_t step) {
  return cfg.share_review_params ? kRevLstmW : kRevLstmW + ("." + std::to_string(step));
}
inline std::string rev_lstm_b(const ModelConfig& cfg, std::size_t step) {
  return cfg.share_review_params ? kRevLstmB : kRevLstmB + ("." + std::to_string(step));
}
}  // namespace pname

/// Registers every tensor the configured variant needs, zero-filled.
inline ParamStore make_param_store(const ModelConfig& cfg) {
  if (cfg.vocab_size == 0 || cfg.embed_dim == 0 || cfg.hidden_dim == 0 ||
      cfg.annot_dim == 0 || cfg.annot_count == 0 || cfg.frequent == 0)
    throw ConfigError("model config has a zero dimension");
  const std::size_t v = cfg.vocab_size, m = cfg.embed_dim, n = cfg.hidden_dim,
                    d = cfg.annot_dim, f = cfg.frequent;
  ParamStore s;
  s.add_matrix(pname::kEmbedding, v, m);
  s.add_matrix(pname::kOutputW, v, n);
  s.add_matrix(pname::kInitHW, n, d);
  s.add_matrix(pname::kInitCW, n, d);
  // decoder context dim: annotation vectors (soft) or thought vectors (review)
  const std::size_t ctx = cfg.variant == Variant::kSoftAttention ? d : n;
  s.add_matrix(pname::kDecLstmW, 4 * n, m + n + ctx);
  s.add_vector(pname::kDecLstmB, 4 * n, /*is_bias=*/true);
  s.add_matrix(pname::kDecAttAnnotW, ctx, ctx);
  s.add_matrix(pname::kDecAttStateW, ctx, n);
  s.add_vector(pname::kDecAttB, ctx, /*is_bias=*/true);
  s.add_vector(pname::kDecAttScoreW, ctx);
  if (cfg.variant == Variant::kSoftAttention) {
    if (cfg.use_guiding) {
      s.add_matrix(pname::kGuideW, f, d + f);
      s.add_vector(pname::kGuideB, f, /*is_bias=*/true);
      s.add_matrix(pname::kGuideProjW, m, f);
    }
  } else {
    for (std::size_t r = 0; r < (cfg.share_review_params ? 1 : cfg.review_steps); ++r) {
      s.add_matrix(pname::rev_lstm_w(cfg, r), 4 * n, m + n + d);
      s.add_vector(pname::rev_lstm_b(cfg, r), 4 * n, /*is_bias=*/true);
    }
    s.add_matrix(pname::kRevAttAnnotW, d, d);
    s.add_matrix(pname::kRevAttStateW, d, n);
    s.add_vector(pname::kRevAttB, d, /*is_bias=*/true);
    s.add_vector(pname::kRevAttScoreW, d);
    if (cfg.use_guiding) {
      s.add_matrix(pname::kGuide1W, f, d + f);
      s.add_vector(pname::kGuide1B, f, /*is_bias=*/true);
      s.add_matrix(pname::kGuide1ProjW, m, f);
      s.add_matrix(pname::kGuide2W, f, n + f);
      s.add_vector(pname::kGuide2B, f, /*is_bias=*/true);
      s.add_matrix(pname::kGuide2ProjW, m, f);
    }
  }
  return s;
}

struct DecoderState {
  Tensor1 h, c;
};

struct AttentionNames {
  std::string annot_W, state_W, bias, score_w;
};

inline AttentionNames decoder_attention() {
  return {pname::kDecAttAnnotW, pname::kDecAttStateW, pname::kDecAttB, pname::kDecAttScoreW};
}
inline AttentionNames review_attention() {
  return {pname::kRevAttAnnotW, pname::kRevAttStateW, pname::kRevAttB, pname::kRevAttScoreW};
}

/// Additive attention: score_i = w . tanh(Wa a_i + Wh h + b), weights
/// softmax(scores), context the weighted sum of the annotations.
struct AttendedContext {
  Tape::NodeId weights;
  Tape::NodeId context;
};

inline AttendedContext attend(Tape& tape, const AttentionNames& names,
                              std::span<const Tape::NodeId> annots, Tape::NodeId h_prev) {
  if (annots.empty()) throw DimensionError("attend: empty annotation list");
  const Tape::NodeId wh = tape.matvec(names.state_W, h_prev);
  const Tape::NodeId b = tape.param_vector(names.bias);
  std::vector<Tape::NodeId> hidden;
  hidden.reserve(annots.size());
  for (Tape::NodeId a : annots)
    hidden.push_back(tape.tanh_op(tape.add(tape.add(tape.matvec(names.annot_W, a), wh), b)));
  const Tape::NodeId scores = tape.dots_with(names.score_w, hidden);
  const Tape::NodeId alpha = tape.softmax_op(scores);
  return {alpha, tape.weighted_sum(alpha, annots)};
}

/// One step of the attention LSTM. The fused transform maps [x; h; context]
/// to the four gate blocks in (input, forget, output, candidate) order.
struct LstmNodes {
  Tape::NodeId h, c;
};

inline LstmNodes lstm_step(Tape& tape, const std::string& w_name, const std::string& b_name,
                           Tape::NodeId x, Tape::NodeId h_prev, Tape::NodeId c_prev,
                           Tape::NodeId context) {
  const std::size_t n = tape.size(h_prev);
  const std::array<Tape::NodeId, 3> parts{x, h_prev, context};
  const Tape::NodeId pre = tape.affine(w_name, tape.concat(parts), b_name);
  if (tape.size(pre) != 4 * n)
    throw DimensionError("lstm_step: transform rows " + std::to_string(tape.size(pre)) +
                         ", expected " + std::to_string(4 * n));
  const Tape::NodeId gi = tape.sigmoid_op(tape.slice(pre, 0, n));
  const Tape::NodeId gf = tape.sigmoid_op(tape.slice(pre, n, n));
  const Tape::NodeId go = tape.sigmoid_op(tape.slice(pre, 2 * n, n));
  const Tape::NodeId gg = tape.tanh_op(tape.slice(pre, 3 * n, n));
  const Tape::NodeId c = tape.add(tape.mul(gf, c_prev), tape.mul(gi, gg));
  const Tape::NodeId h = tape.mul(go, tape.tanh_op(c));
  return {h, c};
}

/// h0 and c0 from a tanh projection of the mean annotation vector.
inline LstmNodes init_decoder_state(Tape& tape, std::span<const Tape::NodeId> annots) {
  if (annots.empty()) throw DimensionError("init_decoder_state: empty annotation list");
  const Tape::NodeId mean = tape.mean_of(annots);
  return {tape.tanh_op(tape.matvec(pname::kInitHW, mean)),
          tape.tanh_op(tape.matvec(pname::kInitCW, mean))};
}

inline Tape::NodeId output_distribution(Tape& tape, Tape::NodeId h) {
  return tape.softmax_op(tape.matvec(pname::kOutputW, h));
}

inline Tape::NodeId embed(Tape& tape, int token) {
  if (token < 0) throw IndexError("embed: negative token id");
  return tape.embedding_row(pname::kEmbedding, static_cast<std::size_t>(token));
}

struct GuideMasks {
  bool annotations = false;  // zero the annotation half of the guiding input
  bool attributes = false;   // zero the attribute half

  bool operator==(const GuideMasks&) const = default;
};

/// How the guiding pathway participates in a forward pass. kForcedZero keeps
/// the guided code path but replaces the guiding vector with zeros; kDisabled
/// skips the pathway entirely (the plain baseline).
enum class GuideDrive { kLearned, kForcedZero, kDisabled };

/// Loss weights: the discriminative multipliers double as the objective's
/// trade-off parameters.
struct LossWeights {
  double nll = 1.0;
  double dis1 = 10.0;
  double dis2 = 10.0;
};

struct ForwardResult {
  std::vector<Tape::NodeId> dists;  // one per predicted token
  Tape::NodeId guide1 = Tape::npos;
  Tape::NodeId guide2 = Tape::npos;
  LossBreakdown loss;
  // distance from the evaluation point to the nearest pooling or hinge kink
  double min_kink_margin = std::numeric_limits<double>::infinity();
};

namespace detail_model {

inline std::vector<Tape::NodeId> wrap_annotations(Tape& tape, const AnnotationSet& annots) {
  if (annots.annots.empty()) throw DimensionError("forward: record has no annotation vectors");
  std::vector<Tape::NodeId> nodes;
  nodes.reserve(annots.annots.size());
  for (const Tensor1& a : annots.annots) nodes.push_back(tape.constant(a));
  return nodes;
}

inline void check_caption(std::span<const int> caption) {
  if (caption.size() < 2)
    throw DataError("forward: caption must contain at least start and end markers");
}

}  // namespace detail_model

}  // namespace guidecap
