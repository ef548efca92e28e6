#pragma once

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "guidecap/review.hpp"

namespace guidecap {

/// A trained (or initialized) model bundled with everything needed to run it
/// on records: parameters, vocabulary, frequent words and the attribute
/// handling it was trained with.
struct Model {
  ModelConfig cfg;
  ParamStore params;
  Vocabulary vocab;
  FrequentWordSet fws;
  AttributeMode attribute_mode = AttributeMode::kOracle;
  GuideMasks masks;
};

struct BeamConfig {
  std::size_t width = 3;
  std::size_t max_len = 30;
  bool length_normalize = false;
};

struct ScoredSequence {
  std::vector<int> tokens;  // content only, start/end markers stripped
  double logprob = 0.0;
};

/// Incremental decoding interface over one model. begin() runs everything
/// that is constant across time steps (guiding vector, review rollout,
/// initial state); step() advances one token and returns the next-word
/// distribution.
class ModelStepper {
 public:
  explicit ModelStepper(const Model& model) : model_(&model) {}

  struct Context {
    std::vector<Tensor1> attended;
    Tensor1 guide;
    bool guided = false;
    DecoderState state;
  };

  std::size_t vocab_size() const { return model_->cfg.vocab_size; }

  Context begin(const AnnotationSet& annotations) const {
    const Model& m = *model_;
    Tape tape(m.params);
    const std::vector<Tape::NodeId> annots = detail_model::wrap_annotations(tape, annotations);
    Context ctx;
    ctx.guided = m.cfg.use_guiding;
    if (m.cfg.variant == Variant::kSoftAttention) {
      for (const Tensor1& a : annotations.annots) ctx.attended.push_back(a);
      const LstmNodes s0 = init_decoder_state(tape, annots);
      ctx.state = {tape.value(s0.h), tape.value(s0.c)};
      if (ctx.guided) {
        const Tape::NodeId attrs = tape.constant(annotations.attrs);
        ctx.guide =
            tape.value(guiding_forward(tape, soft_guiding(), annots, attrs, m.masks).v);
      }
    } else {
      Tape::NodeId review_input = Tape::npos;
      Tape::NodeId attrs = Tape::npos;
      if (ctx.guided) {
        attrs = tape.constant(annotations.attrs);
        const Tape::NodeId g1 =
            guiding_forward(tape, review_guiding1(), annots, attrs, m.masks).v;
        review_input = tape.matvec(pname::kGuide1ProjW, g1);
      }
      const ReviewRollout review = review_rollout(tape, m.cfg, annots, review_input);
      for (Tape::NodeId t : review.thoughts) ctx.attended.push_back(tape.value(t));
      ctx.state = {tape.value(review.final_state.h), tape.value(review.final_state.c)};
      if (ctx.guided) {
        ctx.guide = tape.value(
            guiding_forward(tape, review_guiding2(), review.thoughts, attrs, m.masks).v);
      }
    }
    return ctx;
  }

  Tensor1 step(Context& ctx, int token) const {
    const Model& m = *model_;
    Tape tape(m.params);
    std::vector<Tape::NodeId> annots;
    annots.reserve(ctx.attended.size());
    for (const Tensor1& a : ctx.attended) annots.push_back(tape.constant(a));
    const Tape::NodeId h = tape.constant(ctx.state.h);
    const Tape::NodeId c = tape.constant(ctx.state.c);
    const AttendedContext att = attend(tape, decoder_attention(), annots, h);
    const char* proj = m.cfg.variant == Variant::kSoftAttention ? pname::kGuideProjW
                                                                : pname::kGuide2ProjW;
    const Tape::NodeId x = ctx.guided
                               ? compose_input(tape, proj, token, tape.constant(ctx.guide))
                               : embed(tape, token);
    const LstmNodes next = lstm_step(tape, pname::kDecLstmW, pname::kDecLstmB, x, h, c,
                                     att.context);
    ctx.state = {tape.value(next.h), tape.value(next.c)};
    return tape.value(output_distribution(tape, next.h));
  }

 private:
  const Model* model_;
};

/// Arithmetic mean of the member models' distributions; each member keeps
/// its own decoder state per hypothesis.
class EnsembleStepper {
 public:
  explicit EnsembleStepper(std::vector<const Model*> models) : models_(std::move(models)) {
    if (models_.empty()) throw DataError("ensemble: no models");
    for (const Model* m : models_) {
      if (!(m->vocab == models_.front()->vocab))
        throw DataError("ensemble: vocabulary mismatch between member models");
    }
  }

  struct Context {
    std::vector<ModelStepper::Context> members;
  };

  std::size_t vocab_size() const { return models_.front()->cfg.vocab_size; }

  Context begin(const AnnotationSet& annotations) const {
    Context ctx;
    for (const Model* m : models_) ctx.members.push_back(ModelStepper(*m).begin(annotations));
    return ctx;
  }

  Tensor1 step(Context& ctx, int token) const {
    Tensor1 mean;
    for (std::size_t i = 0; i < models_.size(); ++i) {
      Tensor1 p = ModelStepper(*models_[i]).step(ctx.members[i], token);
      if (mean.empty()) {
        mean = std::move(p);
      } else {
        if (p.size() != mean.size())
          throw DataError("ensemble: member distribution sizes differ");
        for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += p[j];
      }
    }
    const double inv = 1.0 / static_cast<double>(models_.size());
    for (double& x : mean) x *= inv;
    return mean;
  }

 private:
  std::vector<const Model*> models_;
};

inline double log_floor(double p) { return std::log(std::max(p, 1e-300)); }

inline std::size_t argmax_lowest(const Tensor1& p) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < p.size(); ++i)
    if (p[i] > p[best]) best = i;
  return best;
}

/// Feed the argmax token back each step until the end marker is emitted or
/// max_len content tokens are reached. Ties go to the lowest token id.
template <class Stepper>
std::vector<int> greedy_decode(const Stepper& stepper, const AnnotationSet& annotations,
                               std::size_t max_len = 30) {
  auto ctx = stepper.begin(annotations);
  std::vector<int> out;
  int prev = Vocabulary::kStart;
  for (std::size_t t = 0; t < max_len; ++t) {
    const Tensor1 p = stepper.step(ctx, prev);
    const int best = static_cast<int>(argmax_lowest(p));
    if (best == Vocabulary::kEnd) break;
    out.push_back(best);
    prev = best;
  }
  return out;
}

/// Standard beam search by summed log probability. Finished hypotheses
/// retire to a pool and stop expanding; at max_len the end marker is the
/// only admissible expansion. Ties break to the lexicographically lower
/// token sequence. Scores are raw sums unless length_normalize is set.
template <class Stepper>
std::vector<ScoredSequence> beam_decode(const Stepper& stepper,
                                        const AnnotationSet& annotations,
                                        const BeamConfig& cfg) {
  if (cfg.width < 1 || cfg.max_len < 1)
    throw ConfigError("beam_decode: width and max_len must be >= 1");
  struct Hyp {
    std::vector<int> tokens;  // includes the leading start marker
    double logprob = 0.0;
    typename Stepper::Context ctx;
    Tensor1 dist;  // distribution after feeding tokens.back()
  };
  std::vector<Hyp> live;
  {
    Hyp root;
    root.tokens = {Vocabulary::kStart};
    root.ctx = stepper.begin(annotations);
    live.push_back(std::move(root));
  }
  std::vector<ScoredSequence> pool;
  const std::size_t vocab = stepper.vocab_size();
  while (!live.empty() && pool.size() < cfg.width) {
    for (Hyp& h : live) h.dist = stepper.step(h.ctx, h.tokens.back());
    struct Cand {
      std::size_t from;
      int token;
      double logprob;
      std::vector<int> tokens;
    };
    std::vector<Cand> cands;
    for (std::size_t i = 0; i < live.size(); ++i) {
      const std::size_t content = live[i].tokens.size() - 1;
      const bool at_cap = content >= cfg.max_len;
      for (std::size_t t = 0; t < vocab; ++t) {
        if (at_cap && static_cast<int>(t) != Vocabulary::kEnd) continue;
        Cand c;
        c.from = i;
        c.token = static_cast<int>(t);
        c.logprob = live[i].logprob + log_floor(live[i].dist[t]);
        c.tokens = live[i].tokens;
        c.tokens.push_back(c.token);
        cands.push_back(std::move(c));
      }
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      if (a.logprob != b.logprob) return a.logprob > b.logprob;
      return a.tokens < b.tokens;
    });
    if (cands.size() > cfg.width) cands.resize(cfg.width);
    std::vector<Hyp> next;
    for (Cand& c : cands) {
      if (c.token == Vocabulary::kEnd) {
        ScoredSequence seq;
        seq.tokens.assign(c.tokens.begin() + 1, c.tokens.end() - 1);
        seq.logprob = c.logprob;
        pool.push_back(std::move(seq));
      } else {
        Hyp h;
        h.tokens = std::move(c.tokens);
        h.logprob = c.logprob;
        h.ctx = live[c.from].ctx;
        next.push_back(std::move(h));
      }
    }
    live = std::move(next);
  }
  auto rank = [&cfg](const ScoredSequence& s) {
    if (!cfg.length_normalize) return s.logprob;
    return s.logprob / static_cast<double>(s.tokens.size() + 1);
  };
  std::sort(pool.begin(), pool.end(), [&rank](const ScoredSequence& a, const ScoredSequence& b) {
    const double ra = rank(a), rb = rank(b);
    if (ra != rb) return ra > rb;
    return a.tokens < b.tokens;
  });
  if (pool.size() > cfg.width) pool.resize(cfg.width);
  return pool;
}

inline std::vector<ScoredSequence> ensemble_decode(const std::vector<const Model*>& models,
                                                   const AnnotationSet& annotations,
                                                   const BeamConfig& cfg) {
  return beam_decode(EnsembleStepper(models), annotations, cfg);
}

inline std::string detokenize(const Vocabulary& vocab, const std::vector<int>& tokens) {
  std::string out;
  for (int id : tokens) {
    if (!out.empty()) out.push_back(' ');
    out += vocab.token(id);
  }
  return out;
}

// Caption file: one line per image, image_id<TAB>space-joined caption.
inline void write_captions(std::ostream& os,
                           const std::vector<std::pair<std::string, std::string>>& captions) {
  for (const auto& [id, text] : captions) os << id << '\t' << text << '\n';
}

inline std::vector<std::pair<std::string, std::string>> read_captions(std::istream& is) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw DataError("caption file line " + std::to_string(line_no) + ": missing tab");
    out.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return out;
}

}  // namespace guidecap
