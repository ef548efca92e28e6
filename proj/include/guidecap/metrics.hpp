#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "guidecap/corpus.hpp"
#include "guidecap/errors.hpp"

namespace guidecap {

/// Aligned evaluation set: one candidate and at least one reference per
/// image, everything pre-tokenized.
struct EvalInput {
  std::vector<std::string> image_ids;
  std::vector<std::vector<std::string>> candidates;
  std::vector<std::vector<std::vector<std::string>>> references;

  std::size_t size() const { return candidates.size(); }

  void validate() const {
    if (candidates.empty()) throw DataError("evaluation: empty candidate set");
    if (candidates.size() != references.size() ||
        (!image_ids.empty() && image_ids.size() != candidates.size()))
      throw DataError("evaluation: misaligned candidates/references");
    for (const auto& refs : references)
      if (refs.empty()) throw DataError("evaluation: image without references");
  }
};

namespace detail_metrics {

inline std::string ngram_key(const std::vector<std::string>& tokens, std::size_t start,
                             std::size_t n) {
  std::string key;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) key.push_back('\x1f');
    key += tokens[start + i];
  }
  return key;
}

inline std::map<std::string, long> ngram_counts(const std::vector<std::string>& tokens,
                                                std::size_t n) {
  std::map<std::string, long> counts;
  if (tokens.size() >= n)
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) ++counts[ngram_key(tokens, i, n)];
  return counts;
}

inline std::size_t lcs_length(const std::vector<std::string>& a,
                              const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      if (a[i - 1] == b[j - 1])
        cur[j] = prev[j - 1] + 1;
      else
        cur[j] = std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace detail_metrics

/// Corpus-level BLEU-n: clipped n-gram precisions, geometric mean, brevity
/// penalty min(1, exp(1 - r/c)) with r the summed closest reference lengths
/// (ties to the shorter reference). Zero precision at any order scores 0.
inline double bleu(const EvalInput& input, std::size_t max_order) {
  input.validate();
  if (max_order < 1 || max_order > 4) throw ConfigError("bleu: order must be in 1..4");
  std::vector<double> clipped(max_order, 0.0), total(max_order, 0.0);
  double candidate_len = 0.0, reference_len = 0.0;
  for (std::size_t img = 0; img < input.size(); ++img) {
    const auto& cand = input.candidates[img];
    candidate_len += static_cast<double>(cand.size());
    std::size_t closest = input.references[img].front().size();
    for (const auto& ref : input.references[img]) {
      const auto diff = [&](std::size_t len) {
        return len > cand.size() ? len - cand.size() : cand.size() - len;
      };
      if (diff(ref.size()) < diff(closest) || (diff(ref.size()) == diff(closest) && ref.size() < closest))
        closest = ref.size();
    }
    reference_len += static_cast<double>(closest);
    for (std::size_t n = 1; n <= max_order; ++n) {
      const auto cand_counts = detail_metrics::ngram_counts(cand, n);
      std::map<std::string, long> ref_max;
      for (const auto& ref : input.references[img])
        for (const auto& [key, count] : detail_metrics::ngram_counts(ref, n))
          ref_max[key] = std::max(ref_max[key], count);
      for (const auto& [key, count] : cand_counts) {
        total[n - 1] += static_cast<double>(count);
        auto it = ref_max.find(key);
        if (it != ref_max.end())
          clipped[n - 1] += static_cast<double>(std::min(count, it->second));
      }
    }
  }
  double log_precision = 0.0;
  for (std::size_t n = 0; n < max_order; ++n) {
    if (clipped[n] == 0.0 || total[n] == 0.0) return 0.0;
    log_precision += std::log(clipped[n] / total[n]);
  }
  const double geo_mean = std::exp(log_precision / static_cast<double>(max_order));
  const double bp =
      candidate_len == 0.0
          ? 0.0
          : std::min(1.0, std::exp(1.0 - reference_len / candidate_len));
  return geo_mean * bp;
}

/// ROUGE-L: per image the best LCS F-measure over references (beta = 1.2),
/// averaged over images. Empty candidates score 0 for their image.
inline double rouge_l(const EvalInput& input) {
  input.validate();
  constexpr double kBeta = 1.2;
  double sum = 0.0;
  for (std::size_t img = 0; img < input.size(); ++img) {
    const auto& cand = input.candidates[img];
    double best = 0.0;
    if (!cand.empty()) {
      for (const auto& ref : input.references[img]) {
        if (ref.empty()) continue;
        const double lcs = static_cast<double>(detail_metrics::lcs_length(cand, ref));
        if (lcs == 0.0) continue;
        const double p = lcs / static_cast<double>(cand.size());
        const double r = lcs / static_cast<double>(ref.size());
        const double f = (1.0 + kBeta * kBeta) * p * r / (r + kBeta * kBeta * p);
        best = std::max(best, f);
      }
    }
    sum += best;
  }
  return sum / static_cast<double>(input.size());
}

/// Plain CIDEr (not CIDEr-D): TF-IDF n-gram cosine similarity for n = 1..4
/// averaged over references and orders, scaled by 10, then averaged over
/// images. Document frequencies come from the reference corpus; candidate
/// n-grams unseen there fall back to a document frequency of one.
inline double cider(const EvalInput& input, std::vector<double>* per_image = nullptr) {
  input.validate();
  if (input.size() < 2) throw DataError("cider: need at least two images for IDF");
  constexpr std::size_t kOrders = 4;
  const double log_images = std::log(static_cast<double>(input.size()));
  // image frequency per n-gram, per order
  std::vector<std::map<std::string, long>> doc_freq(kOrders);
  for (const auto& refs : input.references) {
    for (std::size_t n = 1; n <= kOrders; ++n) {
      std::set<std::string> seen;
      for (const auto& ref : refs)
        for (const auto& [key, count] : detail_metrics::ngram_counts(ref, n)) seen.insert(key);
      for (const auto& key : seen) ++doc_freq[n - 1][key];
    }
  }
  auto idf = [&](std::size_t order, const std::string& key) {
    auto it = doc_freq[order].find(key);
    const long df = it == doc_freq[order].end() ? 1 : std::max(1L, it->second);
    return log_images - std::log(static_cast<double>(df));
  };
  auto tfidf = [&](const std::vector<std::string>& tokens, std::size_t order) {
    std::map<std::string, double> vec;
    for (const auto& [key, count] : detail_metrics::ngram_counts(tokens, order + 1))
      vec[key] = static_cast<double>(count) * idf(order, key);
    return vec;
  };
  auto cosine = [](const std::map<std::string, double>& a,
                   const std::map<std::string, double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (const auto& [key, va] : a) {
      na += va * va;
      auto it = b.find(key);
      if (it != b.end()) dot += va * it->second;
    }
    for (const auto& [key, vb] : b) nb += vb * vb;
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
  };
  if (per_image) per_image->clear();
  double corpus_sum = 0.0;
  for (std::size_t img = 0; img < input.size(); ++img) {
    double order_sum = 0.0;
    for (std::size_t order = 0; order < kOrders; ++order) {
      const auto cand_vec = tfidf(input.candidates[img], order);
      double ref_sum = 0.0;
      for (const auto& ref : input.references[img])
        ref_sum += cosine(cand_vec, tfidf(ref, order));
      order_sum += ref_sum / static_cast<double>(input.references[img].size());
    }
    const double score = 10.0 * order_sum / static_cast<double>(kOrders);
    if (per_image) per_image->push_back(score);
    corpus_sum += score;
  }
  return corpus_sum / static_cast<double>(input.size());
}

/// Number of distinct tokens across all captions, reserved markers excluded.
inline std::size_t distinct_words(const std::vector<std::vector<std::string>>& captions) {
  std::set<std::string> words;
  for (const auto& caption : captions)
    for (const auto& tok : caption)
      if (tok != Vocabulary::kStartToken && tok != Vocabulary::kEndToken &&
          tok != Vocabulary::kUnkToken)
        words.insert(tok);
  return words.size();
}

struct EvalReport {
  double bleu1 = 0, bleu2 = 0, bleu3 = 0, bleu4 = 0;
  double rouge_l = 0, cider = 0;
  std::size_t distinct_words = 0;
  std::vector<std::string> image_ids;
  std::vector<double> per_image_cider;
};

inline EvalReport evaluate_all(const EvalInput& input) {
  EvalReport report;
  report.bleu1 = bleu(input, 1);
  report.bleu2 = bleu(input, 2);
  report.bleu3 = bleu(input, 3);
  report.bleu4 = bleu(input, 4);
  report.rouge_l = rouge_l(input);
  report.cider = cider(input, &report.per_image_cider);
  report.distinct_words = distinct_words(input.candidates);
  report.image_ids = input.image_ids;
  return report;
}

/// Key=value lines plus a per-image section.
inline void write_report(std::ostream& os, const EvalReport& r) {
  os << std::setprecision(17);
  os << "bleu1=" << r.bleu1 << '\n'
     << "bleu2=" << r.bleu2 << '\n'
     << "bleu3=" << r.bleu3 << '\n'
     << "bleu4=" << r.bleu4 << '\n'
     << "rouge_l=" << r.rouge_l << '\n'
     << "cider=" << r.cider << '\n'
     << "distinct_words=" << r.distinct_words << '\n';
  os << "[per_image_cider]\n";
  for (std::size_t i = 0; i < r.per_image_cider.size(); ++i) {
    const std::string id = i < r.image_ids.size() ? r.image_ids[i] : std::to_string(i);
    os << id << '=' << r.per_image_cider[i] << '\n';
  }
}

}  // namespace guidecap
