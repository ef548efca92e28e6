#pragma once

#include <algorithm>
#include <cctype>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "guidecap/errors.hpp"
#include "guidecap/tensor.hpp"

namespace guidecap {

inline constexpr std::size_t kMaxCaptionTokens = 30;

/// Lowercase, strip everything outside a-z and space, split on spaces,
/// truncate to kMaxCaptionTokens. Start/end markers are added later at
/// encoding time.
inline std::vector<std::string> preprocess_caption(const std::string& raw) {
  std::string cleaned;
  cleaned.reserve(raw.size());
  for (char ch : raw) {
    const unsigned char c = static_cast<unsigned char>(ch);
    if (c >= 'a' && c <= 'z') {
      cleaned.push_back(ch);
    } else if (c >= 'A' && c <= 'Z') {
      cleaned.push_back(static_cast<char>(c - 'A' + 'a'));
    } else if (c == ' ') {
      cleaned.push_back(' ');
    }
  }
  std::vector<std::string> tokens;
  std::istringstream ss(cleaned);
  std::string tok;
  while (ss >> tok) {
    tokens.push_back(tok);
    if (tokens.size() == kMaxCaptionTokens) break;
  }
  return tokens;
}

/// Token <-> id bijection with reserved start/end/unknown markers at fixed
/// ids. Ids are dense from zero; non-reserved tokens are ordered by
/// descending count, ties alphabetical.
class Vocabulary {
 public:
  static constexpr int kStart = 0;
  static constexpr int kEnd = 1;
  static constexpr int kUnk = 2;
  static constexpr const char* kStartToken = "<s>";
  static constexpr const char* kEndToken = "</s>";
  static constexpr const char* kUnkToken = "<unk>";

  Vocabulary() {
    add(kStartToken, 0);
    add(kEndToken, 0);
    add(kUnkToken, 0);
  }

  static bool reserved(int id) { return id == kStart || id == kEnd || id == kUnk; }

  int add(const std::string& token, long count) {
    if (token_to_id_.count(token))
      throw DataError("vocabulary: duplicate token '" + token + "'");
    const int id = static_cast<int>(id_to_token_.size());
    id_to_token_.push_back(token);
    counts_.push_back(count);
    token_to_id_.emplace(token, id);
    return id;
  }

  int id_or_unk(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? kUnk : it->second;
  }

  bool contains(const std::string& token) const { return token_to_id_.count(token) > 0; }

  const std::string& token(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size())
      throw IndexError("vocabulary: id " + std::to_string(id) + " out of range");
    return id_to_token_[static_cast<std::size_t>(id)];
  }

  long count(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= counts_.size())
      throw IndexError("vocabulary: id " + std::to_string(id) + " out of range");
    return counts_[static_cast<std::size_t>(id)];
  }

  std::size_t size() const { return id_to_token_.size(); }

  /// Token list -> id sequence framed with start/end markers.
  std::vector<int> encode(const std::vector<std::string>& tokens) const {
    std::vector<int> ids;
    ids.reserve(tokens.size() + 2);
    ids.push_back(kStart);
    for (const std::string& t : tokens) ids.push_back(id_or_unk(t));
    ids.push_back(kEnd);
    return ids;
  }

  bool operator==(const Vocabulary& o) const {
    return id_to_token_ == o.id_to_token_ && counts_ == o.counts_;
  }

 private:
  std::vector<std::string> id_to_token_;
  std::vector<long> counts_;
  std::unordered_map<std::string, int> token_to_id_;
};

/// Tokens with count >= min_count get ids; everything else maps to the
/// unknown marker.
inline Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& corpus,
                                   long min_count = 5) {
  if (min_count < 1) throw ConfigError("build_vocabulary: min_count must be >= 1");
  std::map<std::string, long> counts;
  std::size_t total = 0;
  for (const auto& caption : corpus) {
    for (const auto& tok : caption) {
      ++counts[tok];
      ++total;
    }
  }
  if (total == 0) throw DataError("build_vocabulary: empty corpus");
  std::vector<std::pair<std::string, long>> kept;
  for (const auto& [tok, n] : counts)
    if (n >= min_count) kept.emplace_back(tok, n);
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary vocab;
  for (const auto& [tok, n] : kept) vocab.add(tok, n);
  return vocab;
}

/// The F most frequent non-reserved words, count-descending, ties
/// alphabetical. Doubles as the index set for guiding scores: rank(word id)
/// is the score position of that word.
struct FrequentWordSet {
  std::vector<int> word_ids;               // rank order, most frequent first
  std::unordered_map<int, int> rank_of;    // word id -> rank
  bool truncated = false;                  // fewer words available than requested

  std::size_t size() const { return word_ids.size(); }

  int rank(int word_id) const {
    auto it = rank_of.find(word_id);
    return it == rank_of.end() ? -1 : it->second;
  }

  /// Presence mask over ranks for one encoded caption.
  std::vector<char> caption_mask(const std::vector<int>& caption) const {
    std::vector<char> mask(word_ids.size(), 0);
    for (int id : caption) {
      const int r = rank(id);
      if (r >= 0) mask[static_cast<std::size_t>(r)] = 1;
    }
    return mask;
  }

  bool operator==(const FrequentWordSet& o) const { return word_ids == o.word_ids; }
};

inline FrequentWordSet frequent_words(const std::vector<std::vector<std::string>>& corpus,
                                      const Vocabulary& vocab, std::size_t top) {
  if (top < 1) throw ConfigError("frequent_words: requested size must be >= 1");
  std::map<int, long> counts;
  for (const auto& caption : corpus) {
    for (const auto& tok : caption) {
      const int id = vocab.id_or_unk(tok);
      if (!Vocabulary::reserved(id)) ++counts[id];
    }
  }
  std::vector<std::pair<int, long>> order(counts.begin(), counts.end());
  std::sort(order.begin(), order.end(), [&vocab](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return vocab.token(a.first) < vocab.token(b.first);
  });
  FrequentWordSet fws;
  fws.truncated = order.size() < top;
  const std::size_t take = std::min(top, order.size());
  for (std::size_t i = 0; i < take; ++i) {
    fws.word_ids.push_back(order[i].first);
    fws.rank_of.emplace(order[i].first, static_cast<int>(i));
  }
  return fws;
}

/// Per-record features: a global vector, the annotation vectors attention
/// runs over, and the attribute (frequent-word occurrence) vector.
struct AnnotationSet {
  Tensor1 global;                 // a0
  std::vector<Tensor1> annots;    // a1..ak, equal dims
  Tensor1 attrs;                  // length = frequent-word count, entries in [0,1]
};

struct CaptionRecord {
  std::string image_id;
  AnnotationSet annotations;
  std::vector<std::string> raw_captions;
  std::vector<std::vector<int>> captions;  // encoded, framed with start/end
};

struct DatasetSplit {
  std::vector<CaptionRecord> train, val, test;
};

struct Corpus {
  DatasetSplit data;
  Vocabulary vocab;
  FrequentWordSet fws;
  std::size_t dropped_captions = 0;  // captions empty after preprocessing
};

/// Build vocabulary and frequent words from the train split, then encode all
/// captions. Captions that preprocess to nothing are dropped and counted.
inline Corpus build_corpus(DatasetSplit raw, long min_count, std::size_t frequent) {
  Corpus corpus;
  std::vector<std::vector<std::string>> train_tokens;
  for (const CaptionRecord& rec : raw.train) {
    for (const std::string& cap : rec.raw_captions) {
      auto toks = preprocess_caption(cap);
      if (!toks.empty()) train_tokens.push_back(std::move(toks));
    }
  }
  corpus.vocab = build_vocabulary(train_tokens, min_count);
  corpus.fws = frequent_words(train_tokens, corpus.vocab, frequent);
  corpus.data = std::move(raw);
  for (auto* split : {&corpus.data.train, &corpus.data.val, &corpus.data.test}) {
    for (CaptionRecord& rec : *split) {
      rec.captions.clear();
      for (const std::string& cap : rec.raw_captions) {
        auto toks = preprocess_caption(cap);
        if (toks.empty()) {
          ++corpus.dropped_captions;
          continue;
        }
        rec.captions.push_back(corpus.vocab.encode(toks));
      }
    }
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// Dataset file format: one record per line,
//   image_id<TAB>[a0][a1]...[ak]<TAB>caption(<TAB>caption)*
// where each bracketed group holds comma-separated decimals and groups are
// separated by single spaces (global vector first).

inline void write_dataset(std::ostream& os, const std::vector<CaptionRecord>& records) {
  os << std::setprecision(17);
  for (const CaptionRecord& rec : records) {
    os << rec.image_id << '\t';
    bool first_group = true;
    auto emit = [&](const Tensor1& vec) {
      if (!first_group) os << ' ';
      first_group = false;
      os << '[';
      for (std::size_t i = 0; i < vec.size(); ++i) {
        if (i) os << ',';
        os << vec[i];
      }
      os << ']';
    };
    emit(rec.annotations.global);
    for (const Tensor1& a : rec.annotations.annots) emit(a);
    for (const std::string& cap : rec.raw_captions) os << '\t' << cap;
    os << '\n';
  }
}

inline std::vector<CaptionRecord> read_dataset(std::istream& is) {
  std::vector<CaptionRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab == std::string::npos ? tab : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() < 2)
      throw DataError("dataset line " + std::to_string(line_no) + ": expected id and features");
    CaptionRecord rec;
    rec.image_id = fields[0];
    const std::string& feats = fields[1];
    std::size_t pos = 0;
    std::vector<Tensor1> groups;
    while (pos < feats.size()) {
      if (feats[pos] == ' ') {
        ++pos;
        continue;
      }
      if (feats[pos] != '[')
        throw DataError("dataset line " + std::to_string(line_no) + ": expected '['");
      const std::size_t close = feats.find(']', pos);
      if (close == std::string::npos)
        throw DataError("dataset line " + std::to_string(line_no) + ": unterminated group");
      Tensor1 vec;
      std::istringstream nums(feats.substr(pos + 1, close - pos - 1));
      std::string item;
      while (std::getline(nums, item, ',')) {
        try {
          vec.v.push_back(std::stod(item));
        } catch (const std::exception&) {
          throw DataError("dataset line " + std::to_string(line_no) + ": bad number '" +
                          item + "'");
        }
      }
      groups.push_back(std::move(vec));
      pos = close + 1;
    }
    if (groups.size() < 2)
      throw DataError("dataset line " + std::to_string(line_no) +
                      ": need a global vector plus at least one annotation vector");
    rec.annotations.global = std::move(groups.front());
    const std::size_t annot_dim = groups[1].size();
    for (std::size_t i = 1; i < groups.size(); ++i) {
      if (groups[i].size() != annot_dim)
        throw DataError("dataset line " + std::to_string(line_no) +
                        ": annotation vectors have mixed lengths");
      rec.annotations.annots.push_back(std::move(groups[i]));
    }
    for (std::size_t i = 2; i < fields.size(); ++i)
      if (!fields[i].empty()) rec.raw_captions.push_back(fields[i]);
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace guidecap
