#pragma once

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "guidecap/errors.hpp"

namespace guidecap {

// Flat sectioned key=value run configuration. Comments start a line with
// '#'. Unknown sections and keys are rejected with line/column diagnostics.

struct SynthSection {
  bool present = false;
  std::size_t concepts = 10;
  std::size_t annot_dim = 16;
  std::size_t annot_count = 6;
  std::size_t train_records = 200;
  std::size_t val_records = 50;
  std::size_t test_records = 50;
  std::size_t captions_per_record = 3;
  double noise = 0.05;
  bool operator==(const SynthSection&) const = default;
};

struct DataSection {
  bool present = false;
  std::string train, val, test;
  bool operator==(const DataSection&) const = default;
};

struct CorpusSection {
  long min_count = 5;
  std::size_t frequent_words = 50;
  bool operator==(const CorpusSection&) const = default;
};

struct ModelSection {
  std::size_t embed = 32;
  std::size_t hidden = 64;
  std::size_t review_steps = 8;
  bool share_review_params = true;
  bool use_guiding = true;
  bool operator==(const ModelSection&) const = default;
};

struct TrainSection {
  double lr = 0.01;
  double weight_decay = 1e-4;
  double lambda1 = 10.0;
  double lambda2 = 10.0;
  std::size_t max_epochs = 30;
  std::size_t patience = 10;
  std::size_t batch_size = 16;
  std::size_t attr_epochs = 50;
  std::string attribute_mode = "oracle";
  bool mask_annotations = false;
  bool mask_attributes = false;
  bool operator==(const TrainSection&) const = default;
};

struct DecodeSection {
  std::size_t beam_width = 3;
  std::size_t max_len = 30;
  bool length_normalize = false;
  bool operator==(const DecodeSection&) const = default;
};

struct GradcheckSection {
  std::size_t vocab = 12;
  std::size_t embed = 6;
  std::size_t hidden = 8;
  std::size_t annot_dim = 6;
  std::size_t annot_count = 4;
  std::size_t frequent = 5;
  std::size_t review_steps = 3;
  double step = 0.02;
  double tolerance = 1e-4;
  bool operator==(const GradcheckSection&) const = default;
};

struct AblateSection {
  std::size_t seeds = 5;
  std::size_t epochs = 6;
  std::vector<double> lambda_sweep;
  bool operator==(const AblateSection&) const = default;
};

struct RunConfig {
  std::string variant = "soft";
  std::uint64_t seed = 1;
  std::string out_dir = ".";
  SynthSection synth;
  DataSection data;
  CorpusSection corpus;
  ModelSection model;
  TrainSection train;
  DecodeSection decode;
  GradcheckSection gradcheck;
  AblateSection ablate;
  bool operator==(const RunConfig&) const = default;
};

namespace detail_config {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

[[noreturn]] inline void fail(std::size_t line, std::size_t col, const std::string& what) {
  throw ConfigError("config line " + std::to_string(line) + ", column " +
                    std::to_string(col) + ": " + what);
}

struct KeyValue {
  std::string section, key, value;
  std::size_t line = 0, col = 0;

  double as_double() const {
    try {
      std::size_t used = 0;
      const double v = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
      return v;
    } catch (const std::exception&) {
      fail(line, col, "expected a number for '" + key + "', got '" + value + "'");
    }
  }
  std::size_t as_size() const {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(value, &used);
      if (used != value.size() || v < 0) throw std::invalid_argument(value);
      return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
      fail(line, col, "expected a non-negative integer for '" + key + "', got '" + value + "'");
    }
  }
  long as_long() const {
    try {
      std::size_t used = 0;
      const long v = std::stol(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
      return v;
    } catch (const std::exception&) {
      fail(line, col, "expected an integer for '" + key + "', got '" + value + "'");
    }
  }
  std::uint64_t as_u64() const {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
      return v;
    } catch (const std::exception&) {
      fail(line, col, "expected an unsigned integer for '" + key + "', got '" + value + "'");
    }
  }
  bool as_bool() const {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    fail(line, col, "expected true/false for '" + key + "', got '" + value + "'");
  }
  std::vector<double> as_double_list() const {
    std::vector<double> out;
    if (trim(value).empty()) return out;
    std::istringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      try {
        std::size_t used = 0;
        out.push_back(std::stod(item, &used));
        if (used != item.size()) throw std::invalid_argument(item);
      } catch (const std::exception&) {
        fail(line, col, "bad number '" + item + "' in list for '" + key + "'");
      }
    }
    return out;
  }
};

}  // namespace detail_config

inline RunConfig parse_run_config(std::istream& is) {
  using detail_config::KeyValue;
  using detail_config::fail;
  using detail_config::trim;
  RunConfig cfg;
  std::string section;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string body = trim(line);
    if (body.empty() || body[0] == '#') continue;
    const std::size_t col = line.find_first_not_of(" \t") + 1;
    if (body.front() == '[') {
      if (body.back() != ']') fail(line_no, col, "unterminated section header");
      section = trim(body.substr(1, body.size() - 2));
      static const char* known[] = {"run",    "synth",     "data",   "corpus", "model",
                                    "train",  "decode",    "gradcheck", "ablate"};
      bool ok = false;
      for (const char* k : known) ok = ok || section == k;
      if (!ok) fail(line_no, col, "unknown section '" + section + "'");
      if (section == "synth") cfg.synth.present = true;
      if (section == "data") cfg.data.present = true;
      continue;
    }
    const std::size_t eq = body.find('=');
    if (eq == std::string::npos) fail(line_no, col, "expected key = value");
    KeyValue kv;
    kv.section = section;
    kv.key = trim(body.substr(0, eq));
    kv.value = trim(body.substr(eq + 1));
    kv.line = line_no;
    kv.col = col;
    if (kv.key.empty()) fail(line_no, col, "empty key");
    if (section.empty()) fail(line_no, col, "key '" + kv.key + "' outside any section");

    if (section == "run") {
      if (kv.key == "variant") cfg.variant = kv.value;
      else if (kv.key == "seed") cfg.seed = kv.as_u64();
      else if (kv.key == "out_dir") cfg.out_dir = kv.value;
      else fail(line_no, col, "unknown key '" + kv.key + "' in [run]");
    } else if (section == "synth") {
      auto& s = cfg.synth;
      if (kv.key == "concepts") s.concepts = kv.as_size();
      else if (kv.key == "annot_dim") s.annot_dim = kv.as_size();
      else if (kv.key == "annot_count") s.annot_count = kv.as_size();
      else if (kv.key == "train_records") s.train_records = kv.as_size();
      else if (kv.key == "val_records") s.val_records = kv.as_size();
      else if (kv.key == "test_records") s.test_records = kv.as_size();
      else if (kv.key == "captions_per_record") s.captions_per_record = kv.as_size();
      else if (kv.key == "noise") s.noise = kv.as_double();
      else fail(line_no, col, "unknown key '" + kv.key + "' in [synth]");
    } else if (section == "data") {
      if (kv.key == "train") cfg.data.train = kv.value;
      else if (kv.key == "val") cfg.data.val = kv.value;
      else if (kv.key == "test") cfg.data.test = kv.value;
      else fail(line_no, col, "unknown key '" + kv.key + "' in [data]");
    } else if (section == "corpus") {
      if (kv.key == "min_count") cfg.corpus.min_count = kv.as_long();
      else if (kv.key == "frequent_words") cfg.corpus.frequent_words = kv.as_size();
      else fail(line_no, col, "unknown key '" + kv.key + "' in [corpus]");
    } else if (section == "model") {
      auto& m = cfg.model;
      if (kv.key == "embed") m.embed = kv.as_size();
      else if (kv.key == "hidden") m.hidden = kv.as_size();
      else if (kv.key == "review_steps") m.review_steps = kv.as_size();
      else if (kv.key == "share_review_params") m.share_review_params = kv.as_bool();
      else if (kv.key == "use_guiding") m.use_guiding = kv.as_bool();
      else fail(line_no, col, "unknown key '" + kv.key + "' in [model]");
    } else if (section == "train") {
      auto& t = cfg.train;
      if (kv.key == "lr") t.lr = kv.as_double();
      else if (kv.key == "weight_decay") t.weight_decay = kv.as_double();
      else if (kv.key == "lambda1") t.lambda1 = kv.as_double();
      else if (kv.key == "lambda2") t.lambda2 = kv.as_double();
      else if (kv.key == "max_epochs") t.max_epochs = kv.as_size();
      else if (kv.key == "patience") t.patience = kv.as_size();
      else if (kv.key == "batch_size") t.batch_size = kv.as_size();
      else if (kv.key == "attr_epochs") t.attr_epochs = kv.as_size();
      else if (kv.key == "attribute_mode") t.attribute_mode = kv.value;
      else if (kv.key == "mask_annotations") t.mask_annotations = kv.as_bool();
      else if (kv.key == "mask_attributes") t.mask_attributes = kv.as_bool();
      else fail(line_no, col, "unknown key '" + kv.key + "' in [train]");
    } else if (section == "decode") {
      auto& d = cfg.decode;
      if (kv.key == "beam_width") d.beam_width = kv.as_size();
      else if (kv.key == "max_len") d.max_len = kv.as_size();
      else if (kv.key == "length_normalize") d.length_normalize = kv.as_bool();
      else fail(line_no, col, "unknown key '" + kv.key + "' in [decode]");
    } else if (section == "gradcheck") {
      auto& g = cfg.gradcheck;
      if (kv.key == "vocab") g.vocab = kv.as_size();
      else if (kv.key == "embed") g.embed = kv.as_size();
      else if (kv.key == "hidden") g.hidden = kv.as_size();
      else if (kv.key == "annot_dim") g.annot_dim = kv.as_size();
      else if (kv.key == "annot_count") g.annot_count = kv.as_size();
      else if (kv.key == "frequent") g.frequent = kv.as_size();
      else if (kv.key == "review_steps") g.review_steps = kv.as_size();
      else if (kv.key == "step") g.step = kv.as_double();
      else if (kv.key == "tolerance") g.tolerance = kv.as_double();
      else fail(line_no, col, "unknown key '" + kv.key + "' in [gradcheck]");
    } else if (section == "ablate") {
      auto& a = cfg.ablate;
      if (kv.key == "seeds") a.seeds = kv.as_size();
      else if (kv.key == "epochs") a.epochs = kv.as_size();
      else if (kv.key == "lambda_sweep") a.lambda_sweep = kv.as_double_list();
      else fail(line_no, col, "unknown key '" + kv.key + "' in [ablate]");
    }
  }
  if (cfg.variant != "soft" && cfg.variant != "review")
    throw ConfigError("config: variant must be 'soft' or 'review', got '" + cfg.variant + "'");
  return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open '" + path + "'");
  return parse_run_config(is);
}

inline void serialize_run_config(const RunConfig& cfg, std::ostream& os) {
  os << std::setprecision(17);
  os << "[run]\n"
     << "variant = " << cfg.variant << '\n'
     << "seed = " << cfg.seed << '\n'
     << "out_dir = " << cfg.out_dir << '\n';
  if (cfg.synth.present) {
    const auto& s = cfg.synth;
    os << "[synth]\n"
       << "concepts = " << s.concepts << '\n'
       << "annot_dim = " << s.annot_dim << '\n'
       << "annot_count = " << s.annot_count << '\n'
       << "train_records = " << s.train_records << '\n'
       << "val_records = " << s.val_records << '\n'
       << "test_records = " << s.test_records << '\n'
       << "captions_per_record = " << s.captions_per_record << '\n'
       << "noise = " << s.noise << '\n';
  }
  if (cfg.data.present) {
    os << "[data]\n"
       << "train = " << cfg.data.train << '\n'
       << "val = " << cfg.data.val << '\n'
       << "test = " << cfg.data.test << '\n';
  }
  os << "[corpus]\n"
     << "min_count = " << cfg.corpus.min_count << '\n'
     << "frequent_words = " << cfg.corpus.frequent_words << '\n';
  os << "[model]\n"
     << "embed = " << cfg.model.embed << '\n'
     << "hidden = " << cfg.model.hidden << '\n'
     << "review_steps = " << cfg.model.review_steps << '\n'
     << "share_review_params = " << (cfg.model.share_review_params ? "true" : "false") << '\n'
     << "use_guiding = " << (cfg.model.use_guiding ? "true" : "false") << '\n';
  os << "[train]\n"
     << "lr = " << cfg.train.lr << '\n'
     << "weight_decay = " << cfg.train.weight_decay << '\n'
     << "lambda1 = " << cfg.train.lambda1 << '\n'
     << "lambda2 = " << cfg.train.lambda2 << '\n'
     << "max_epochs = " << cfg.train.max_epochs << '\n'
     << "patience = " << cfg.train.patience << '\n'
     << "batch_size = " << cfg.train.batch_size << '\n'
     << "attr_epochs = " << cfg.train.attr_epochs << '\n'
     << "attribute_mode = " << cfg.train.attribute_mode << '\n'
     << "mask_annotations = " << (cfg.train.mask_annotations ? "true" : "false") << '\n'
     << "mask_attributes = " << (cfg.train.mask_attributes ? "true" : "false") << '\n';
  os << "[decode]\n"
     << "beam_width = " << cfg.decode.beam_width << '\n'
     << "max_len = " << cfg.decode.max_len << '\n'
     << "length_normalize = " << (cfg.decode.length_normalize ? "true" : "false") << '\n';
  os << "[gradcheck]\n"
     << "vocab = " << cfg.gradcheck.vocab << '\n'
     << "embed = " << cfg.gradcheck.embed << '\n'
     << "hidden = " << cfg.gradcheck.hidden << '\n'
     << "annot_dim = " << cfg.gradcheck.annot_dim << '\n'
     << "annot_count = " << cfg.gradcheck.annot_count << '\n'
     << "frequent = " << cfg.gradcheck.frequent << '\n'
     << "review_steps = " << cfg.gradcheck.review_steps << '\n'
     << "step = " << cfg.gradcheck.step << '\n'
     << "tolerance = " << cfg.gradcheck.tolerance << '\n';
  os << "[ablate]\n"
     << "seeds = " << cfg.ablate.seeds << '\n'
     << "epochs = " << cfg.ablate.epochs << '\n';
  os << "lambda_sweep = ";
  for (std::size_t i = 0; i < cfg.ablate.lambda_sweep.size(); ++i) {
    if (i) os << ',';
    os << cfg.ablate.lambda_sweep[i];
  }
  os << '\n';
}

}  // namespace guidecap
