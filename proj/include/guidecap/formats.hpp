#pragma once

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "guidecap/attributes.hpp"
#include "guidecap/decode.hpp"
#include "guidecap/run_config.hpp"

namespace guidecap {

// Checkpoint: header key/value lines, then the vocabulary (token and count
// per line, line order defines ids), the frequent-word list in rank order,
// and the parameter tensors.

inline void save_model(std::ostream& os, const Model& m) {
  os << "guidecap checkpoint v1\n";
  os << "variant " << variant_name(m.cfg.variant) << '\n';
  os << "embed " << m.cfg.embed_dim << '\n';
  os << "hidden " << m.cfg.hidden_dim << '\n';
  os << "annot_dim " << m.cfg.annot_dim << '\n';
  os << "annot_count " << m.cfg.annot_count << '\n';
  os << "review_steps " << m.cfg.review_steps << '\n';
  os << "share_review_params " << (m.cfg.share_review_params ? 1 : 0) << '\n';
  os << "use_guiding " << (m.cfg.use_guiding ? 1 : 0) << '\n';
  os << "attribute_mode " << attribute_mode_name(m.attribute_mode) << '\n';
  os << "mask_annotations " << (m.masks.annotations ? 1 : 0) << '\n';
  os << "mask_attributes " << (m.masks.attributes ? 1 : 0) << '\n';
  os << "[vocab]\n";
  for (std::size_t id = 0; id < m.vocab.size(); ++id)
    os << m.vocab.token(static_cast<int>(id)) << ' ' << m.vocab.count(static_cast<int>(id))
       << '\n';
  os << "[frequent]\n";
  for (int id : m.fws.word_ids) os << m.vocab.token(id) << '\n';
  os << "[params]\n";
  m.params.save(os);
}

inline Model load_model(std::istream& is) {
  Model m;
  std::string line;
  if (!std::getline(is, line) || line != "guidecap checkpoint v1")
    throw DataError("checkpoint: bad or missing header");
  while (std::getline(is, line)) {
    if (line == "[vocab]") break;
    std::istringstream ss(line);
    std::string key, value;
    if (!(ss >> key >> value)) throw DataError("checkpoint: bad header line '" + line + "'");
    if (key == "variant") m.cfg.variant = variant_from(value);
    else if (key == "embed") m.cfg.embed_dim = std::stoul(value);
    else if (key == "hidden") m.cfg.hidden_dim = std::stoul(value);
    else if (key == "annot_dim") m.cfg.annot_dim = std::stoul(value);
    else if (key == "annot_count") m.cfg.annot_count = std::stoul(value);
    else if (key == "review_steps") m.cfg.review_steps = std::stoul(value);
    else if (key == "share_review_params") m.cfg.share_review_params = value == "1";
    else if (key == "use_guiding") m.cfg.use_guiding = value == "1";
    else if (key == "attribute_mode") m.attribute_mode = attribute_mode_from(value);
    else if (key == "mask_annotations") m.masks.annotations = value == "1";
    else if (key == "mask_attributes") m.masks.attributes = value == "1";
    else throw DataError("checkpoint: unknown header key '" + key + "'");
  }
  // vocabulary: reserved markers come first and must match the built-ins
  std::vector<std::pair<std::string, long>> tokens;
  while (std::getline(is, line)) {
    if (line == "[frequent]") break;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string tok;
    long count = 0;
    if (!(ss >> tok >> count)) throw DataError("checkpoint: bad vocab line '" + line + "'");
    tokens.emplace_back(tok, count);
  }
  if (tokens.size() < 3 || tokens[0].first != Vocabulary::kStartToken ||
      tokens[1].first != Vocabulary::kEndToken || tokens[2].first != Vocabulary::kUnkToken)
    throw DataError("checkpoint: vocabulary must begin with the reserved markers");
  for (std::size_t i = 3; i < tokens.size(); ++i)
    m.vocab.add(tokens[i].first, tokens[i].second);
  m.cfg.vocab_size = m.vocab.size();
  // frequent words in rank order
  while (std::getline(is, line)) {
    if (line == "[params]") break;
    if (line.empty()) continue;
    if (!m.vocab.contains(line))
      throw DataError("checkpoint: frequent word '" + line + "' not in vocabulary");
    const int id = m.vocab.id_or_unk(line);
    m.fws.rank_of.emplace(id, static_cast<int>(m.fws.word_ids.size()));
    m.fws.word_ids.push_back(id);
  }
  m.cfg.frequent = m.fws.size();
  m.params.load(is);
  // validate shapes against a freshly registered store
  const ParamStore expected = make_param_store(m.cfg);
  if (expected.entries().size() != m.params.entries().size())
    throw DataError("checkpoint: parameter set does not match the configuration");
  for (const auto& [name, e] : expected.entries()) {
    if (!m.params.has(name))
      throw DataError("checkpoint: missing parameter '" + name + "'");
    const auto& got = m.params.at(name);
    if (got.rows != e.rows || got.cols != e.cols)
      throw DataError("checkpoint: parameter '" + name + "' has unexpected shape");
  }
  return m;
}

inline void save_model_file(const std::string& path, const Model& m) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write checkpoint '" + path + "'");
  save_model(os, m);
}

inline Model load_model_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open checkpoint '" + path + "'");
  return load_model(is);
}

// Attribute predictor file: dims header plus its two tensors.

inline void save_attributes(std::ostream& os, const AttributePredictor& p,
                            std::size_t annot_dim, std::size_t frequent) {
  os << "guidecap attributes v1\n";
  os << "annot_dim " << annot_dim << '\n';
  os << "frequent " << frequent << '\n';
  os << "[params]\n";
  p.params().save(os);
}

inline AttributePredictor load_attributes(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "guidecap attributes v1")
    throw DataError("attribute model: bad or missing header");
  std::size_t annot_dim = 0, frequent = 0;
  while (std::getline(is, line)) {
    if (line == "[params]") break;
    std::istringstream ss(line);
    std::string key;
    std::size_t value = 0;
    if (!(ss >> key >> value))
      throw DataError("attribute model: bad header line '" + line + "'");
    if (key == "annot_dim") annot_dim = value;
    else if (key == "frequent") frequent = value;
    else throw DataError("attribute model: unknown header key '" + key + "'");
  }
  if (annot_dim == 0 || frequent == 0)
    throw DataError("attribute model: missing dimensions");
  AttributePredictor p(annot_dim, frequent, 0);
  p.params().load(is);
  if (!p.params().has(AttributePredictor::kW) || !p.params().has(AttributePredictor::kB))
    throw DataError("attribute model: missing tensors");
  p.mark_trained();
  return p;
}

inline AttributePredictor load_attributes_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open attribute model '" + path + "'");
  return load_attributes(is);
}

}  // namespace guidecap
