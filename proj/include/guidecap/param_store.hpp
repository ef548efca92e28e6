#pragma once

#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "guidecap/errors.hpp"
#include "guidecap/tensor.hpp"

namespace guidecap {

/// Named model tensors with paired gradient and AdaGrad accumulator buffers.
/// Entries are kept in name order so that every whole-store iteration
/// (initialization, optimizer steps, serialization) is deterministic.
class ParamStore {
 public:
  struct Entry {
    std::size_t rows = 0;
    std::size_t cols = 0;  // cols == 0 means a vector of length `rows`
    bool is_bias = false;
    std::vector<double> value, grad, accum;

    bool is_matrix() const { return cols > 0; }
    std::size_t size() const { return value.size(); }
  };

  void add_matrix(const std::string& name, std::size_t rows, std::size_t cols) {
    if (rows == 0 || cols == 0)
      throw DimensionError("param '" + name + "': zero-sized matrix");
    insert(name, Entry{rows, cols, false, std::vector<double>(rows * cols, 0.0),
                       std::vector<double>(rows * cols, 0.0),
                       std::vector<double>(rows * cols, 0.0)});
  }

  void add_vector(const std::string& name, std::size_t len, bool is_bias = false) {
    if (len == 0) throw DimensionError("param '" + name + "': zero-sized vector");
    insert(name, Entry{len, 0, is_bias, std::vector<double>(len, 0.0),
                       std::vector<double>(len, 0.0), std::vector<double>(len, 0.0)});
  }

  bool has(const std::string& name) const { return entries_.count(name) > 0; }

  Entry& at(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw IndexError("unknown parameter '" + name + "'");
    return it->second;
  }
  const Entry& at(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw IndexError("unknown parameter '" + name + "'");
    return it->second;
  }

  std::map<std::string, Entry>& entries() { return entries_; }
  const std::map<std::string, Entry>& entries() const { return entries_; }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [name, e] : entries_) n += e.size();
    return n;
  }

  bool empty() const { return entries_.empty(); }

  void zero_grads() {
    for (auto& [name, e] : entries_) std::fill(e.grad.begin(), e.grad.end(), 0.0);
  }

  /// One tensor per entry: a shape header line followed by its values.
  void save(std::ostream& os) const {
    os << std::setprecision(17);
    for (const auto& [name, e] : entries_) {
      os << "param " << name << ' ' << (e.is_matrix() ? "mat" : "vec") << ' '
         << e.rows;
      if (e.is_matrix()) os << ' ' << e.cols;
      if (e.is_bias) os << " bias";
      os << '\n';
      const std::size_t per_line = e.is_matrix() ? e.cols : e.rows;
      for (std::size_t i = 0; i < e.size(); ++i) {
        os << e.value[i];
        os << (((i + 1) % per_line == 0) ? '\n' : ' ');
      }
    }
    os << "end\n";
  }

  void load(std::istream& is) {
    entries_.clear();
    std::string tag;
    while (is >> tag) {
      if (tag == "end") return;
      if (tag != "param") throw DataError("param store: expected 'param', got '" + tag + "'");
      std::string name, kind;
      std::size_t rows = 0;
      if (!(is >> name >> kind >> rows))
        throw DataError("param store: truncated header");
      Entry e;
      e.rows = rows;
      if (kind == "mat") {
        if (!(is >> e.cols) || e.cols == 0)
          throw DataError("param '" + name + "': bad column count");
      } else if (kind != "vec") {
        throw DataError("param '" + name + "': unknown kind '" + kind + "'");
      }
      // optional "bias" marker before the numbers
      is >> std::ws;
      if (is.peek() == 'b') {
        std::string marker;
        is >> marker;
        if (marker != "bias") throw DataError("param '" + name + "': bad marker '" + marker + "'");
        e.is_bias = true;
      }
      const std::size_t n = e.is_matrix() ? e.rows * e.cols : e.rows;
      e.value.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        if (!(is >> e.value[i]))
          throw DataError("param '" + name + "': truncated values");
      }
      e.grad.assign(n, 0.0);
      e.accum.assign(n, 0.0);
      entries_.emplace(name, std::move(e));
    }
    throw DataError("param store: missing 'end' marker");
  }

  std::string to_string() const {
    std::ostringstream os;
    save(os);
    return os.str();
  }

 private:
  void insert(const std::string& name, Entry e) {
    if (has(name)) throw ConfigError("duplicate parameter '" + name + "'");
    entries_.emplace(name, std::move(e));
  }

  std::map<std::string, Entry> entries_;
};

}  // namespace guidecap
