#pragma once

// Text formats: flat key = value configuration files, design/ground-truth
// CSV, solver trace CSV. Floats are written with 17 significant digits.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ncpath/error.hpp"
#include "ncpath/ground_truth.hpp"
#include "ncpath/loss.hpp"
#include "ncpath/prox_solver.hpp"

namespace ncpath::io {

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline double parse_double(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (trim(text.substr(used)).empty()) return v;
  } catch (const std::exception&) {
  }
  if (text == "inf" || text == "+inf" || text == "infinity") return std::numeric_limits<double>::infinity();
  throw ConfigError(what + ": not a number: '" + text + "'");
}

// ---------------------------------------------------------------------------

/// Flat "key = value" file; '#' starts a comment. Tracks which keys were read
/// so unknown keys can be reported.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(std::istream& in, const std::string& origin = "<config>") {
    KeyValueConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
      }
      const std::string key = trim(line.substr(0, eq));
      if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
      cfg.values_[key] = trim(line.substr(eq + 1));
    }
    return cfg;
  }

  static KeyValueConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    return parse(in, path.string());
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::optional<std::string> get(const std::string& key) const {
    used_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    return get(key).value_or(fallback);
  }

  std::string require_string(const std::string& key) const {
    auto v = get(key);
    if (!v) throw ConfigError("missing required config key '" + key + "'");
    return *v;
  }

  double get_double(const std::string& key, double fallback) const {
    auto v = get(key);
    return v ? parse_double(*v, key) : fallback;
  }

  std::optional<double> get_optional_double(const std::string& key) const {
    auto v = get(key);
    if (!v) return std::nullopt;
    return parse_double(*v, key);
  }

  long long get_int(const std::string& key, long long fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    try {
      std::size_t used = 0;
      const long long x = std::stoll(*v, &used);
      if (trim(v->substr(used)).empty()) return x;
    } catch (const std::exception&) {
    }
    throw ConfigError(key + ": not an integer: '" + *v + "'");
  }

  bool get_bool(const std::string& key, bool fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
    if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
    throw ConfigError(key + ": not a boolean: '" + *v + "'");
  }

  std::vector<std::string> unused_keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_) {
      if (!used_.count(k)) out.push_back(k);
    }
    return out;
  }

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

// ---------------------------------------------------------------------------
// Design CSV: header row, one sample per row.

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open data file: " + path.string());
  CsvTable t;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    auto cells = split(line, ',');
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                        std::to_string(t.header.size()) + " columns, found " + std::to_string(cells.size()));
    }
    std::vector<double> row(cells.size());
    for (std::size_t j = 0; j < cells.size(); ++j) {
      row[j] = parse_double(cells[j], path.string() + ":" + std::to_string(lineno));
    }
    t.rows.push_back(std::move(row));
  }
  if (t.header.empty()) throw ConfigError("data file is empty: " + path.string());
  return t;
}

/// Response column chosen by header name or zero-based index (default 0).
inline DesignData read_design_csv(const std::filesystem::path& path, const std::string& response = "0") {
  const CsvTable t = read_csv(path);
  std::size_t resp = t.header.size();
  for (std::size_t j = 0; j < t.header.size(); ++j) {
    if (t.header[j] == response) resp = j;
  }
  if (resp == t.header.size()) {
    try {
      resp = static_cast<std::size_t>(std::stoul(response));
    } catch (const std::exception&) {
      throw ConfigError("response column '" + response + "' not found in " + path.string());
    }
  }
  if (resp >= t.header.size()) throw ConfigError("response column index out of range in " + path.string());
  if (t.header.size() < 2) throw ConfigError("data file needs a response and at least one feature column");
  if (t.rows.empty()) throw ConfigError("data file has no samples: " + path.string());

  const auto n = static_cast<Eigen::Index>(t.rows.size());
  const auto d = static_cast<Eigen::Index>(t.header.size() - 1);
  Matrix X(n, d);
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index c = 0;
    for (std::size_t j = 0; j < t.header.size(); ++j) {
      if (j == resp) y[i] = t.rows[i][j];
      else X(i, c++) = t.rows[i][j];
    }
  }
  return DesignData(std::move(X), std::move(y));
}

inline void write_design_csv(std::ostream& out, const DesignData& data) {
  out << "y";
  for (Eigen::Index j = 0; j < data.d(); ++j) out << ",x" << (j + 1);
  out << '\n';
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    out << format_double(data.y[i]);
    for (Eigen::Index j = 0; j < data.d(); ++j) out << ',' << format_double(data.X(i, j));
    out << '\n';
  }
}

/// "j,beta_star" with zero-based j.
inline void write_truth_csv(std::ostream& out, const GroundTruth& truth) {
  out << "j,beta_star\n";
  for (Eigen::Index j = 0; j < truth.beta_star.size(); ++j) {
    out << j << ',' << format_double(truth.beta_star[j]) << '\n';
  }
}

inline GroundTruth read_truth_csv(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  if (t.header.size() != 2) throw ConfigError("truth file must have columns j,beta_star: " + path.string());
  Vector beta = Vector::Zero(static_cast<Eigen::Index>(t.rows.size()));
  for (const auto& row : t.rows) {
    const auto j = static_cast<Eigen::Index>(row[0]);
    if (j < 0 || j >= beta.size()) throw ConfigError("truth index out of range in " + path.string());
    beta[j] = row[1];
  }
  return GroundTruth(std::move(beta));
}

// ---------------------------------------------------------------------------
// Solver traces.

inline void write_trace_header(std::ostream& out) { out << "stage,iter,lambda,L,phi,omega,nnz,l2_err\n"; }

inline void write_trace_rows(std::ostream& out, const std::vector<TraceRecord>& trace) {
  for (const auto& r : trace) {
    out << r.stage << ',' << r.iter << ',' << format_double(r.lambda) << ',' << format_double(r.L) << ','
        << format_double(r.phi) << ',' << format_double(r.omega) << ',' << r.nnz << ',';
    if (r.l2_err) out << format_double(*r.l2_err);
    out << '\n';
  }
}

inline void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& trace) {
  write_trace_header(out);
  write_trace_rows(out, trace);
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write output file: " + path.string());
  return out;
}

}  // namespace ncpath::io
