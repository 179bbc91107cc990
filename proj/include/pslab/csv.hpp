#pragma once

// Results CSV: one row per (cell, method).
//
// Header:
//   n,exposure_probability,ps_overlap_scenario,method,convergence_pct,
//   bias,se_bias,abs_error,se_abs_error,power_pct,se_power,coverage_pct,
//   se_coverage,dgp_link,unmeasured_confounder,reps,seed
//
// bias is truth minus estimate (mean of z - zhat on the log-odds scale).
// Missing metrics (convergence below 25%) are written as "NA".  Rows are
// ordered by (n desc, exposure probability asc, scenario asc, dgp, method).

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pslab/harness.hpp"

namespace pslab {

inline constexpr const char* kCsvHeader =
    "n,exposure_probability,ps_overlap_scenario,method,convergence_pct,bias,"
    "se_bias,abs_error,se_abs_error,power_pct,se_power,coverage_pct,se_coverage,"
    "dgp_link,unmeasured_confounder,reps,seed";

struct ResultRow {
  std::size_t n = 0;
  double exposure_probability = 0.0;
  int scenario = 0;
  std::string method;
  double convergence_pct = 0.0;
  std::optional<double> bias, se_bias, abs_error, se_abs_error;
  std::optional<double> power_pct, se_power, coverage_pct, se_coverage;
  Link link = Link::logit;
  bool unmeasured_confounder = false;
  std::size_t reps = 0;
  std::uint64_t seed = 0;
};

namespace detail {

// Shortest representation that round-trips the exact double, so parsing
// a results file back reproduces the in-memory values bit for bit.
inline std::string format_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string format_opt(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string("NA");
}

inline int method_order(const std::string& name) {
  for (std::size_t i = 0; i < kAllMethods.size(); ++i) {
    if (method_name(kAllMethods[i]) == name) return static_cast<int>(i);
  }
  return static_cast<int>(kAllMethods.size());
}

}  // namespace detail

inline std::vector<ResultRow> to_rows(const std::vector<CellMetrics>& table) {
  std::vector<ResultRow> rows;
  rows.reserve(table.size() * 5);
  for (const CellMetrics& cm : table) {
    for (const MethodMetrics& mm : cm.per_method) {
      ResultRow r;
      r.n = cm.cell.n;
      r.exposure_probability = cm.cell.exposure_prevalence;
      r.scenario = cm.cell.overlap_scenario;
      r.method = method_name(mm.method);
      r.convergence_pct = mm.convergence_pct;
      r.bias = mm.bias;
      r.se_bias = mm.se_bias;
      r.abs_error = mm.abs_error;
      r.se_abs_error = mm.se_abs_error;
      r.power_pct = mm.power_pct;
      r.se_power = mm.se_power;
      r.coverage_pct = mm.coverage_pct;
      r.se_coverage = mm.se_coverage;
      r.link = cm.cell.link;
      r.unmeasured_confounder = cm.cell.unmeasured_confounder;
      r.reps = cm.cell.reps;
      r.seed = cm.base_seed;
      rows.push_back(std::move(r));
    }
  }
  return rows;
}

inline void sort_rows(std::vector<ResultRow>& rows) {
  std::sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
    if (a.n != b.n) return a.n > b.n;
    if (a.exposure_probability != b.exposure_probability)
      return a.exposure_probability < b.exposure_probability;
    if (a.scenario != b.scenario) return a.scenario < b.scenario;
    if (a.link != b.link) return a.link < b.link;
    if (a.unmeasured_confounder != b.unmeasured_confounder)
      return !a.unmeasured_confounder;
    return detail::method_order(a.method) < detail::method_order(b.method);
  });
}

inline std::string row_to_csv(const ResultRow& r) {
  std::ostringstream os;
  os << r.n << ',' << detail::format_double(r.exposure_probability) << ','
     << r.scenario << ',' << r.method << ','
     << detail::format_double(r.convergence_pct) << ','
     << detail::format_opt(r.bias) << ',' << detail::format_opt(r.se_bias) << ','
     << detail::format_opt(r.abs_error) << ',' << detail::format_opt(r.se_abs_error)
     << ',' << detail::format_opt(r.power_pct) << ',' << detail::format_opt(r.se_power)
     << ',' << detail::format_opt(r.coverage_pct) << ','
     << detail::format_opt(r.se_coverage) << ',' << link_name(r.link) << ','
     << (r.unmeasured_confounder ? "true" : "false") << ',' << r.reps << ',' << r.seed;
  return os.str();
}

inline void emit_csv(std::vector<ResultRow> rows, const std::string& path) {
  sort_rows(rows);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << kCsvHeader << '\n';
  for (const ResultRow& r : rows) out << row_to_csv(r) << '\n';
  if (!out.good()) throw std::runtime_error("write failed: " + path);
}

inline void emit_csv(const std::vector<CellMetrics>& table, const std::string& path) {
  emit_csv(to_rows(table), path);
}

// Parsing (used by plot, verify, and resume).

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

inline std::optional<double> parse_opt(const std::string& s, const std::string& path,
                                       std::size_t line_no) {
  if (s == "NA") return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (...) {
    throw std::runtime_error(path + ": malformed numeric field '" + s + "' at line " +
                             std::to_string(line_no));
  }
}

}  // namespace detail

// Cells not yet covered by existing result rows (same n, prevalence,
// scenario, and outcome mechanism).  Used by resumable runs.
inline std::vector<CellSpec> remaining_cells(const std::vector<ResultRow>& existing,
                                             const std::vector<CellSpec>& wanted) {
  auto key = [](std::size_t n, double prev, int sc, Link link, bool u) {
    std::ostringstream os;
    os << n << '|' << prev << '|' << sc << '|' << static_cast<int>(link) << '|' << u;
    return os.str();
  };
  std::set<std::string> done;
  for (const ResultRow& r : existing) {
    done.insert(key(r.n, r.exposure_probability, r.scenario, r.link,
                    r.unmeasured_confounder));
  }
  std::vector<CellSpec> out;
  for (const CellSpec& c : wanted) {
    if (!done.count(key(c.n, c.exposure_prevalence, c.overlap_scenario, c.link,
                        c.unmeasured_confounder))) {
      out.push_back(c);
    }
  }
  return out;
}

inline std::vector<ResultRow> parse_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  {
    std::string header = line;
    if (!header.empty() && header.back() == '\r') header.pop_back();
    if (header != kCsvHeader) {
      throw std::runtime_error(path + ": unexpected header at line 1");
    }
  }
  std::vector<ResultRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 17) {
      throw std::runtime_error(path + ": expected 17 fields, got " +
                               std::to_string(f.size()) + " at line " +
                               std::to_string(line_no));
    }
    ResultRow r;
    auto req = [&](const std::string& s) {
      auto v = detail::parse_opt(s, path, line_no);
      if (!v) {
        throw std::runtime_error(path + ": unexpected NA at line " +
                                 std::to_string(line_no));
      }
      return *v;
    };
    r.n = static_cast<std::size_t>(req(f[0]));
    r.exposure_probability = req(f[1]);
    r.scenario = static_cast<int>(req(f[2]));
    r.method = f[3];
    r.convergence_pct = req(f[4]);
    r.bias = detail::parse_opt(f[5], path, line_no);
    r.se_bias = detail::parse_opt(f[6], path, line_no);
    r.abs_error = detail::parse_opt(f[7], path, line_no);
    r.se_abs_error = detail::parse_opt(f[8], path, line_no);
    r.power_pct = detail::parse_opt(f[9], path, line_no);
    r.se_power = detail::parse_opt(f[10], path, line_no);
    r.coverage_pct = detail::parse_opt(f[11], path, line_no);
    r.se_coverage = detail::parse_opt(f[12], path, line_no);
    if (f[13] == "logit") {
      r.link = Link::logit;
    } else if (f[13] == "cloglog") {
      r.link = Link::cloglog;
    } else {
      throw std::runtime_error(path + ": unknown link '" + f[13] + "' at line " +
                               std::to_string(line_no));
    }
    if (f[14] == "true") {
      r.unmeasured_confounder = true;
    } else if (f[14] == "false") {
      r.unmeasured_confounder = false;
    } else {
      throw std::runtime_error(path + ": unknown flag '" + f[14] + "' at line " +
                               std::to_string(line_no));
    }
    r.reps = static_cast<std::size_t>(req(f[15]));
    r.seed = static_cast<std::uint64_t>(req(f[16]));
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace pslab
