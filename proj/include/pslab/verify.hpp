#pragma once

// Reproduction checks against the bundled reference results table.
//
// Each check reruns one grid cell at desk scale and compares a metric
// against the published value at a pinned tolerance.  The matching-method
// coverage checks fall back to the alternate variance regime when out of
// band, so the report shows whether a discrepancy is explained by that
// switch.

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "pslab/csv.hpp"
#include "pslab/harness.hpp"

namespace pslab {

enum class VerifyMetric { bias, abs_error, coverage, power, convergence };

inline std::string verify_metric_name(VerifyMetric m) {
  switch (m) {
    case VerifyMetric::bias: return "bias";
    case VerifyMetric::abs_error: return "abs_error";
    case VerifyMetric::coverage: return "coverage_pct";
    case VerifyMetric::power: return "power_pct";
    case VerifyMetric::convergence: return "convergence_pct";
  }
  return "?";
}

enum class TolKind {
  absolute,   // |produced - reference| <= tol
  relative,   // |produced - reference| <= tol * |reference|
  at_most,    // produced <= tol (reference shown for context)
  exact,      // produced == reference
};

struct VerifyCheck {
  std::string criterion;  // e.g. "C3"
  CellSpec cell;
  Method method = Method::regression_standardised;
  VerifyMetric metric = VerifyMetric::bias;
  TolKind kind = TolKind::absolute;
  double tol = 0.0;
  bool matching_fallback = false;  // retry under the robust variance regime
};

struct VerifyComparison {
  std::string criterion;
  std::string cell_label;
  std::string method;
  std::string metric;
  double reference = kNaN;
  double produced = kNaN;
  double mc_se = kNaN;
  std::string tolerance;
  bool pass = false;
  std::string note;
};

struct VerifyReport {
  std::vector<VerifyComparison> rows;
  std::size_t failures = 0;
  bool all_pass() const { return failures == 0; }
};

// The desk-scale verification set.  Reference values come from the
// bundled table; reps are reduced on the n=100000 cells to keep the run
// tractable (the bias/coverage tolerances below already account for the
// extra Monte Carlo noise).
inline std::vector<VerifyCheck> default_verify_checks() {
  auto cell = [](std::size_t n, double prev, int sc, std::size_t reps) {
    CellSpec c;
    c.n = n;
    c.exposure_prevalence = prev;
    c.overlap_scenario = sc;
    c.reps = reps;
    return c;
  };
  std::vector<VerifyCheck> checks;
  // C1: regression standardisation at the largest size (desk scale: 200
  // reps, coverage band widened to +-3pp accordingly).
  checks.push_back({"C1", cell(100000, 0.5, 1, 200), Method::regression_standardised,
                    VerifyMetric::bias, TolKind::absolute, 0.005});
  checks.push_back({"C1", cell(100000, 0.5, 1, 200), Method::regression_standardised,
                    VerifyMetric::coverage, TolKind::absolute, 3.0});
  // C2: regression standardisation, n=1000.
  checks.push_back({"C2", cell(1000, 0.5, 1, 1000), Method::regression_standardised,
                    VerifyMetric::bias, TolKind::absolute, 0.02});
  checks.push_back({"C2", cell(1000, 0.5, 1, 1000), Method::regression_standardised,
                    VerifyMetric::abs_error, TolKind::absolute, 0.02});
  checks.push_back({"C2", cell(1000, 0.5, 1, 1000), Method::regression_standardised,
                    VerifyMetric::coverage, TolKind::absolute, 2.5});
  checks.push_back({"C2", cell(1000, 0.5, 1, 1000), Method::regression_standardised,
                    VerifyMetric::power, TolKind::exact, 0.0});
  // C3: IPTW degradation with shrinking overlap.
  checks.push_back({"C3", cell(10000, 0.5, 3, 1000), Method::iptw, VerifyMetric::bias,
                    TolKind::relative, 0.30});
  checks.push_back({"C3", cell(10000, 0.5, 4, 1000), Method::iptw, VerifyMetric::bias,
                    TolKind::relative, 0.30});
  // C4: PS-covariate non-convergence.
  checks.push_back({"C4", cell(100000, 0.05, 3, 250), Method::ps_covariate,
                    VerifyMetric::convergence, TolKind::at_most, 1.0});
  checks.push_back({"C4", cell(100000, 0.05, 4, 250), Method::ps_covariate,
                    VerifyMetric::convergence, TolKind::at_most, 1.0});
  checks.push_back({"C4", cell(100000, 0.05, 5, 250), Method::ps_covariate,
                    VerifyMetric::convergence, TolKind::at_most, 1.0});
  checks.push_back({"C4", cell(100, 0.5, 3, 1000), Method::ps_covariate,
                    VerifyMetric::convergence, TolKind::absolute, 8.0});
  // C5: matching-method coverage plausibility bands.
  checks.push_back({"C5", cell(1000, 0.5, 1, 1000), Method::caliper_match,
                    VerifyMetric::coverage, TolKind::absolute, 3.0, true});
  checks.push_back({"C5", cell(1000, 0.5, 1, 1000), Method::nn_match,
                    VerifyMetric::coverage, TolKind::absolute, 4.0, true});
  return checks;
}

namespace detail {

struct CellKey {
  std::size_t n;
  double prev;
  int scenario;
  std::size_t reps;
  bool robust;
  bool operator<(const CellKey& o) const {
    return std::tie(n, prev, scenario, reps, robust) <
           std::tie(o.n, o.prev, o.scenario, o.reps, o.robust);
  }
};

inline std::string cell_label(const CellSpec& c) {
  std::ostringstream os;
  os << "n=" << c.n << " prev=" << c.exposure_prevalence << " sc=" << c.overlap_scenario
     << " reps=" << c.reps;
  return os.str();
}

inline std::optional<double> extract(const MethodMetrics& mm, VerifyMetric metric) {
  switch (metric) {
    case VerifyMetric::bias: return mm.bias;
    case VerifyMetric::abs_error: return mm.abs_error;
    case VerifyMetric::coverage: return mm.coverage_pct;
    case VerifyMetric::power: return mm.power_pct;
    case VerifyMetric::convergence: return mm.convergence_pct;
  }
  return std::nullopt;
}

inline double extract_se(const MethodMetrics& mm, VerifyMetric metric) {
  switch (metric) {
    case VerifyMetric::bias: return mm.se_bias.value_or(kNaN);
    case VerifyMetric::abs_error: return mm.se_abs_error.value_or(kNaN);
    case VerifyMetric::coverage: return mm.se_coverage.value_or(kNaN);
    case VerifyMetric::power: return mm.se_power.value_or(kNaN);
    case VerifyMetric::convergence: {
      const double p = mm.convergence_pct / 100.0;
      return mm.reps ? 100.0 * std::sqrt(p * (1.0 - p) / mm.reps) : kNaN;
    }
  }
  return kNaN;
}

}  // namespace detail

struct VerifyOptions {
  std::string reference_path = "data/reference/main_logit.csv";
  std::uint64_t base_seed = 20240815;
  unsigned threads = 2;
  double tol_scale = 1.0;
  double power_z = 1.959963984540054;
};

// Reference lookup: (n, prevalence, scenario, method) -> row.
class ReferenceTable {
 public:
  explicit ReferenceTable(const std::string& path) {
    std::vector<ResultRow> rows;
    try {
      rows = parse_csv(path);
    } catch (const std::exception& e) {
      throw std::runtime_error("reference table unavailable: " + std::string(e.what()));
    }
    for (const ResultRow& r : rows) rows_[key(r.n, r.exposure_probability, r.scenario, r.method)] = r;
  }

  const ResultRow* find(std::size_t n, double prev, int scenario,
                        const std::string& method) const {
    const auto it = rows_.find(key(n, prev, scenario, method));
    return it == rows_.end() ? nullptr : &it->second;
  }

 private:
  static std::string key(std::size_t n, double prev, int scenario,
                         const std::string& method) {
    std::ostringstream os;
    os << n << '|' << prev << '|' << scenario << '|' << method;
    return os.str();
  }
  std::map<std::string, ResultRow> rows_;
};

inline VerifyReport run_verify(const std::vector<VerifyCheck>& checks,
                               const VerifyOptions& opt,
                               const ProgressFn& progress = {}) {
  const ReferenceTable reference(opt.reference_path);

  // Run each distinct cell once per variance regime.
  std::map<detail::CellKey, std::array<MethodMetrics, 5>> cache;
  auto metrics_for = [&](const CellSpec& cell, bool robust) {
    const detail::CellKey key{cell.n, cell.exposure_prevalence, cell.overlap_scenario,
                              cell.reps, robust};
    auto it = cache.find(key);
    if (it == cache.end()) {
      HarnessConfig config;
      config.power_z = opt.power_z;
      config.estimator.matching_variance =
          robust ? VarianceRegime::robust : VarianceRegime::model_based;
      auto res = aggregate_cell(run_cell(cell, opt.base_seed, opt.threads, config),
                                config.power_z);
      it = cache.emplace(key, res).first;
      if (progress) progress(cell, cache.size(), 0);
    }
    return it->second;
  };

  VerifyReport report;
  for (const VerifyCheck& check : checks) {
    VerifyComparison row;
    row.criterion = check.criterion;
    row.cell_label = detail::cell_label(check.cell);
    row.method = method_name(check.method);
    row.metric = verify_metric_name(check.metric);

    const ResultRow* ref = reference.find(check.cell.n, check.cell.exposure_prevalence,
                                          check.cell.overlap_scenario, row.method);
    if (ref == nullptr) {
      throw std::runtime_error("no reference row for " + row.cell_label + " " +
                               row.method);
    }
    switch (check.metric) {
      case VerifyMetric::bias: row.reference = ref->bias.value_or(kNaN); break;
      case VerifyMetric::abs_error: row.reference = ref->abs_error.value_or(kNaN); break;
      case VerifyMetric::coverage: row.reference = ref->coverage_pct.value_or(kNaN); break;
      case VerifyMetric::power: row.reference = ref->power_pct.value_or(kNaN); break;
      case VerifyMetric::convergence: row.reference = ref->convergence_pct; break;
    }

    const std::size_t m_index = static_cast<std::size_t>(check.method);
    auto evaluate = [&](bool robust) {
      const std::array<MethodMetrics, 5> cell_metrics = metrics_for(check.cell, robust);
      const MethodMetrics& mm = cell_metrics[m_index];
      const auto value = detail::extract(mm, check.metric);
      const double produced = value ? *value : kNaN;
      const double se = detail::extract_se(mm, check.metric);
      return std::pair<double, double>(produced, se);
    };

    auto within = [&](double produced) {
      if (std::isnan(produced)) return false;
      const double scale = opt.tol_scale;
      std::ostringstream tol;
      bool ok = false;
      switch (check.kind) {
        case TolKind::absolute:
          tol << "±" << check.tol * scale;
          ok = std::fabs(produced - row.reference) <= check.tol * scale;
          break;
        case TolKind::relative:
          tol << "±" << 100.0 * check.tol * scale << "% rel";
          ok = std::fabs(produced - row.reference) <=
               check.tol * scale * std::fabs(row.reference);
          break;
        case TolKind::at_most:
          tol << "<= " << check.tol * scale;
          ok = produced <= check.tol * scale;
          break;
        case TolKind::exact:
          tol << "== " << row.reference;
          ok = produced == row.reference;
          break;
      }
      row.tolerance = tol.str();
      return ok;
    };

    auto [produced, se] = evaluate(false);
    row.produced = produced;
    row.mc_se = se;
    row.pass = within(produced);

    if (!row.pass && check.matching_fallback) {
      auto [alt, alt_se] = evaluate(true);
      std::ostringstream note;
      if (within(alt)) {
        note << "explained by variance regime: robust gives " << alt;
        row.pass = true;
      } else {
        note << "robust regime gives " << alt << " (still out of band)";
      }
      row.note = note.str();
      row.produced = produced;  // primary regime remains the reported value
      within(produced);         // restore tolerance string for the primary value
    }

    if (!row.pass) ++report.failures;
    report.rows.push_back(row);
  }
  return report;
}

inline std::string format_report(const VerifyReport& report) {
  std::ostringstream os;
  os << "criterion  cell                        method                    metric"
     << "           reference     produced        mc_se  tolerance     result\n";
  for (const auto& r : report.rows) {
    char line[320];
    std::snprintf(line, sizeof(line),
                  "%-10s %-27s %-25s %-16s %9.6g %12.6g %12.4g  %-12s %s%s%s\n",
                  r.criterion.c_str(), r.cell_label.c_str(), r.method.c_str(),
                  r.metric.c_str(), r.reference, r.produced, r.mc_se,
                  r.tolerance.c_str(), r.pass ? "PASS" : "FAIL",
                  r.note.empty() ? "" : "  -- ", r.note.c_str());
    os << line;
  }
  os << (report.all_pass() ? "verification: all comparisons passed\n"
                           : "verification: " + std::to_string(report.failures) +
                                 " comparison(s) failed\n");
  return os.str();
}

}  // namespace pslab
