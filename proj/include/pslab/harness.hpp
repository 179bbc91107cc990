#pragma once

// Monte Carlo driver: runs replicates over a grid of scenario cells,
// aggregates the performance measures, and reports them with Monte Carlo
// standard errors.
//
// Sign convention, deliberately literal: bias = mean(truth - estimate).
// Metrics are computed over converged replicates only, and reported as
// missing when convergence falls below 25%.

#include <atomic>
#include <cstdint>
#include <functional>
#include <optional>
#include <thread>
#include <vector>

#include "pslab/dgp.hpp"
#include "pslab/estimators.hpp"

namespace pslab {

struct CellSpec {
  std::size_t n = 1000;
  double exposure_prevalence = 0.5;
  int overlap_scenario = 1;
  Link link = Link::logit;
  bool unmeasured_confounder = false;
  std::size_t reps = 1000;

  ScenarioSpec replicate(std::uint64_t base_seed, std::uint64_t index) const {
    ScenarioSpec s;
    s.n = n;
    s.exposure_prevalence = exposure_prevalence;
    s.overlap_scenario = overlap_scenario;
    s.link = link;
    s.unmeasured_confounder = unmeasured_confounder;
    s.base_seed = base_seed;
    s.replicate_index = index;
    return s;
  }
};

struct ReplicateResult {
  std::array<MethodEstimate, 5> estimates;  // indexed as kAllMethods
  double true_log_mor = kNaN;
};

struct HarnessConfig {
  EstimatorConfig estimator;
  // Critical value for the one-sided power criterion: reject when
  // estimate - z_crit * se > 0.  1.96 treats the two-sided 95% CI lower
  // bound as the test; 1.645 is the one-sided alpha = 0.05 reading.
  double power_z = 1.959963984540054;
};

// Run the full pipeline for one replicate.  Failures of any kind are
// recorded as per-method non-convergence; nothing escapes.
inline ReplicateResult run_replicate(const ScenarioSpec& spec,
                                     const HarnessConfig& config = HarnessConfig{}) {
  ReplicateResult result;
  for (std::size_t m = 0; m < kAllMethods.size(); ++m) {
    result.estimates[m].method = kAllMethods[m];
  }
  try {
    SimulatedDataset data = draw_dataset(spec);
    generate_outcome(data, spec);
    result.true_log_mor = true_marginal_log_or(data, spec);

    const PropensityScores ps = estimate_ps(data);
    const std::uint64_t caliper_key = key_combine(
        replicate_key(spec), static_cast<std::uint64_t>(StreamTag::caliper_order));
    for (std::size_t m = 0; m < kAllMethods.size(); ++m) {
      try {
        result.estimates[m] = run_method(kAllMethods[m], data, &ps,
                                         config.estimator, caliper_key);
      } catch (...) {
        result.estimates[m] = MethodEstimate{};
        result.estimates[m].method = kAllMethods[m];
      }
    }
  } catch (...) {
    for (std::size_t m = 0; m < kAllMethods.size(); ++m) {
      result.estimates[m] = MethodEstimate{};
      result.estimates[m].method = kAllMethods[m];
    }
    result.true_log_mor = kNaN;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Performance measures
// ---------------------------------------------------------------------------

struct MethodMetrics {
  Method method = Method::ps_covariate;
  std::size_t reps = 0;
  std::size_t converged = 0;
  double convergence_pct = 0.0;
  // Missing (nullopt) when convergence is below 25%.
  std::optional<double> bias, se_bias;
  std::optional<double> abs_error, se_abs_error;
  std::optional<double> power_pct, se_power;
  std::optional<double> coverage_pct, se_coverage;
};

struct CellMetrics {
  CellSpec cell;
  std::uint64_t base_seed = 0;
  std::array<MethodMetrics, 5> per_method;
};

// One method's estimates paired with per-replicate truths.
inline MethodMetrics aggregate_method(Method method,
                                      const std::vector<MethodEstimate>& estimates,
                                      const std::vector<double>& truths,
                                      double power_z) {
  MethodMetrics mm;
  mm.method = method;
  mm.reps = estimates.size();

  // Coverage always refers to the 95% two-sided Wald interval; power_z
  // only moves the one-sided rejection rule.
  constexpr double kCoverageZ = 1.959963984540054;
  std::vector<double> err, abs_err;
  std::size_t covered = 0, rejected = 0;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    const MethodEstimate& est = estimates[i];
    if (!est.converged) continue;
    ++mm.converged;
    const double z = truths[i];
    err.push_back(z - est.log_or);
    abs_err.push_back(std::fabs(z - est.log_or));
    if (std::fabs(est.log_or - z) <= kCoverageZ * est.se) ++covered;
    if (est.log_or - power_z * est.se > 0.0) ++rejected;
  }
  mm.convergence_pct =
      mm.reps == 0 ? 0.0 : 100.0 * static_cast<double>(mm.converged) / mm.reps;
  if (mm.convergence_pct < 25.0 || mm.converged == 0) return mm;

  const double r = static_cast<double>(mm.converged);
  mm.bias = sample_mean(err);
  mm.abs_error = sample_mean(abs_err);
  mm.se_bias = mm.converged > 1 ? sample_sd(err) / std::sqrt(r) : 0.0;
  mm.se_abs_error = mm.converged > 1 ? sample_sd(abs_err) / std::sqrt(r) : 0.0;
  const double p_cov = static_cast<double>(covered) / r;
  const double p_pow = static_cast<double>(rejected) / r;
  mm.coverage_pct = 100.0 * p_cov;
  mm.power_pct = 100.0 * p_pow;
  mm.se_coverage = 100.0 * std::sqrt(p_cov * (1.0 - p_cov) / r);
  mm.se_power = 100.0 * std::sqrt(p_pow * (1.0 - p_pow) / r);
  return mm;
}

inline std::array<MethodMetrics, 5> aggregate_cell(
    const std::vector<ReplicateResult>& results, double power_z) {
  std::array<MethodMetrics, 5> out;
  std::vector<double> truths(results.size());
  for (std::size_t i = 0; i < results.size(); ++i) truths[i] = results[i].true_log_mor;
  for (std::size_t m = 0; m < kAllMethods.size(); ++m) {
    std::vector<MethodEstimate> est(results.size());
    for (std::size_t i = 0; i < results.size(); ++i) est[i] = results[i].estimates[m];
    out[m] = aggregate_method(kAllMethods[m], est, truths, power_z);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Grid execution
// ---------------------------------------------------------------------------

// Replicates are independent tasks pulled from an atomic counter; results
// land in a preallocated slot per replicate, so aggregation order (and
// hence output) is identical for any worker count.
inline std::vector<ReplicateResult> run_cell(const CellSpec& cell,
                                             std::uint64_t base_seed,
                                             unsigned threads,
                                             const HarnessConfig& config) {
  std::vector<ReplicateResult> results(cell.reps);
  if (threads <= 1 || cell.reps <= 1) {
    for (std::size_t i = 0; i < cell.reps; ++i) {
      results[i] = run_replicate(cell.replicate(base_seed, i), config);
    }
    return results;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cell.reps) return;
      results[i] = run_replicate(cell.replicate(base_seed, i), config);
    }
  };
  std::vector<std::thread> pool;
  const unsigned count = std::min<unsigned>(threads, std::thread::hardware_concurrency());
  for (unsigned t = 0; t < std::max(1u, count); ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return results;
}

inline CellMetrics run_cell_metrics(const CellSpec& cell, std::uint64_t base_seed,
                                    unsigned threads, const HarnessConfig& config) {
  CellMetrics cm;
  cm.cell = cell;
  cm.base_seed = base_seed;
  cm.per_method = aggregate_cell(run_cell(cell, base_seed, threads, config),
                                 config.power_z);
  return cm;
}

using ProgressFn = std::function<void(const CellSpec&, std::size_t done, std::size_t total)>;

inline std::vector<CellMetrics> run_grid(const std::vector<CellSpec>& cells,
                                         std::uint64_t base_seed, unsigned threads,
                                         const HarnessConfig& config = HarnessConfig{},
                                         const ProgressFn& progress = {}) {
  std::vector<CellMetrics> table;
  table.reserve(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    table.push_back(run_cell_metrics(cells[c], base_seed, threads, config));
    if (progress) progress(cells[c], c + 1, cells.size());
  }
  return table;
}

}  // namespace pslab
