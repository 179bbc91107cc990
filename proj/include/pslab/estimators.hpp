#pragma once

// The five analytical approaches compared by the simulation study:
//
//   ps_covariate             outcome ~ 1 + E + PS
//   nn_match                 outcome ~ 1 + E, frequency-weighted by
//                            nearest-neighbour-with-replacement match counts
//   caliper_match            outcome ~ 1 + E on pairs matched 1:1 without
//                            replacement within a strict PS caliper
//   iptw                     outcome ~ 1 + E, inverse-probability weighted,
//                            sandwich standard errors
//   regression_standardised  outcome ~ 1 + E + X1..X5, then marginal
//                            standardisation with a delta-method SE
//
// All five report a marginal(ish) log odds ratio estimate, its standard
// error, and a convergence flag.  A method converges only if every fit it
// depends on converged and, for matching, at least one pair was formed.

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pslab/dgp.hpp"
#include "pslab/logistic.hpp"
#include "pslab/rng.hpp"

namespace pslab {

enum class Method {
  ps_covariate,
  nn_match,
  caliper_match,
  iptw,
  regression_standardised,
};

inline constexpr std::array<Method, 5> kAllMethods = {
    Method::ps_covariate, Method::nn_match, Method::caliper_match, Method::iptw,
    Method::regression_standardised};

inline std::string method_name(Method m) {
  switch (m) {
    case Method::ps_covariate: return "ps_covariate";
    case Method::nn_match: return "nn_match";
    case Method::caliper_match: return "caliper_match";
    case Method::iptw: return "iptw";
    case Method::regression_standardised: return "regression_standardised";
  }
  return "?";
}

inline std::optional<Method> method_from_name(const std::string& s) {
  for (Method m : kAllMethods) {
    if (method_name(m) == s) return m;
  }
  return std::nullopt;
}

struct MethodEstimate {
  Method method = Method::ps_covariate;
  double log_or = kNaN;
  double se = kNaN;
  bool converged = false;
};

struct PropensityScores {
  std::vector<double> ps;  // filled only when source_fit.converged
  WeightedLogisticFit source_fit;
};

// Variance regime for the matching methods' outcome fits.  model_based
// mirrors ordinary frequency-weighted / unweighted ML; robust swaps in
// the sandwich estimator.
enum class VarianceRegime { model_based, robust };

struct EstimatorConfig {
  double caliper = 1e-2;
  VarianceRegime matching_variance = VarianceRegime::model_based;
};

// ---------------------------------------------------------------------------
// Propensity scores
// ---------------------------------------------------------------------------

inline Matrix ps_design(const SimulatedDataset& data) {
  const std::size_t n = data.n();
  Matrix design(n, 6);
  for (std::size_t i = 0; i < n; ++i) {
    double* row = design.row_ptr(i);
    row[0] = 1.0;
    row[1] = data.x1[i];
    row[2] = data.x2[i];
    row[3] = data.x3[i];
    row[4] = data.x4[i];
    row[5] = data.x5[i];
  }
  return design;
}

// Logistic regression of exposure on X1..X5.  X6 never enters.
inline PropensityScores estimate_ps(const SimulatedDataset& data) {
  const Matrix design = ps_design(data);
  PropensityScores out;
  std::vector<double> w(data.n(), 1.0);
  out.source_fit = fit_logistic(design, data.e, w, WeightKind::unweighted);
  if (out.source_fit.converged) {
    out.ps = fitted_probabilities(design, out.source_fit);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Matching
// ---------------------------------------------------------------------------

enum class MatchKind { nn_with_replacement, caliper_without_replacement };

struct MatchResult {
  MatchKind kind = MatchKind::nn_with_replacement;
  std::vector<double> weights;  // per-row frequency weight, 0 = excluded
  std::size_t n_exposed_matched = 0;
  bool ok = false;
};

namespace detail {

// Controls sorted by (ps, original index); equal-distance ties resolve to
// the lowest original index.
struct SortedControls {
  std::vector<double> ps;
  std::vector<std::size_t> index;
};

inline SortedControls sort_controls(const std::vector<double>& ps,
                                    const std::vector<int>& e) {
  SortedControls s;
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (!e[i]) {
      s.ps.push_back(ps[i]);
      s.index.push_back(i);
    }
  }
  std::vector<std::size_t> order(s.ps.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (s.ps[a] != s.ps[b]) return s.ps[a] < s.ps[b];
    return s.index[a] < s.index[b];
  });
  SortedControls out;
  out.ps.reserve(order.size());
  out.index.reserve(order.size());
  for (std::size_t o : order) {
    out.ps.push_back(s.ps[o]);
    out.index.push_back(s.index[o]);
  }
  return out;
}

}  // namespace detail

// Nearest-neighbour 1:1 matching with replacement.  Every exposed row is
// matched to the control with the smallest |PS difference|; distance ties
// break to the lowest control row index.  Exposed rows keep weight 1 and
// each control's weight is the number of exposed rows it served.
inline MatchResult nn_match_with_replacement(const std::vector<double>& ps,
                                             const std::vector<int>& e) {
  const std::size_t n = e.size();
  MatchResult out;
  out.kind = MatchKind::nn_with_replacement;
  out.weights.assign(n, 0.0);

  const detail::SortedControls controls = detail::sort_controls(ps, e);
  std::size_t n_exposed = 0;
  for (int ei : e) n_exposed += static_cast<std::size_t>(ei);
  if (controls.ps.empty() || n_exposed == 0) return out;

  // First element of each run of equal PS values (lowest original index
  // within the run, by the sort order).
  auto run_start = [&](std::size_t pos) {
    while (pos > 0 && controls.ps[pos - 1] == controls.ps[pos]) --pos;
    return pos;
  };

  for (std::size_t i = 0; i < n; ++i) {
    if (!e[i]) continue;
    const double target = ps[i];
    const auto it = std::lower_bound(controls.ps.begin(), controls.ps.end(), target);
    const std::size_t hi = static_cast<std::size_t>(it - controls.ps.begin());
    std::size_t best;
    if (hi == 0) {
      best = run_start(0);
    } else if (hi == controls.ps.size()) {
      best = run_start(hi - 1);
    } else {
      const std::size_t lo_run = run_start(hi - 1);
      const std::size_t hi_run = run_start(hi);
      const double d_lo = target - controls.ps[lo_run];
      const double d_hi = controls.ps[hi_run] - target;
      if (d_lo < d_hi) {
        best = lo_run;
      } else if (d_hi < d_lo) {
        best = hi_run;
      } else {
        best = controls.index[lo_run] < controls.index[hi_run] ? lo_run : hi_run;
      }
    }
    out.weights[controls.index[best]] += 1.0;
    out.weights[i] = 1.0;
    ++out.n_exposed_matched;
  }
  out.ok = out.n_exposed_matched > 0;
  return out;
}

// Greedy 1:1 caliper matching without replacement.  Exposed rows are
// processed in a seeded-random order; each takes the nearest
// still-unmatched control if the absolute PS difference is strictly below
// the caliper.  Distance ties break to the lowest control row index.
// Unmatched exposed rows are dropped.
inline MatchResult caliper_match(const std::vector<double>& ps, const std::vector<int>& e,
                                 double caliper, std::uint64_t order_key) {
  const std::size_t n = e.size();
  MatchResult out;
  out.kind = MatchKind::caliper_without_replacement;
  out.weights.assign(n, 0.0);

  std::vector<std::size_t> exposed;
  for (std::size_t i = 0; i < n; ++i) {
    if (e[i]) exposed.push_back(i);
  }
  const detail::SortedControls controls = detail::sort_controls(ps, e);
  if (exposed.empty() || controls.ps.empty()) return out;

  // Fisher-Yates with the dedicated substream.
  Rng rng(order_key);
  for (std::size_t i = exposed.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.uniform_below(i));
    std::swap(exposed[i - 1], exposed[j]);
  }

  // Alive sorted positions; set ordering matches (ps, original index), so
  // the predecessor/successor of an insertion point are the nearest
  // available controls on each side.
  std::set<std::size_t> alive;
  for (std::size_t p = 0; p < controls.ps.size(); ++p) alive.insert(p);

  std::size_t pairs = 0;
  for (std::size_t row : exposed) {
    if (alive.empty()) break;
    const double target = ps[row];
    const auto split = std::lower_bound(
        controls.ps.begin(), controls.ps.end(), target);
    const std::size_t pos = static_cast<std::size_t>(split - controls.ps.begin());

    auto right_it = alive.lower_bound(pos);
    std::optional<std::size_t> left, right;
    if (right_it != alive.end()) right = *right_it;
    if (right_it != alive.begin()) {
      // Highest alive position below pos, then rewind to the lowest-index
      // alive control sharing that PS value (positions sort by (ps, index)).
      const std::size_t last = *std::prev(right_it);
      const double v = controls.ps[last];
      const std::size_t run_lo = static_cast<std::size_t>(
          std::lower_bound(controls.ps.begin(), controls.ps.end(), v) -
          controls.ps.begin());
      left = *alive.lower_bound(run_lo);
    }

    std::optional<std::size_t> pick;
    if (left && right) {
      const double d_left = target - controls.ps[*left];
      const double d_right = controls.ps[*right] - target;
      if (d_left < d_right) {
        pick = left;
      } else if (d_right < d_left) {
        pick = right;
      } else {
        pick = controls.index[*left] < controls.index[*right] ? left : right;
      }
    } else if (left) {
      pick = left;
    } else {
      pick = right;
    }

    if (!pick || !(std::fabs(controls.ps[*pick] - target) < caliper)) continue;

    alive.erase(*pick);
    out.weights[row] = 1.0;
    out.weights[controls.index[*pick]] = 1.0;
    ++pairs;
  }
  out.n_exposed_matched = pairs;
  out.ok = pairs > 0;
  return out;
}

// ---------------------------------------------------------------------------
// IPTW
// ---------------------------------------------------------------------------

// w = 1/PS for exposed rows, 1/(1-PS) for controls.  No stabilisation or
// truncation; extreme scores yield extreme weights by design.
inline std::vector<double> iptw_weights(const std::vector<double>& ps,
                                        const std::vector<int>& e) {
  std::vector<double> w(ps.size());
  for (std::size_t i = 0; i < ps.size(); ++i) {
    w[i] = e[i] ? 1.0 / ps[i] : 1.0 / (1.0 - ps[i]);
  }
  return w;
}

// ---------------------------------------------------------------------------
// Outcome analyses
// ---------------------------------------------------------------------------

namespace detail {

inline Matrix exposure_design(const SimulatedDataset& data) {
  Matrix design(data.n(), 2);
  for (std::size_t i = 0; i < data.n(); ++i) {
    design(i, 0) = 1.0;
    design(i, 1) = data.e[i];
  }
  return design;
}

inline Matrix exposure_ps_design(const SimulatedDataset& data,
                                 const std::vector<double>& ps) {
  Matrix design(data.n(), 3);
  for (std::size_t i = 0; i < data.n(); ++i) {
    design(i, 0) = 1.0;
    design(i, 1) = data.e[i];
    design(i, 2) = ps[i];
  }
  return design;
}

inline Matrix full_covariate_design(const SimulatedDataset& data) {
  Matrix design(data.n(), 7);
  for (std::size_t i = 0; i < data.n(); ++i) {
    double* row = design.row_ptr(i);
    row[0] = 1.0;
    row[1] = data.e[i];
    row[2] = data.x1[i];
    row[3] = data.x2[i];
    row[4] = data.x3[i];
    row[5] = data.x4[i];
    row[6] = data.x5[i];
  }
  return design;
}

// The exposure contrast is only estimable if the E column survived the
// collinearity screen (it is dropped when one group is empty or excluded).
inline bool exposure_column_kept(const WeightedLogisticFit& fit, std::size_t e_col) {
  return std::find(fit.dropped_columns.begin(), fit.dropped_columns.end(), e_col) ==
         fit.dropped_columns.end();
}

inline MethodEstimate coefficient_estimate(Method method, const WeightedLogisticFit& fit,
                                           std::size_t e_col) {
  MethodEstimate est;
  est.method = method;
  if (fit.converged && exposure_column_kept(fit, e_col)) {
    est.log_or = fit.coef[e_col];
    est.se = fit.se(e_col);
    est.converged = std::isfinite(est.log_or) && std::isfinite(est.se) && est.se > 0.0;
  }
  return est;
}

}  // namespace detail

// Marginal standardisation of a fitted outcome model: average the fitted
// probabilities with E forced to 1 and to 0 over the whole sample, and
// contrast on the log-odds scale.  The SE propagates coef covariance
// through the contrast with the delta method.
inline MethodEstimate regression_standardise(const SimulatedDataset& data,
                                             const Matrix& design,
                                             const WeightedLogisticFit& fit,
                                             std::size_t e_col) {
  MethodEstimate est;
  est.method = Method::regression_standardised;
  if (!fit.converged || !detail::exposure_column_kept(fit, e_col)) return est;

  const std::size_t n = design.rows();
  const std::size_t k = design.cols();
  const double inv_n = 1.0 / static_cast<double>(n);

  double pbar[2] = {0.0, 0.0};
  std::vector<double> grad_sum[2];
  grad_sum[0].assign(k, 0.0);
  grad_sum[1].assign(k, 0.0);
  std::vector<double> row_copy(k);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = design.row_ptr(i);
    for (std::size_t j = 0; j < k; ++j) row_copy[j] = row[j];
    for (int a = 0; a <= 1; ++a) {
      row_copy[e_col] = a;
      double eta = 0.0;
      for (std::size_t j = 0; j < k; ++j) eta += row_copy[j] * fit.coef[j];
      const double pi = expit(eta);
      pbar[a] += pi;
      const double d = pi * (1.0 - pi);
      for (std::size_t j = 0; j < k; ++j) grad_sum[a][j] += d * row_copy[j];
    }
  }
  pbar[0] *= inv_n;
  pbar[1] *= inv_n;

  std::vector<double> grad(k);
  for (std::size_t j = 0; j < k; ++j) {
    grad[j] = grad_sum[1][j] * inv_n / (pbar[1] * (1.0 - pbar[1])) -
              grad_sum[0][j] * inv_n / (pbar[0] * (1.0 - pbar[0]));
  }
  double var = 0.0;
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = 0; b < k; ++b) var += grad[a] * fit.cov(a, b) * grad[b];
  }

  est.log_or = logit(pbar[1]) - logit(pbar[0]);
  est.se = std::sqrt(var);
  est.converged = std::isfinite(est.log_or) && std::isfinite(est.se) && est.se > 0.0;
  return est;
}

inline MethodEstimate regression_standardise(const SimulatedDataset& data) {
  const Matrix design = detail::full_covariate_design(data);
  std::vector<double> w(data.n(), 1.0);
  const WeightedLogisticFit fit = fit_logistic(design, data.y, w, WeightKind::unweighted);
  return regression_standardise(data, design, fit, 1);
}

// Run one analytical approach on a dataset with outcomes.  The four
// PS-based methods require converged propensity scores; a failed PS fit
// propagates as non-convergence.
inline MethodEstimate run_method(Method method, const SimulatedDataset& data,
                                 const PropensityScores* ps,
                                 const EstimatorConfig& config = EstimatorConfig{},
                                 std::uint64_t caliper_order_key = 0) {
  MethodEstimate est;
  est.method = method;

  if (method == Method::regression_standardised) {
    return regression_standardise(data);
  }

  if (ps == nullptr || !ps->source_fit.converged) return est;
  const std::vector<double>& scores = ps->ps;

  FitOptions opt;
  switch (method) {
    case Method::ps_covariate: {
      const Matrix design = detail::exposure_ps_design(data, scores);
      std::vector<double> w(data.n(), 1.0);
      const auto fit = fit_logistic(design, data.y, w, WeightKind::unweighted);
      return detail::coefficient_estimate(method, fit, 1);
    }
    case Method::nn_match: {
      const MatchResult match = nn_match_with_replacement(scores, data.e);
      if (!match.ok) return est;
      const Matrix design = detail::exposure_design(data);
      opt.force_sandwich = config.matching_variance == VarianceRegime::robust;
      const auto fit =
          fit_logistic(design, data.y, match.weights, WeightKind::frequency, opt);
      return detail::coefficient_estimate(method, fit, 1);
    }
    case Method::caliper_match: {
      const MatchResult match =
          caliper_match(scores, data.e, config.caliper, caliper_order_key);
      if (!match.ok) return est;
      // Matched subset, unweighted.
      std::size_t m = 0;
      for (double w : match.weights) m += w > 0.0 ? 1 : 0;
      Matrix design(m, 2);
      std::vector<int> y(m);
      std::size_t r = 0;
      for (std::size_t i = 0; i < data.n(); ++i) {
        if (match.weights[i] > 0.0) {
          design(r, 0) = 1.0;
          design(r, 1) = data.e[i];
          y[r] = data.y[i];
          ++r;
        }
      }
      std::vector<double> w(m, 1.0);
      opt.force_sandwich = config.matching_variance == VarianceRegime::robust;
      const auto fit = fit_logistic(design, y, w, WeightKind::unweighted, opt);
      return detail::coefficient_estimate(method, fit, 1);
    }
    case Method::iptw: {
      const std::vector<double> w = iptw_weights(scores, data.e);
      const Matrix design = detail::exposure_design(data);
      const auto fit = fit_logistic(design, data.y, w, WeightKind::probability);
      return detail::coefficient_estimate(method, fit, 1);
    }
    default:
      return est;
  }
}

}  // namespace pslab
