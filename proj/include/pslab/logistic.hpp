#pragma once

// Weighted logistic regression by Newton-Raphson / IRLS.
//
// Three weighting regimes share one likelihood:
//   unweighted   w_i = 1
//   frequency    integer replication counts; model-based covariance
//   probability  positive reals (e.g. inverse probability of treatment
//                weights); sandwich covariance
//
// Non-convergence and separation are reported in the result, never
// thrown.  Exactly collinear design columns are detected up front and
// excluded; their coefficients and covariance entries are reported as 0.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "pslab/linalg.hpp"
#include "pslab/mathutil.hpp"

namespace pslab {

enum class WeightKind { unweighted, frequency, probability };

enum class FitFailure {
  none,
  iteration_limit,
  separation,
  singular_information,
  empty_data,
};

struct WeightedLogisticFit {
  std::vector<double> coef;
  Matrix cov;
  double loglik = kNaN;
  bool converged = false;
  int iterations = 0;
  bool separation_flag = false;
  FitFailure failure = FitFailure::none;
  std::vector<std::size_t> dropped_columns;  // exactly collinear, coef forced 0

  double se(std::size_t j) const { return std::sqrt(cov(j, j)); }
};

struct FitOptions {
  int max_iterations = 50;
  double loglik_rel_tol = 1e-8;
  double score_tol = 1e-6;
  // Divergence guards: a slope walking past +-15 on the logit scale, or a
  // fully pinned outcome class, is treated as separation.  The intercept
  // gets a wider bound since legitimate intercepts can be large when
  // covariates are far from zero.
  double coef_limit = 15.0;
  double intercept_limit = 30.0;
  int max_step_halvings = 10;
  bool force_sandwich = false;  // robust covariance regardless of weight kind
};

namespace detail {

inline double safe_log(double p) { return std::log(std::max(p, 1e-300)); }

}  // namespace detail

// design: row-major n x k with the intercept in column 0 (by convention;
// only the separation guard distinguishes column 0).  y: 0/1.  weights:
// length n; rows with weight 0 are excluded from the likelihood.
inline WeightedLogisticFit fit_logistic(const Matrix& design, const std::vector<int>& y,
                                        const std::vector<double>& weights,
                                        WeightKind kind,
                                        const FitOptions& opt = FitOptions{}) {
  const std::size_t n = design.rows();
  const std::size_t k = design.cols();
  WeightedLogisticFit fit;
  fit.coef.assign(k, 0.0);
  fit.cov = Matrix(k, k);

  if (n == 0 || k == 0 || y.size() != n || weights.size() != n || n < k) {
    fit.failure = FitFailure::empty_data;
    return fit;
  }

  double weight_sum = 0.0;
  for (double w : weights) weight_sum += w;
  if (!(weight_sum > 0.0)) {
    fit.failure = FitFailure::empty_data;
    return fit;
  }

  // Exact-collinearity screen on the weighted Gram matrix.
  Matrix gram(k, k);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = weights[i];
    if (w == 0.0) continue;
    const double* row = design.row_ptr(i);
    for (std::size_t a = 0; a < k; ++a) {
      for (std::size_t b = 0; b <= a; ++b) gram(a, b) += w * row[a] * row[b];
    }
  }
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = a + 1; b < k; ++b) gram(a, b) = gram(b, a);
  const PivotedRank rank = pivoted_rank(gram);
  fit.dropped_columns = rank.dropped;
  const std::vector<std::size_t>& cols = rank.kept;
  const std::size_t m = cols.size();
  if (m == 0) {
    fit.failure = FitFailure::singular_information;
    return fit;
  }

  std::vector<double> beta(m, 0.0);
  std::vector<double> eta(n, 0.0), pi(n, 0.5);

  auto update_eta_pi = [&](const std::vector<double>& b) {
    for (std::size_t i = 0; i < n; ++i) {
      if (weights[i] == 0.0) continue;
      const double* row = design.row_ptr(i);
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j) s += row[cols[j]] * b[j];
      eta[i] = s;
      pi[i] = expit(s);
    }
  };

  auto loglik_of = [&]() {
    Accumulator ll;
    for (std::size_t i = 0; i < n; ++i) {
      const double w = weights[i];
      if (w == 0.0) continue;
      ll.add(w * (y[i] ? detail::safe_log(pi[i]) : detail::safe_log(1.0 - pi[i])));
    }
    return ll.value();
  };

  double ll_old = loglik_of();  // beta = 0
  std::vector<double> score(m);
  Matrix info(m, m);

  for (int iter = 1; iter <= opt.max_iterations; ++iter) {
    fit.iterations = iter;

    // Score and observed information at the current beta.
    std::vector<Accumulator> score_acc(m);
    info = Matrix(m, m);
    for (std::size_t i = 0; i < n; ++i) {
      const double w = weights[i];
      if (w == 0.0) continue;
      const double* row = design.row_ptr(i);
      const double resid = w * (y[i] - pi[i]);
      const double curv = w * pi[i] * (1.0 - pi[i]);
      for (std::size_t a = 0; a < m; ++a) {
        const double xa = row[cols[a]];
        score_acc[a].add(resid * xa);
        for (std::size_t b = 0; b <= a; ++b) info(a, b) += curv * xa * row[cols[b]];
      }
    }
    for (std::size_t a = 0; a < m; ++a) {
      score[a] = score_acc[a].value();
      for (std::size_t b = a + 1; b < m; ++b) info(a, b) = info(b, a);
    }

    auto delta = solve_spd(info, score);
    if (!delta) {
      fit.failure = FitFailure::singular_information;
      break;
    }

    // Newton step with halving if the log-likelihood does not improve.
    std::vector<double> proposal(m);
    double step = 1.0;
    double ll_new = -std::numeric_limits<double>::infinity();
    for (int h = 0; h <= opt.max_step_halvings; ++h) {
      for (std::size_t j = 0; j < m; ++j) proposal[j] = beta[j] + step * (*delta)[j];
      update_eta_pi(proposal);
      ll_new = loglik_of();
      if (ll_new >= ll_old || h == opt.max_step_halvings) break;
      step *= 0.5;
    }
    beta = proposal;

    // Separation guards.
    bool runaway = false;
    for (std::size_t j = 0; j < m; ++j) {
      const double limit = cols[j] == 0 ? opt.intercept_limit : opt.coef_limit;
      if (std::fabs(beta[j]) > limit) runaway = true;
    }
    if (!runaway) {
      double min_pi1 = 1.0, max_pi0 = 0.0;
      bool any1 = false, any0 = false;
      for (std::size_t i = 0; i < n; ++i) {
        if (weights[i] == 0.0) continue;
        if (y[i]) {
          any1 = true;
          min_pi1 = std::min(min_pi1, pi[i]);
        } else {
          any0 = true;
          max_pi0 = std::max(max_pi0, pi[i]);
        }
      }
      if ((any1 && min_pi1 > 1.0 - 1e-12) || (any0 && max_pi0 < 1e-12) || !any1 || !any0) {
        runaway = true;
      }
    }
    if (runaway) {
      fit.separation_flag = true;
      fit.failure = FitFailure::separation;
      break;
    }

    // Convergence: relative log-likelihood change and score size.
    const double rel_change = std::fabs(ll_new - ll_old) / (std::fabs(ll_new) + 0.1);
    double max_score = 0.0;
    {
      std::vector<Accumulator> s2(m);
      for (std::size_t i = 0; i < n; ++i) {
        const double w = weights[i];
        if (w == 0.0) continue;
        const double* row = design.row_ptr(i);
        const double resid = w * (y[i] - pi[i]);
        for (std::size_t a = 0; a < m; ++a) s2[a].add(resid * row[cols[a]]);
      }
      for (std::size_t a = 0; a < m; ++a) max_score = std::max(max_score, std::fabs(s2[a].value()));
    }
    ll_old = ll_new;
    if (rel_change < opt.loglik_rel_tol && max_score < opt.score_tol) {
      fit.converged = true;
      break;
    }
  }

  fit.loglik = ll_old;
  if (!fit.converged && fit.failure == FitFailure::none) {
    fit.failure = FitFailure::iteration_limit;
  }

  // Expand coefficients back to the full column set.
  for (std::size_t j = 0; j < m; ++j) fit.coef[cols[j]] = beta[j];

  if (fit.converged) {
    // Information at the optimum.
    Matrix a_mat(m, m);
    Matrix b_mat(m, m);
    const bool sandwich = opt.force_sandwich || kind == WeightKind::probability;
    for (std::size_t i = 0; i < n; ++i) {
      const double w = weights[i];
      if (w == 0.0) continue;
      const double* row = design.row_ptr(i);
      const double curv = w * pi[i] * (1.0 - pi[i]);
      const double wresid = w * (y[i] - pi[i]);
      for (std::size_t a = 0; a < m; ++a) {
        const double xa = row[cols[a]];
        for (std::size_t b = 0; b <= a; ++b) {
          a_mat(a, b) += curv * xa * row[cols[b]];
          if (sandwich) b_mat(a, b) += wresid * wresid * xa * row[cols[b]];
        }
      }
    }
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = a + 1; b < m; ++b) {
        a_mat(a, b) = a_mat(b, a);
        b_mat(a, b) = b_mat(b, a);
      }
    }
    auto a_inv = invert_spd(a_mat);
    if (!a_inv) {
      fit.converged = false;
      fit.failure = FitFailure::singular_information;
      return fit;
    }
    Matrix cov_kept(m, m);
    if (sandwich) {
      // A^-1 B A^-1
      Matrix tmp(m, m);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) {
          double s = 0.0;
          for (std::size_t l = 0; l < m; ++l) s += (*a_inv)(i, l) * b_mat(l, j);
          tmp(i, j) = s;
        }
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) {
          double s = 0.0;
          for (std::size_t l = 0; l < m; ++l) s += tmp(i, l) * (*a_inv)(l, j);
          cov_kept(i, j) = s;
        }
    } else {
      cov_kept = *a_inv;
    }
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = 0; b < m; ++b) fit.cov(cols[a], cols[b]) = cov_kept(a, b);
  }
  return fit;
}

// Fitted probabilities for a converged fit on the same design.
inline std::vector<double> fitted_probabilities(const Matrix& design,
                                                const WeightedLogisticFit& fit) {
  const std::size_t n = design.rows();
  const std::size_t k = design.cols();
  std::vector<double> p(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = design.row_ptr(i);
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += row[j] * fit.coef[j];
    p[i] = expit(s);
  }
  return p;
}

}  // namespace pslab
