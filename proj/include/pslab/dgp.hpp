#pragma once

// Synthetic observational datasets with a binary exposure, a binary and
// four (optionally five) Gaussian covariates, and a binary outcome.
//
// Construction: a latent multivariate normal draw is dichotomised to
// produce the exposure E and covariate X1; continuous covariates are
// then recentred within the exposed group so the in-sample conditional
// mean difference matches the overlap scenario exactly.  The outcome is
// Bernoulli with a logit (or complementary log-log) linear predictor.
// X5 carries a zero outcome coefficient (instrument), X6 is an optional
// unmeasured confounder never visible to the analysis models.
//
// Each dataset also knows its own true marginal log odds ratio, computed
// by averaging potential-outcome probabilities over the realised sample.

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "pslab/linalg.hpp"
#include "pslab/mathutil.hpp"
#include "pslab/rng.hpp"

namespace pslab {

enum class Link { logit, cloglog };

inline double inverse_link(Link link, double eta) {
  return link == Link::logit ? expit(eta) : cloglog_inv(eta);
}

inline std::string link_name(Link link) {
  return link == Link::logit ? "logit" : "cloglog";
}

struct ScenarioSpec {
  std::size_t n = 1000;
  double exposure_prevalence = 0.5;  // Pr(E = 1)
  int overlap_scenario = 1;          // 1..5
  Link link = Link::logit;
  bool unmeasured_confounder = false;
  std::uint64_t replicate_index = 0;
  std::uint64_t base_seed = 0;
};

struct OverlapParams {
  double delta;         // E(Xi | E=1) - E(Xi | E=0) for continuous covariates
  double p1_given_e1;   // Pr(X1 = 1 | E = 1)
};

inline OverlapParams overlap_params(int scenario) {
  switch (scenario) {
    case 1: return {0.5, 0.45};
    case 2: return {1.0, 0.40};
    case 3: return {1.5, 0.35};
    case 4: return {2.0, 0.30};
    case 5: return {3.0, 0.20};
    default:
      throw std::invalid_argument("overlap_scenario must be in 1..5, got " +
                                  std::to_string(scenario));
  }
}

// Outcome model coefficients.  Held in a struct so tests can perturb
// individual terms (e.g. a null exposure effect).
struct OutcomeModel {
  double intercept = -2.3;
  double beta_e = std::log(2.0);
  double beta_x1 = std::log(1.3);
  double beta_x2 = std::log(1.5);
  double beta_x3 = std::log(6.0);
  double beta_x4 = std::log(3.0);
  double beta_x5 = std::log(1.0);  // instrument: zero by construction
  double beta_x6 = std::log(2.0);  // applies only when X6 is generated
};

struct SimulatedDataset {
  std::vector<int> e;
  std::vector<int> x1;
  std::vector<double> x2, x3, x4, x5;
  std::vector<double> x6;  // empty unless unmeasured_confounder
  std::vector<int> y;
  double true_log_mor = kNaN;

  std::size_t n() const { return e.size(); }
  bool has_x6() const { return !x6.empty(); }
};

// ---------------------------------------------------------------------------
// Latent correlation structure
// ---------------------------------------------------------------------------

// Latent variable order: E*, X1*, X2, X3, X4, X5 [, X6].
struct LatentCorrelation {
  Matrix sigma;
  Matrix chol;  // lower factor, possibly of the repaired matrix
  bool repaired = false;
};

// Latent correlation between E* and X2 chosen so the realised
// point-biserial correlation of (X2, dichotomised E) is 0.5:
//   corr(X2, E) = rho_latent * phi(c) / sqrt(p (1-p)),  c = Phi^{-1}(1-p).
// Inverting and clamping to [-0.99, 0.99]; the target is unattainable at
// very low prevalence, in which case the clamp plus PSD repair applies.
inline double latent_e_x2_correlation(double prevalence) {
  const double c = norm_quantile(1.0 - prevalence);
  const double r = 0.5 * std::sqrt(prevalence * (1.0 - prevalence)) / norm_pdf(c);
  return std::clamp(r, -0.99, 0.99);
}

inline LatentCorrelation build_latent_sigma(const ScenarioSpec& spec) {
  const std::size_t dim = spec.unmeasured_confounder ? 7 : 6;
  Matrix sigma(dim, dim, 0.1);
  for (std::size_t i = 0; i < dim; ++i) sigma(i, i) = 1.0;
  sigma(0, 1) = sigma(1, 0) = 0.3;  // tetrachoric corr(E, X1)
  const double r_e_x2 = latent_e_x2_correlation(spec.exposure_prevalence);
  sigma(0, 2) = sigma(2, 0) = r_e_x2;

  LatentCorrelation out;
  out.sigma = sigma;
  if (auto l = cholesky_spd(sigma)) {
    out.chol = *l;
    return out;
  }

  // Not PSD (happens when the calibrated entry is clamped near 1):
  // clip eigenvalues, reassemble, rescale to unit diagonal.
  SymmetricEigen eig = symmetric_eigen(sigma);
  Matrix repaired(dim, dim);
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        s += eig.vectors(i, k) * std::max(eig.values[k], 1e-10) * eig.vectors(j, k);
      }
      repaired(i, j) = s;
    }
  }
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      if (i != j) repaired(i, j) /= std::sqrt(repaired(i, i) * repaired(j, j));
    }
  }
  for (std::size_t i = 0; i < dim; ++i) repaired(i, i) = 1.0;

  auto l = cholesky_spd(repaired);
  if (!l) {
    throw std::runtime_error("latent correlation repair failed to produce an SPD matrix");
  }
  out.sigma = repaired;
  out.chol = *l;
  out.repaired = true;
  return out;
}

// ---------------------------------------------------------------------------
// X1 conditional-probability shift
// ---------------------------------------------------------------------------

// Shift s applied to latent X1* on exposed rows so that, in the latent
// population, Pr(X1* + s > 0 | E* > c) = target.  The conditional
// probability is
//   (1/p) Int_c^inf phi(e) Phi((rho e + s) / sqrt(1 - rho^2)) de.
// Solved by bisection to 1e-10 on the probability scale.
inline double solve_x1_shift(double prevalence, double target, double rho) {
  const double c = norm_quantile(1.0 - prevalence);
  const double denom = std::sqrt(1.0 - rho * rho);
  auto conditional_prob = [&](double s) {
    auto f = [&](double e) { return norm_pdf(e) * norm_cdf((rho * e + s) / denom); };
    return simpson(f, c, c + 12.0, 8192) / prevalence;
  };
  double lo = -12.0, hi = 12.0;
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double p = conditional_prob(mid);
    if (std::fabs(p - target) < 1e-10) return mid;
    (p < target ? lo : hi) = mid;
    if (hi - lo < 1e-13) break;
  }
  return 0.5 * (lo + hi);
}

namespace detail {

// The X1 shift depends only on (prevalence, scenario); cache it.
inline double cached_x1_shift(double prevalence, int scenario) {
  struct Entry {
    double prevalence;
    int scenario;
    double shift;
  };
  static std::vector<Entry> cache;
  static std::mutex mu;
  const double target = overlap_params(scenario).p1_given_e1;
  {
    std::lock_guard<std::mutex> lock(mu);
    for (const auto& e : cache) {
      if (e.prevalence == prevalence && e.scenario == scenario) return e.shift;
    }
  }
  const double s = solve_x1_shift(prevalence, target, 0.3);
  std::lock_guard<std::mutex> lock(mu);
  cache.push_back({prevalence, scenario, s});
  return s;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Dataset generation
// ---------------------------------------------------------------------------

// Substream key for one replicate.  Fields are folded in a fixed,
// documented order; equal specs give equal keys.
inline std::uint64_t replicate_key(const ScenarioSpec& spec) {
  std::uint64_t k = splitmix64(spec.base_seed);
  k = key_combine(k, static_cast<std::uint64_t>(spec.n));
  std::uint64_t prev_bits;
  static_assert(sizeof(double) == sizeof(std::uint64_t));
  std::memcpy(&prev_bits, &spec.exposure_prevalence, sizeof(prev_bits));
  k = key_combine(k, prev_bits);
  k = key_combine(k, static_cast<std::uint64_t>(spec.overlap_scenario));
  k = key_combine(k, spec.link == Link::logit ? 0u : 1u);
  k = key_combine(k, spec.unmeasured_confounder ? 1u : 0u);
  k = key_combine(k, spec.replicate_index);
  return k;
}

// Draw covariates and exposure (outcome left empty).
//
// Draw order within the latent stream: for each row i = 0..n-1, dim
// standard normals (E*, X1*, X2..X5[, X6] after the Cholesky transform).
inline SimulatedDataset draw_dataset(const ScenarioSpec& spec) {
  if (spec.n == 0) throw std::invalid_argument("sample size must be positive");
  if (!(spec.exposure_prevalence > 0.0 && spec.exposure_prevalence < 1.0)) {
    throw std::invalid_argument("exposure_prevalence must be in (0,1)");
  }
  const OverlapParams overlap = overlap_params(spec.overlap_scenario);
  const LatentCorrelation corr = build_latent_sigma(spec);
  const std::size_t dim = corr.sigma.rows();
  const std::size_t n = spec.n;

  SimulatedDataset data;
  data.e.resize(n);
  data.x1.resize(n);
  data.x2.resize(n);
  data.x3.resize(n);
  data.x4.resize(n);
  data.x5.resize(n);
  if (spec.unmeasured_confounder) data.x6.resize(n);

  const double e_threshold = norm_quantile(1.0 - spec.exposure_prevalence);
  const double x1_shift = detail::cached_x1_shift(spec.exposure_prevalence,
                                                  spec.overlap_scenario);

  Rng rng = make_stream(replicate_key(spec), StreamTag::latent_covariates);
  std::vector<double> z(dim), latent(dim);
  std::vector<double> x1_latent(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < dim; ++d) z[d] = rng.normal();
    for (std::size_t r = 0; r < dim; ++r) {
      double s = 0.0;
      for (std::size_t k = 0; k <= r; ++k) s += corr.chol(r, k) * z[k];
      latent[r] = s;
    }
    data.e[i] = latent[0] > e_threshold ? 1 : 0;
    x1_latent[i] = latent[1];
    data.x2[i] = latent[2];
    data.x3[i] = latent[3];
    data.x4[i] = latent[4];
    data.x5[i] = latent[5];
    if (spec.unmeasured_confounder) data.x6[i] = latent[6];
  }

  // X1: marginal threshold 0 gives Pr(X1=1)=0.5; exposed rows get the
  // latent shift that moves the conditional probability to its target.
  for (std::size_t i = 0; i < n; ++i) {
    const double v = x1_latent[i] + (data.e[i] ? x1_shift : 0.0);
    data.x1[i] = v > 0.0 ? 1 : 0;
  }

  // Exact in-sample recentring of the continuous covariates: the
  // exposed-group mean is moved so that mean(X|E=1) - mean(X|E=0) equals
  // the scenario delta. Skipped when either group is empty (degenerate
  // draws are handled downstream as non-convergence).
  std::size_t n1 = 0;
  for (int ei : data.e) n1 += static_cast<std::size_t>(ei);
  if (n1 > 0 && n1 < n) {
    auto recentre = [&](std::vector<double>& x) {
      double s1 = 0.0, s0 = 0.0;
      for (std::size_t i = 0; i < n; ++i) (data.e[i] ? s1 : s0) += x[i];
      const double diff = s1 / static_cast<double>(n1) -
                          s0 / static_cast<double>(n - n1);
      const double adjust = overlap.delta - diff;
      for (std::size_t i = 0; i < n; ++i) {
        if (data.e[i]) x[i] += adjust;
      }
    };
    recentre(data.x2);
    recentre(data.x3);
    recentre(data.x4);
    recentre(data.x5);
    if (spec.unmeasured_confounder) recentre(data.x6);
  }
  return data;
}

inline double linear_predictor(const SimulatedDataset& data, std::size_t i,
                               int exposure, const OutcomeModel& model) {
  double eta = model.intercept + model.beta_e * exposure +
               model.beta_x1 * data.x1[i] + model.beta_x2 * data.x2[i] +
               model.beta_x3 * data.x3[i] + model.beta_x4 * data.x4[i] +
               model.beta_x5 * data.x5[i];
  if (data.has_x6()) eta += model.beta_x6 * data.x6[i];
  return eta;
}

// Fill the outcome.  One uniform per row, in row order, from the outcome
// substream; the draw sequence does not depend on covariate values.
inline void generate_outcome(SimulatedDataset& data, const ScenarioSpec& spec,
                             const OutcomeModel& model = OutcomeModel{}) {
  const std::size_t n = data.n();
  data.y.resize(n);
  Rng rng = make_stream(replicate_key(spec), StreamTag::outcome);
  for (std::size_t i = 0; i < n; ++i) {
    const double pi = inverse_link(spec.link, linear_predictor(data, i, data.e[i], model));
    data.y[i] = rng.uniform01() < pi ? 1 : 0;
  }
}

// Per-dataset true marginal log odds ratio: average the potential-outcome
// probabilities under E:=1 and E:=0 over the realised sample, then
// contrast on the log-odds scale.  Deterministic (no simulation noise).
inline double true_marginal_log_or(const SimulatedDataset& data, const ScenarioSpec& spec,
                                   const OutcomeModel& model = OutcomeModel{}) {
  const std::size_t n = data.n();
  Accumulator p1, p0;
  for (std::size_t i = 0; i < n; ++i) {
    p1.add(inverse_link(spec.link, linear_predictor(data, i, 1, model)));
    p0.add(inverse_link(spec.link, linear_predictor(data, i, 0, model)));
  }
  const double m1 = p1.value() / static_cast<double>(n);
  const double m0 = p0.value() / static_cast<double>(n);
  return logit(m1) - logit(m0);
}

// Independent check on the probability-averaging oracle: simulate both
// potential outcomes as Bernoulli draws and contrast the realised rates.
struct PotentialOutcomeSim {
  double log_or;
  double mc_se;  // delta-method standard error of log_or
};

inline PotentialOutcomeSim simulate_potential_outcome_log_or(
    const SimulatedDataset& data, const ScenarioSpec& spec,
    const OutcomeModel& model = OutcomeModel{}) {
  const std::size_t n = data.n();
  Rng rng = make_stream(replicate_key(spec), StreamTag::potential_outcome_oracle);
  std::size_t events1 = 0, events0 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double pi1 = inverse_link(spec.link, linear_predictor(data, i, 1, model));
    const double pi0 = inverse_link(spec.link, linear_predictor(data, i, 0, model));
    if (rng.uniform01() < pi1) ++events1;
    if (rng.uniform01() < pi0) ++events0;
  }
  const double p1 = static_cast<double>(events1) / static_cast<double>(n);
  const double p0 = static_cast<double>(events0) / static_cast<double>(n);
  PotentialOutcomeSim out;
  out.log_or = logit(p1) - logit(p0);
  out.mc_se = std::sqrt(1.0 / (n * p1 * (1.0 - p1)) + 1.0 / (n * p0 * (1.0 - p0)));
  return out;
}

}  // namespace pslab
