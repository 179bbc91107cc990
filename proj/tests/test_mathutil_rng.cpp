#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "pslab/mathutil.hpp"
#include "pslab/rng.hpp"

using namespace pslab;

TEST_CASE("normal quantile matches known values") {
  CHECK(norm_quantile(0.5) == 0.0);
  CHECK_THAT(norm_quantile(0.975), Catch::Matchers::WithinAbs(1.959963984540054, 1e-12));
  CHECK_THAT(norm_quantile(0.95), Catch::Matchers::WithinAbs(1.6448536269514722, 1e-12));
  CHECK_THAT(norm_quantile(0.05), Catch::Matchers::WithinAbs(-1.6448536269514722, 1e-12));
  // Exposure threshold used by the generator at 5% prevalence.
  CHECK_THAT(norm_quantile(1.0 - 0.05), Catch::Matchers::WithinAbs(1.6449, 5e-5));
  CHECK_THROWS_AS(norm_quantile(0.0), std::domain_error);
  CHECK_THROWS_AS(norm_quantile(1.0), std::domain_error);
}

TEST_CASE("normal quantile inverts the normal CDF") {
  for (double p = 0.0005; p < 1.0; p += 0.0131) {
    CHECK_THAT(norm_cdf(norm_quantile(p)), Catch::Matchers::WithinAbs(p, 1e-12));
  }
}

TEST_CASE("link functions") {
  CHECK_THAT(expit(-2.3), Catch::Matchers::WithinAbs(0.09112296101485616, 1e-12));
  CHECK_THAT(cloglog_inv(-2.3), Catch::Matchers::WithinAbs(0.0953967631403857, 1e-12));
  CHECK_THAT(logit(expit(1.7)), Catch::Matchers::WithinAbs(1.7, 1e-12));
  CHECK(expit(-800.0) == 0.0);
  CHECK(expit(800.0) == 1.0);
}

TEST_CASE("simpson rule integrates smooth functions") {
  const double third = simpson([](double x) { return x * x; }, 0.0, 1.0, 64);
  CHECK_THAT(third, Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-12));
  const double mass = simpson([](double x) { return norm_pdf(x); }, -8.0, 8.0, 4096);
  CHECK_THAT(mass, Catch::Matchers::WithinAbs(1.0, 1e-12));
}

TEST_CASE("rng streams are deterministic and keyed") {
  Rng a(42), b(42), c(43);
  bool all_equal = true, any_equal_c = false;
  for (int i = 0; i < 1000; ++i) {
    const auto va = a.next_u64();
    all_equal = all_equal && va == b.next_u64();
    any_equal_c = any_equal_c || va == c.next_u64();
  }
  CHECK(all_equal);
  CHECK_FALSE(any_equal_c);
}

TEST_CASE("uniform01 stays inside the open interval") {
  Rng rng(7);
  for (int i = 0; i < 200000; ++i) {
    const double u = rng.uniform01();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
  }
}

TEST_CASE("normal draws have sane first moments") {
  Rng rng(11);
  double sum = 0.0, ss = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    ss += z * z;
  }
  const double mean = sum / n;
  const double var = ss / n - mean * mean;
  CHECK_THAT(mean, Catch::Matchers::WithinAbs(0.0, 0.01));
  CHECK_THAT(var, Catch::Matchers::WithinAbs(1.0, 0.02));
}

TEST_CASE("uniform_below covers the range without bias spikes") {
  Rng rng(5);
  std::array<int, 7> counts{};
  for (int i = 0; i < 70000; ++i) counts[rng.uniform_below(7)]++;
  for (int k = 0; k < 7; ++k) CHECK(std::abs(counts[k] - 10000) < 500);
}

TEST_CASE("purpose tags give distinct substreams") {
  const std::uint64_t key = key_combine(splitmix64(9), 123);
  Rng latent = make_stream(key, StreamTag::latent_covariates);
  Rng outcome = make_stream(key, StreamTag::outcome);
  int equal = 0;
  for (int i = 0; i < 64; ++i) equal += latent.next_u64() == outcome.next_u64();
  CHECK(equal == 0);
  CHECK(key_combine(1, 2) != key_combine(2, 1));
}

TEST_CASE("accumulator compensates cancellation") {
  Accumulator acc;
  acc.add(1e16);
  for (int i = 0; i < 10; ++i) acc.add(1.0);
  acc.add(-1e16);
  CHECK(acc.value() == 10.0);
}
