#pragma once

// Deterministic random number streams for parallel simulation.
//
// Every replicate draws from its own substream, keyed by hashing
// (base_seed, cell identity, replicate index, purpose tag) through
// splitmix64.  Results are therefore independent of scheduling and
// thread count, and any single replicate can be regenerated in
// isolation.  Normal variates use the inverse-CDF method so the
// stream consumes exactly one uint64 per draw on every platform.

#include <array>
#include <cstdint>

#include "pslab/mathutil.hpp"

namespace pslab {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Order-sensitive key combiner: key_combine(a,b) != key_combine(b,a).
inline std::uint64_t key_combine(std::uint64_t key, std::uint64_t field) {
  return splitmix64(key ^ (0x9e3779b97f4a7c15ULL + field));
}

// xoshiro256++ (Blackman & Vigna), seeded from a 64-bit key via splitmix64.
class Rng {
 public:
  explicit Rng(std::uint64_t key) {
    std::uint64_t s = key;
    for (auto& word : state_) {
      s = splitmix64(s);
      word = s;
    }
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform on the open interval (0,1); 53-bit resolution, never 0 or 1.
  double uniform01() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via inverse CDF.
  double normal() { return norm_quantile(uniform01()); }

  // Uniform integer in [0, bound) by rejection; bound must be > 0.
  std::uint64_t uniform_below(std::uint64_t bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::array<std::uint64_t, 4> state_;
};

// Purpose tags: one substream per distinct use within a replicate, so
// consumption in one stage can never shift draws in another.
enum class StreamTag : std::uint64_t {
  latent_covariates = 1,
  outcome = 2,
  caliper_order = 3,
  potential_outcome_oracle = 4,
};

inline Rng make_stream(std::uint64_t replicate_key, StreamTag tag) {
  return Rng(key_combine(replicate_key, static_cast<std::uint64_t>(tag)));
}

}  // namespace pslab
