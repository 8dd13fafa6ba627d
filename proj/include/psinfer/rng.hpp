#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace psinfer {

// Deterministic random number machinery. Every random quantity in the library
// is drawn from an explicitly seeded stream so that results are bit-identical
// across platforms, builds, and worker counts. The generator is xoshiro256**
// (Blackman & Vigna), seeded through splitmix64; stream derivation is a
// splitmix64 hash chain over (seed, id...) documented in the README.

inline uint64_t splitmix64_next(uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Hash-combines a stream id into a seed. Chaining calls derives nested
/// sub-streams: derive(derive(seed, a), b) is the stream for path (a, b).
inline uint64_t derive_seed(uint64_t seed, uint64_t id) {
  uint64_t s = seed ^ (0x9E3779B97F4A7C15ULL * (id + 1));
  return splitmix64_next(s);
}

inline uint64_t derive_seed(uint64_t seed, std::initializer_list<uint64_t> path) {
  for (uint64_t id : path) seed = derive_seed(seed, id);
  return seed;
}

/// xoshiro256** 1.0. State is never all-zero by construction.
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64_next(sm);
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in (0, 1]; used where log(u) must stay finite.
  double uniform01_open_left() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + uniform01() * (hi - lo); }

  bool bernoulli(double p) { return uniform01() < p; }

  /// Standard normal via Box-Muller; consumes exactly two uniforms per call.
  double normal() {
    const double u1 = uniform01_open_left();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Unbiased integer in [0, bound) by rejection.
  uint64_t below(uint64_t bound) {
    const uint64_t threshold = (0ULL - bound) % bound;
    for (;;) {
      const uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::array<uint64_t, 4> state_;
};

/// Stream-id constants; keeping them in one table avoids accidental reuse of
/// the same derivation path for two purposes.
namespace stream {
inline constexpr uint64_t covariates = 0x11;
inline constexpr uint64_t realize = 0x12;
inline constexpr uint64_t subsample = 0x21;
inline constexpr uint64_t bootstrap = 0x22;
inline constexpr uint64_t replicate = 0x23;
inline constexpr uint64_t population = 0x31;
}  // namespace stream

}  // namespace psinfer
