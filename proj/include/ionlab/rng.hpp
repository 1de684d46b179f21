#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <utility>

#include "ionlab/constants.hpp"

// Counter-seeded random streams for reproducible parallel Monte Carlo.
// Each work unit (one experimental sequence) draws from its own stream,
// derived from (master_seed, index), so results do not depend on how the
// work is scheduled across threads.

namespace ionlab {

// splitmix64 finalizer; full-avalanche 64-bit mixer used for seeding only.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

// xoshiro256++ with splitmix64 state expansion. Distribution helpers are
// hand-rolled so that a given seed yields the same draws on every platform.
class RngStream {
 public:
  using result_type = std::uint64_t;

  explicit RngStream(std::uint64_t seed) noexcept {
    std::uint64_t s = seed;
    for (auto& word : state_) {
      s += 0x9E3779B97F4A7C15ULL;
      word = mix64(s);
    }
    if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
  }

  // Stream for one sequence of an accumulation run. The pair is avalanched
  // before state expansion, so streams with nearby indices share nothing.
  static RngStream for_sequence(std::uint64_t master_seed,
                                std::uint64_t index) noexcept {
    return RngStream(mix64(master_seed + 0x9E3779B97F4A7C15ULL * (index + 1)));
  }

  std::uint64_t next() noexcept {
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

  std::uint64_t operator()() noexcept { return next(); }
  static constexpr std::uint64_t min() { return 0; }
  static constexpr std::uint64_t max() { return ~std::uint64_t{0}; }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform01() noexcept {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  // Uniform on (0, 1]; safe under log().
  double uniform_open01() noexcept {
    return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
  }

  // Uniform on [-1, 1).
  double uniform_pm1() noexcept { return 2.0 * uniform01() - 1.0; }

  // Standard normal pair (Box-Muller).
  std::pair<double, double> gaussian_pair() noexcept {
    const double u1 = uniform_open01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return {r * std::cos(kTwoPi * u2), r * std::sin(kTwoPi * u2)};
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> state_{};
};

}  // namespace ionlab
