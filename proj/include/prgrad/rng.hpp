#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace prgrad {

// SplitMix64: small counter-based generator with bit-exact output on every
// platform. Sampling below avoids std::normal_distribution so seeded runs
// reproduce across standard libraries.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed = 0) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~std::uint64_t{0}; }

  result_type operator()() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

using Rng = SplitMix64;

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Stream key for one trial at one grid point. Experiments check the derived
// keys for collisions across their whole grid before running.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t point,
                                 std::uint64_t trial) {
  std::uint64_t h = mix64(base + 0x9e3779b97f4a7c15ull);
  h = mix64(h ^ (point + 0xbf58476d1ce4e5b9ull));
  h = mix64(h ^ (trial + 0x94d049bb133111ebull));
  return h;
}

// Uniform on [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Standard normal via Box-Muller, cosine branch; u1 lies in (0, 1].
inline double gaussian(Rng& rng) {
  const double u1 = static_cast<double>((rng() >> 11) + 1) * 0x1.0p-53;
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace prgrad
