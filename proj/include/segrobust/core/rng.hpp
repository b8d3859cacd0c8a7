#ifndef SEGROBUST_CORE_RNG_HPP
#define SEGROBUST_CORE_RNG_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

#include "segrobust/core/types.hpp"

namespace segrobust {

// SplitMix64. Every stochastic choice in the toolkit draws from this
// generator so that ports in other languages reproduce the same streams.
class DeterministicRng {
 public:
  using result_type = std::uint64_t;

  constexpr explicit DeterministicRng(std::uint64_t seed = 0) noexcept : state_(seed) {}

  constexpr std::uint64_t next_u64() noexcept {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  constexpr std::uint64_t operator()() noexcept { return next_u64(); }
  static constexpr std::uint64_t min() noexcept { return 0; }
  static constexpr std::uint64_t max() noexcept {
    return std::numeric_limits<std::uint64_t>::max();
  }

  constexpr std::uint64_t state() const noexcept { return state_; }

  // Uniform in [0, 1) from the top 53 bits.
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n) by plain modulo; n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept { return next_u64() % n; }

  // Standard normal via Box-Muller: u1 = 1 - uniform() in (0,1], u2 = uniform(),
  // z = sqrt(-2 ln u1) * cos(2 pi u2). One variate per pair; the sine branch
  // is discarded.
  double gaussian() noexcept {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Poisson variate by CDF inversion from a single uniform.
  std::uint64_t poisson(double mean) noexcept {
    if (!(mean > 0.0)) return 0;
    const double u = uniform();
    double p = std::exp(-mean);
    double cdf = p;
    std::uint64_t k = 0;
    const std::uint64_t cap = static_cast<std::uint64_t>(mean * 20.0 + 100.0);
    while (u >= cdf && k < cap) {
      ++k;
      p *= mean / static_cast<double>(k);
      cdf += p;
    }
    return k;
  }

 private:
  std::uint64_t state_;
};

// Seed of an independent child stream, keyed by an ordinal.
inline std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t ordinal) noexcept {
  DeterministicRng rng(parent ^ (0xD1B54A32D192ED03ULL * (ordinal + 1)));
  return rng.next_u64();
}

// Uniform draw among the set pixels of `mask` (row-major enumeration).
inline PointPrompt sample_point_in_mask(const BinaryMask& mask, DeterministicRng& rng) {
  const Index count = popcount(mask);
  if (count == 0) throw EmptyMask("cannot sample a point from an empty mask");
  Index target = static_cast<Index>(rng.below(static_cast<std::uint64_t>(count)));
  for (Index y = 0; y < mask.rows(); ++y)
    for (Index x = 0; x < mask.cols(); ++x)
      if (mask(y, x) && target-- == 0) return {x, y};
  throw EmptyMask("unreachable: mask enumeration exhausted");
}

}  // namespace segrobust

#endif  // SEGROBUST_CORE_RNG_HPP
