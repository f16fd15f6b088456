#pragma once

#include <cstdint>
#include <random>
#include <span>

#include "rde/errors.hpp"

namespace rde {

namespace detail {

// splitmix64 finalizer; a full-period mix of 64-bit state
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace detail

// Decorrelated seed for substream `index` of a master seed.  Replications and
// per-arrival streams each get their own index so results do not depend on
// scheduling order.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return detail::splitmix64(master + (index + 1) * 0x9E3779B97F4A7C15ULL);
}

// Deterministic random stream.  mt19937_64 output is pinned by the standard,
// and all variate mappings below are written out explicitly, so a seed yields
// the same numbers on every platform.  The std::*_distribution adapters are
// deliberately avoided: their mappings are implementation-defined.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  // uniform on [0, 1) with 53 random bits
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) {
    if (!(lo <= hi)) throw DomainError("uniform range has lo > hi");
    return lo + (hi - lo) * uniform01();
  }

  // index draw by CDF inversion; weights need not be normalized
  std::size_t categorical(std::span<const double> weights) {
    if (weights.empty()) throw DomainError("categorical draw needs at least one weight");
    double total = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0)) throw DomainError("categorical weights must be non-negative");
      total += w;
    }
    if (!(total > 0.0)) throw DomainError("categorical weights sum to zero");
    const double u = uniform01() * total;
    double cum = 0.0;
    for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
      cum += weights[i];
      if (u < cum) return i;
    }
    return weights.size() - 1;
  }

  std::uint64_t next_raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace rde
