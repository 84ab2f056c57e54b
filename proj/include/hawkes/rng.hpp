#pragma once

#include <cmath>
#include <cstdint>

namespace hawkes {

// Deterministic counter-based generator (SplitMix64 finalizer over a keyed
// counter). Chosen over <random> engines because the standard distributions
// are implementation-defined, which would break byte-identical reruns across
// toolchains. Streams derived from (seed, stream) are independent for
// practical purposes, so ensemble paths can be generated in any order.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : state_(mix(mix(seed + 0x9e3779b97f4a7c15ULL) ^
                   mix(stream + 0xbf58476d1ce4e5b9ULL))) {}

  [[nodiscard]] static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t next_u64() {
    counter_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_ ^ counter_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform on the open interval (0, 1); safe to pass through log().
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  double exponential(double rate) { return -std::log(uniform()) / rate; }

  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    // Box-Muller: deterministic given the uniform stream.
    const double u = uniform();
    const double v = uniform();
    const double r = std::sqrt(-2.0 * std::log(u));
    const double theta = 6.283185307179586476925286766559 * v;
    cached_ = r * std::sin(theta);
    have_cached_ = true;
    return r * std::cos(theta);
  }

  // Poisson by inversion for small means, Hormann's PTRS rejection otherwise.
  std::uint64_t poisson(double mean) {
    if (mean <= 0) return 0;
    if (mean < 30.0) {
      const double limit = std::exp(-mean);
      double prod = uniform();
      std::uint64_t n = 0;
      while (prod > limit) {
        prod *= uniform();
        ++n;
      }
      return n;
    }
    const double b = 0.931 + 2.53 * std::sqrt(mean);
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double v_r = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
      double u = uniform() - 0.5;
      double v = uniform();
      const double us = 0.5 - std::fabs(u);
      const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
      if (us >= 0.07 && v <= v_r) return static_cast<std::uint64_t>(k);
      if (k < 0 || (us < 0.013 && v > us)) continue;
      const double lgk = std::lgamma(k + 1.0);
      if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
          k * std::log(mean) - mean - lgk) {
        return static_cast<std::uint64_t>(k);
      }
    }
  }

 private:
  std::uint64_t state_{0};
  std::uint64_t counter_{0};
  double cached_{0};
  bool have_cached_{false};
};

}  // namespace hawkes
