// Copyright 2026 the dksan authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>

namespace dksan {

/// Deterministic counter-based generator (SplitMix64).
///
/// Draw i is mix64(seed + (i+1) * 0x9E3779B97F4A7C15), so the full stream
/// state is just (seed, counter) and any stream position can be saved and
/// restored exactly. The same seed produces the same scalar stream on every
/// platform; doubles are built from the top 53 bits.
class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed), counter_(0) {}

  uint64_t next_u64() {
    ++counter_;
    uint64_t z = seed_ + counter_ * UINT64_C(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)) * UINT64_C(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)) * UINT64_C(0x94D049BB133111EB);
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1), 53-bit resolution.
  double unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

  /// Box-Muller; consumes exactly two draws, no cached spare.
  double normal(double mean = 0.0, double sd = 1.0) {
    double u1 = unit();
    double u2 = unit();
    if (u1 < 0x1.0p-53) u1 = 0x1.0p-53;
    double r = std::sqrt(-2.0 * std::log(u1));
    return mean + sd * r * std::cos(6.283185307179586476925286766559 * u2);
  }

  /// Integer in [0, n), n >= 1. Multiply-shift on the top bits.
  uint64_t below(uint64_t n) {
    return static_cast<uint64_t>(unit() * static_cast<double>(n)) % n;
  }

  /// Derive an independent stream keyed by `stream`.
  Rng fork(uint64_t stream) const {
    uint64_t z = seed_ ^ (stream + UINT64_C(0xD1B54A32D192ED03));
    z = (z ^ (z >> 30)) * UINT64_C(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)) * UINT64_C(0x94D049BB133111EB);
    return Rng(z ^ (z >> 31));
  }

  uint64_t seed() const { return seed_; }
  uint64_t counter() const { return counter_; }
  void restore(uint64_t seed, uint64_t counter) {
    seed_ = seed;
    counter_ = counter;
  }

 private:
  uint64_t seed_;
  uint64_t counter_;
};

}  // namespace dksan
