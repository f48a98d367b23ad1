#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace caol {

/// Seeded generator with pinned output distributions. std::mt19937_64 is
/// fully specified by the standard, but the std:: distributions are not, so
/// uniform and gaussian draws are implemented here to keep corpora and
/// random filter initializations byte-identical across toolchains.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t bits() { return eng_(); }

  /// Uniform on [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (no cached spare, so the draw sequence
  /// is a pure function of the call index).
  double gaussian() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  /// Uniform integer in [0, n).
  uint64_t index(uint64_t n) { return eng_() % n; }

 private:
  std::mt19937_64 eng_;
};

}  // namespace caol
