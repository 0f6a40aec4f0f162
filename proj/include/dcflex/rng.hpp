#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace dcflex {

/// Deterministic random source. All draws are derived from raw mt19937_64
/// output with fixed arithmetic, so a given seed produces the same sequence
/// on every platform (std::uniform_real_distribution and friends make no
/// such promise).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  /// Uniform on [lo, hi].
  double uniform(double lo, double hi) {
    if (!(lo <= hi)) throw std::invalid_argument("Rng::uniform: lo > hi");
    return lo + (hi - lo) * uniform01();
  }

  /// Standard normal via Box-Muller (one value per call, cache for the pair).
  double normal01() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    double u2 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double sd) { return mean + sd * normal01(); }

  /// Normal truncated to (0, inf), by rejection. Requires a distribution
  /// with a decent positive mass so the loop terminates quickly.
  double truncated_normal_pos(double mean, double sd) {
    if (!(sd >= 0.0)) throw std::invalid_argument("Rng: negative sd");
    if (mean <= 0.0)
      throw std::invalid_argument("Rng: truncated_normal_pos wants mean > 0");
    for (int i = 0; i < 10000; ++i) {
      const double x = normal(mean, sd);
      if (x > 0.0) return x;
    }
    throw std::runtime_error("Rng: truncated normal rejection failed");
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace dcflex
