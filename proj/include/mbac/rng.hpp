#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mbac {

/**
 * Deterministic random stream with an explicit 64-bit seed.
 *
 * Every stochastic operation in the library draws from one of these; there is
 * no global RNG state anywhere. The raw engine is std::mt19937_64, whose
 * output sequence is fixed by the standard, so identical seeds reproduce
 * identical draw sequences bitwise. All derived draws (uniforms, categorical
 * indices, normals) are implemented here on top of the raw 64-bit output so
 * that no library-dependent distribution code can change results.
 */
class DetRng {
 public:
  explicit DetRng(std::uint64_t seed) : engine_(seed) {}

  /** Uniform double in [0, 1) with 53 random bits. */
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /** Uniform double in [lo, hi). */
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /** Standard normal via Box-Muller (two uniforms per draw, no cached spare). */
  double normal() {
    double u1 = 1.0 - uniform();  // (0, 1] keeps the log finite
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  /** Unbiased integer in [0, n) by rejection. */
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v = engine_();
    while (v >= limit) v = engine_();
    return v % n;
  }

  /**
   * Index i drawn with probability probs[i] by inverse CDF on one uniform.
   * The final index absorbs any rounding slack in the cumulative sum.
   */
  int categorical(const double* probs, int n) {
    double u = uniform();
    double cum = 0.0;
    for (int i = 0; i < n; ++i) {
      cum += probs[i];
      if (u < cum) return i;
    }
    return n - 1;
  }

  std::uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace mbac
