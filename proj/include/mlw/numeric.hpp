#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include <boost/math/special_functions/gamma.hpp>

#include "mlw/errors.hpp"

namespace mlw {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Gamma function. glibc's tgamma is accurate to a few ulp on the
/// arguments used here (0 < x < 3).
inline double gamma_fn(double x) {
  if (!(x > 0.0) && std::floor(x) == x) {
    throw DomainError("gamma_fn: pole at non-positive integer");
  }
  return std::tgamma(x);
}

/// Euler Beta function B(a, b) for a, b > 0.
inline double beta_fn(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) {
    throw DomainError("beta_fn: arguments must be positive");
  }
  return std::beta(a, b);
}

/// Upper tail P(X > x) of a chi-square variate with df degrees of freedom.
inline double chi_square_upper_tail(double x, int df) {
  if (df < 1) throw DomainError("chi_square_upper_tail: df must be >= 1");
  if (!(x > 0.0)) return 1.0;
  return boost::math::gamma_q(0.5 * df, 0.5 * x);
}

/// Phase wrapped into (-pi, pi].
inline double wrap_phase(double g) {
  double w = std::remainder(g, kTwoPi);
  if (w <= -kPi) w += kTwoPi;
  return w;
}

// SplitMix64 finalizer (Steele, Lea and Flood). Used to derive independent
// replication seeds from a base seed and an index.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// seed' = splitmix64(seed XOR splitmix64(index + golden)).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(seed ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

}  // namespace mlw
