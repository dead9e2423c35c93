#pragma once

// Periodogram matrices of a bivariate series at the first m Fourier
// frequencies lambda_j = 2 pi j / n.

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "mlw/errors.hpp"
#include "mlw/fft.hpp"
#include "mlw/numeric.hpp"
#include "mlw/series.hpp"

namespace mlw {

using cplx = std::complex<double>;

struct FourierGrid {
  std::size_t n = 0;
  std::size_t m = 0;
  std::vector<double> lambdas;  ///< lambda_1 .. lambda_m

  FourierGrid() = default;
  FourierGrid(std::size_t n_, std::size_t m_) : n(n_), m(m_) {
    if (m < 1 || m > n / 2) throw InvalidInput("FourierGrid: need 1 <= m <= n/2");
    lambdas.resize(m);
    for (std::size_t j = 1; j <= m; ++j) lambdas[j - 1] = kTwoPi * double(j) / double(n);
  }

  double lambda_m() const { return lambdas.back(); }
};

/// Hermitian 2x2 matrix stored as (I11, I12, I22); I21 = conj(I12).
struct Periodogram2 {
  double i11 = 0.0;
  cplx i12 = 0.0;
  double i22 = 0.0;

  cplx i21() const { return std::conj(i12); }
  double det() const { return i11 * i22 - std::norm(i12); }
};

struct PeriodogramSet {
  FourierGrid grid;
  std::vector<Periodogram2> I;

  std::size_t m() const { return grid.m; }
  std::size_t n() const { return grid.n; }
};

/// Bandwidth presets floor(n^{2/3}/2), floor(n^{2/3}) (the default) and
/// round(2 n^{2/3}); each capped at n/2. The last one is rounded, which gives
/// m = 51 at n = 128 as in the published simulation table.
enum class BandwidthRule { Half, One, Two };

inline std::size_t bandwidth(std::size_t n, BandwidthRule rule = BandwidthRule::One) {
  // cbrt(n^2) is exact for perfect cubes, so floor() is safe at n = 512.
  const double base = std::cbrt(double(n) * double(n));
  double m = 0.0;
  switch (rule) {
    case BandwidthRule::Half: m = std::floor(0.5 * base); break;
    case BandwidthRule::One: m = std::floor(base); break;
    case BandwidthRule::Two: m = std::round(2.0 * base); break;
  }
  return std::clamp<std::size_t>(static_cast<std::size_t>(m), 1, n / 2);
}

namespace detail {

inline void check_periodogram_input(const Series2& z, std::size_t m) {
  if (z.size() < 2 || m < 1 || m > z.size() / 2) {
    throw InvalidInput("periodogram: need 1 <= m <= n/2");
  }
  if (!z.all_finite()) throw InvalidInput("periodogram: non-finite data");
}

inline Periodogram2 outer(cplx w1, cplx w2, double n) {
  return {std::norm(w1) / n, w1 * std::conj(w2) / n, std::norm(w2) / n};
}

inline std::vector<double> demeaned(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  s /= double(v.size());
  std::vector<double> out(v);
  for (double& x : out) x -= s;
  return out;
}

}  // namespace detail

/// I(lambda_j) = n^{-1} w(lambda_j) w(lambda_j)^*, w(lambda) = sum_{t=1}^n z_t e^{i t lambda}.
/// At j >= 1 a constant has no effect; removing the sample mean first keeps its
/// rounding out of the transform, so mean shifts change I only at rounding level.
inline PeriodogramSet periodogram(const Series2& z, std::size_t m, bool demean = true) {
  detail::check_periodogram_input(z, m);
  const std::size_t n = z.size();
  PeriodogramSet ps{FourierGrid(n, m), {}};
  const auto a = demean ? detail::demeaned(z.c1) : z.c1;
  const auto b = demean ? detail::demeaned(z.c2) : z.c2;
  // FFTW gives X_k = sum_{s=0}^{n-1} x_s e^{-i s lambda_k}; with t = s + 1,
  // w(lambda_k) = e^{i lambda_k} conj(X_k). The common unit factor cancels in
  // w1 conj(w2), leaving I12 = conj(X1_k) X2_k / n.
  const auto f1 = fft::rfft(a);
  const auto f2 = fft::rfft(b);
  ps.I.resize(m);
  const double dn = double(n);
  for (std::size_t j = 1; j <= m; ++j) {
    ps.I[j - 1] = detail::outer(std::conj(f1[j]), std::conj(f2[j]), dn);
  }
  return ps;
}

/// O(n m) direct summation of the same definition.
inline PeriodogramSet periodogram_direct(const Series2& z, std::size_t m) {
  detail::check_periodogram_input(z, m);
  const std::size_t n = z.size();
  PeriodogramSet ps{FourierGrid(n, m), {}};
  ps.I.resize(m);
  for (std::size_t j = 1; j <= m; ++j) {
    cplx w1 = 0.0, w2 = 0.0;
    for (std::size_t t = 1; t <= n; ++t) {
      // Reduce t j mod n first so the angle stays small.
      const double ang = kTwoPi * double((t * j) % n) / double(n);
      const cplx e = std::polar(1.0, ang);
      w1 += z.c1[t - 1] * e;
      w2 += z.c2[t - 1] * e;
    }
    ps.I[j - 1] = detail::outer(w1, w2, double(n));
  }
  return ps;
}

}  // namespace mlw
