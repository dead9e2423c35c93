#pragma once

// Closed-form comparison estimators: narrow-band least squares for beta, a
// periodogram-phase estimate of gamma and univariate local Whittle memory.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "mlw/errors.hpp"
#include "mlw/fft.hpp"
#include "mlw/model.hpp"
#include "mlw/spectra.hpp"
#include "mlw/whittle.hpp"

namespace mlw {

/// beta = Re sum_j I_yx(lambda_j) / sum_j I_x(lambda_j).
inline double nbls_beta(const PeriodogramSet& ps) {
  double den = 0.0, num = 0.0;
  for (const auto& I : ps.I) {
    num += I.i12.real();
    den += I.i22;
  }
  if (!(den > 0.0)) throw NumericalFailure("nbls_beta: sum of I_x is zero");
  return num / den;
}

/// Phase of the band-summed cross-periodogram of (y - beta x, x), mapped into
/// (-pi/2, pi/2). Sign follows the Psi convention e^{-i gamma} of the objective,
/// so a one-sided fractional system gives approximately (d02 - d01) pi / 2.
/// beta_tilde must not be nbls_beta on the same band: that choice makes the
/// real part vanish identically.
inline double simple_gamma(const PeriodogramSet& ps, double beta_tilde) {
  cplx s = 0.0;
  double scale = 0.0;
  for (const auto& I : ps.I) {
    s += I.i12 - beta_tilde * I.i22;
    scale += std::abs(I.i12) + std::abs(beta_tilde) * I.i22;
  }
  if (!(std::abs(s.real()) > 1e-10 * scale)) {
    throw NumericalFailure(
        "simple_gamma: real part of the summed cross-periodogram is zero "
        "(beta_tilde equal to nbls_beta on the same band always gives this)");
  }
  return std::atan(-s.imag() / s.real());
}

struct LwRange {
  double lo = -0.49 + 0.01;
  double hi = 0.49;
};

/// Univariate local Whittle from periodogram ordinates I_j at lambda_j:
/// argmin_d log(mean lambda_j^{2d} I_j) - 2 d mean log lambda_j.
inline double univariate_lw_ordinates(std::span<const double> I, std::span<const double> lambdas,
                                      LwRange range = {}) {
  const std::size_t m = I.size();
  if (m == 0 || lambdas.size() != m) throw InvalidInput("univariate_lw: bad ordinates");
  if (!(range.lo < range.hi)) throw InvalidInput("univariate_lw: empty search range");
  std::vector<double> L(m);
  double lbar = 0.0, tot = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    L[j] = std::log(lambdas[j]);
    lbar += L[j];
    tot += I[j];
  }
  lbar /= double(m);
  if (!(tot > 0.0)) throw NumericalFailure("univariate_lw: degenerate series");
  auto f = [&](double d) {
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) s += std::exp(2.0 * d * (L[j] - lbar)) * I[j];
    return std::log(s / double(m));
  };
  // Coarse scan, then golden section on the bracket around the best point.
  const int steps = 100;
  const double h = (range.hi - range.lo) / steps;
  int best = 0;
  double fb = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= steps; ++i) {
    const double v = f(range.lo + i * h);
    if (v < fb) {
      fb = v;
      best = i;
    }
  }
  const double a = std::max(range.lo, range.lo + (best - 1) * h);
  const double b = std::min(range.hi, range.lo + (best + 1) * h);
  return detail::golden_section(f, a, b, 1e-8);
}

inline double univariate_lw(std::span<const double> series, std::size_t m, LwRange range = {}) {
  const std::size_t n = series.size();
  if (m < 1 || m > n / 2) throw InvalidInput("univariate_lw: need 1 <= m <= n/2");
  for (double v : series) {
    if (!std::isfinite(v)) throw InvalidInput("univariate_lw: non-finite data");
  }
  const auto X = fft::rfft(series);
  std::vector<double> I(m), lam(m);
  for (std::size_t j = 1; j <= m; ++j) {
    I[j - 1] = std::norm(X[j]) / double(n);
    lam[j - 1] = kTwoPi * double(j) / double(n);
  }
  return univariate_lw_ordinates(I, lam, range);
}

/// (nbls_beta, simple_gamma, LW on y - beta x, LW on x), projected into Theta.
/// With beta from nbls_beta on the same band simple_gamma is undefined, so
/// gamma starts at 0 whenever it fails.
inline ThetaVector baseline_start(const PeriodogramSet& ps, const ThetaSpace& sp) {
  const double b = nbls_beta(ps);
  double g = 0.0;
  try {
    g = simple_gamma(ps, b);
  } catch (const NumericalFailure&) {
    g = 0.0;
  }
  const std::size_t m = ps.m();
  std::vector<double> iu(m), ix(m);
  for (std::size_t j = 0; j < m; ++j) {
    const auto& I = ps.I[j];
    iu[j] = std::max(0.0, I.i11 - 2.0 * b * I.i12.real() + b * b * I.i22);
    ix[j] = I.i22;
  }
  const double d1 = univariate_lw_ordinates(iu, ps.grid.lambdas);
  const double d2 = univariate_lw_ordinates(ix, ps.grid.lambdas);
  return sp.project({b, g, d1, d2});
}

}  // namespace mlw
