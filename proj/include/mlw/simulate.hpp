#pragma once

// Simulation of z = (y, x) from B0 z_t = u_t, with u_t either the one-sided
// fractional ARMA(1, d, 0) or a bilateral MA with power-law coefficient tails.

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <variant>
#include <vector>

#include "mlw/errors.hpp"
#include "mlw/fft.hpp"
#include "mlw/model.hpp"
#include "mlw/series.hpp"

namespace mlw {

/// u_t = sum_{|j| <= J} C_j eps_{t-j} with eps_t ~ iid(0, I_p). Row k of C_j
/// is xi_plus_k j^(d0k - 1) for j > 0, xi_minus_k |j|^(d0k - 1) for j < 0 and
/// c0_row_k for j = 0 (an empty row means xi_plus_k).
struct BilateralSpec {
  MaTailSpec tails;
  std::size_t truncation = 5000;
  std::vector<double> c0_row_1;
  std::vector<double> c0_row_2;

  void validate() const {
    tails.validate();
    if (truncation < 1) throw InvalidInput("BilateralSpec: truncation must be >= 1");
    if (!c0_row_1.empty() && c0_row_1.size() != tails.p()) {
      throw InvalidInput("BilateralSpec: c0_row_1 has the wrong length");
    }
    if (!c0_row_2.empty() && c0_row_2.size() != tails.p()) {
      throw InvalidInput("BilateralSpec: c0_row_2 has the wrong length");
    }
  }

  const std::vector<double>& c0_row(int k) const {
    if (k == 1) return c0_row_1.empty() ? tails.xi_plus_1 : c0_row_1;
    return c0_row_2.empty() ? tails.xi_plus_2 : c0_row_2;
  }
};

using DgpSpec = std::variant<FarimaSpec, BilateralSpec>;

struct SystemSpec {
  DgpSpec dgp;
  double beta0 = 0.0;
  std::uint64_t seed = 0;
  std::array<double, 2> mean = {0.0, 0.0};  ///< added to u; for invariance checks only
};

/// Source of iid unit-variance innovations. Called once per scalar draw.
using InnovationSource = std::function<double()>;

/// Standard Gaussian innovations from a 64-bit Mersenne Twister.
class GaussianInnovations {
 public:
  explicit GaussianInnovations(std::uint64_t seed) : eng_(seed) {}
  double operator()() { return dist_(eng_); }

 private:
  std::mt19937_64 eng_;
  std::normal_distribution<double> dist_{0.0, 1.0};
};

/// MA(inf) weights of (1 - L)^{-delta} (1 - a L)^{-1}, truncated at lag J.
inline std::vector<double> farima_ma_coeffs(double delta, double ar, std::size_t J) {
  std::vector<double> c = frac_ma_coeffs(delta, J);
  for (std::size_t j = 1; j <= J; ++j) c[j] += ar * c[j - 1];
  return c;
}

/// Bilateral coefficient array d[i] = C_{i-J}(k, l), i = 0..2J.
inline std::vector<double> bilateral_coeffs(const BilateralSpec& s, int k, std::size_t l) {
  const std::size_t J = s.truncation;
  const auto& t = s.tails;
  const double d = k == 1 ? t.delta01 : t.delta02;
  const double xp = (k == 1 ? t.xi_plus_1 : t.xi_plus_2)[l];
  const double xm = (k == 1 ? t.xi_minus_1 : t.xi_minus_2)[l];
  std::vector<double> c(2 * J + 1);
  c[J] = s.c0_row(k)[l];
  for (std::size_t j = 1; j <= J; ++j) {
    const double p = std::pow(static_cast<double>(j), d - 1.0);
    c[J + j] = xp * p;
    c[J - j] = xm * p;
  }
  return c;
}

inline Series2 simulate_u(const FarimaSpec& spec, std::size_t n, InnovationSource draw) {
  spec.validate();
  if (n < 16) throw InvalidInput("simulate_u: need n >= 16");
  const std::size_t J = spec.truncation_for(n);
  const std::size_t burn = spec.burn_in_for(n);
  const std::size_t total = J + burn + n;
  const auto& f = spec.innov_cov_factor;
  std::vector<double> e1(total), e2(total);
  for (std::size_t s = 0; s < total; ++s) {
    const double a = draw();
    const double b = draw();
    e1[s] = f[0] * a + f[1] * b;
    e2[s] = f[2] * a + f[3] * b;
  }
  auto filter = [&](double delta, const std::vector<double>& e) {
    const auto c = farima_ma_coeffs(delta, spec.ar_coeff, J);
    fft::ValidConvolver conv(c, total);
    auto y = conv.apply(e);
    return std::vector<double>(y.end() - static_cast<std::ptrdiff_t>(n), y.end());
  };
  return {filter(spec.delta01, e1), filter(spec.delta02, e2)};
}

inline Series2 simulate_u(const BilateralSpec& spec, std::size_t n, InnovationSource draw) {
  spec.validate();
  if (n < 16) throw InvalidInput("simulate_u: need n >= 16");
  const std::size_t J = spec.truncation;
  const std::size_t p = spec.tails.p();
  const std::size_t total = n + 2 * J;
  std::vector<std::vector<double>> eps(p, std::vector<double>(total));
  for (std::size_t s = 0; s < total; ++s) {
    for (std::size_t l = 0; l < p; ++l) eps[l][s] = draw();
  }
  std::array<std::vector<double>, 2> u = {std::vector<double>(n, 0.0),
                                          std::vector<double>(n, 0.0)};
  for (int k = 1; k <= 2; ++k) {
    for (std::size_t l = 0; l < p; ++l) {
      const auto c = bilateral_coeffs(spec, k, l);
      fft::ValidConvolver conv(c, total);
      const auto y = conv.apply(eps[l]);
      for (std::size_t t = 0; t < n; ++t) u[k - 1][t] += y[t];
    }
  }
  return {std::move(u[0]), std::move(u[1])};
}

inline Series2 simulate_u(const DgpSpec& spec, std::size_t n, std::uint64_t seed) {
  GaussianInnovations g(seed);
  return std::visit([&](const auto& s) { return simulate_u(s, n, std::ref(g)); }, spec);
}

/// z = B0^{-1} u: x_t = u2_t, y_t = u1_t + beta0 x_t.
inline Series2 assemble_system(const Series2& u, double beta0) {
  if (!u.all_finite()) throw InvalidInput("assemble_system: non-finite input");
  Series2 z = u;
  for (std::size_t t = 0; t < z.size(); ++t) z.c1[t] = u.c1[t] + beta0 * u.c2[t];
  return z;
}

/// u = B0 z: u1_t = y_t - beta0 x_t, u2_t = x_t.
inline Series2 apply_b0(const Series2& z, double beta0) {
  Series2 u = z;
  for (std::size_t t = 0; t < u.size(); ++t) u.c1[t] = z.c1[t] - beta0 * z.c2[t];
  return u;
}

inline Series2 simulate_system(const SystemSpec& spec, std::size_t n) {
  Series2 u = simulate_u(spec.dgp, n, spec.seed);
  if (spec.mean[0] != 0.0 || spec.mean[1] != 0.0) u = u.shifted(spec.mean[0], spec.mean[1]);
  return assemble_system(u, spec.beta0);
}

}  // namespace mlw
