#pragma once

// Parameter types of the bivariate long-memory system and the algebra that
// links cross-covariance tails, moving-average tails and the phase at zero
// frequency.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mlw/errors.hpp"
#include "mlw/numeric.hpp"

namespace mlw {

/// theta = (beta, gamma, delta1, delta2).
struct ThetaVector {
  double beta = 0.0;    ///< cointegrating coefficient
  double gamma = 0.0;   ///< phase at frequency zero, radians
  double delta1 = 0.0;  ///< memory of the cointegrating error y - beta x
  double delta2 = 0.0;  ///< memory of the observables

  double nu() const { return delta2 - delta1; }
  double chi() const { return delta2 + delta1; }

  std::array<double, 4> as_array() const { return {beta, gamma, delta1, delta2}; }
  static ThetaVector from_array(const std::array<double, 4>& a) {
    return {a[0], a[1], a[2], a[3]};
  }
  double operator[](std::size_t k) const { return as_array()[k]; }

  friend bool operator==(const ThetaVector&, const ThetaVector&) = default;
};

inline constexpr std::array<const char*, 4> kThetaNames = {"beta", "gamma", "delta1", "delta2"};

/// alpha = (gamma, delta1, delta2).
struct AlphaVector {
  double gamma = 0.0;
  double delta1 = 0.0;
  double delta2 = 0.0;
};

/// The compact search region Theta = Theta_beta x Theta_gamma x Theta_delta:
///   Theta_gamma = [eta4 - pi/2, pi/2 - eta4]
///   Theta_delta = { -eta1 <= delta1 <= delta2 - eta2 <= 1/2 - eta2 - eta3 }
/// with 0 < eta1 < min(eta2, eta3), eta2 + eta3 < 1/2, 0 < eta4 < eta3 - eta1.
class ThetaSpace {
 public:
  ThetaSpace() : ThetaSpace(0.01, 0.02, 0.02, 0.005, -3.0, 3.0) {}

  ThetaSpace(double eta1, double eta2, double eta3, double eta4, double beta_lo, double beta_hi)
      : eta1_(eta1), eta2_(eta2), eta3_(eta3), eta4_(eta4), beta_lo_(beta_lo), beta_hi_(beta_hi) {
    if (!(eta1 > 0.0) || !(eta1 < std::min(eta2, eta3))) {
      throw InvalidInput("ThetaSpace: need 0 < eta1 < min(eta2, eta3)");
    }
    if (!(eta2 + eta3 < 0.5)) throw InvalidInput("ThetaSpace: need eta2 + eta3 < 1/2");
    if (!(eta4 > 0.0) || !(eta4 < eta3 - eta1)) {
      throw InvalidInput("ThetaSpace: need 0 < eta4 < eta3 - eta1");
    }
    if (!(beta_lo < beta_hi)) throw InvalidInput("ThetaSpace: need beta_lo < beta_hi");
  }

  double eta1() const { return eta1_; }
  double eta2() const { return eta2_; }
  double eta3() const { return eta3_; }
  double eta4() const { return eta4_; }
  double beta_lo() const { return beta_lo_; }
  double beta_hi() const { return beta_hi_; }
  double gamma_lo() const { return eta4_ - kPi / 2; }
  double gamma_hi() const { return kPi / 2 - eta4_; }
  double delta1_lo() const { return -eta1_; }
  double delta2_hi() const { return 0.5 - eta3_; }
  double min_gap() const { return eta2_; }

  bool contains(const ThetaVector& t, double tol = 0.0) const {
    return t.beta >= beta_lo_ - tol && t.beta <= beta_hi_ + tol && t.gamma >= gamma_lo() - tol &&
           t.gamma <= gamma_hi() + tol && t.delta1 >= delta1_lo() - tol &&
           t.delta2 - t.delta1 >= eta2_ - tol && t.delta2 <= delta2_hi() + tol;
  }

  void validate(const ThetaVector& t) const {
    if (!contains(t)) throw InvalidInput("theta lies outside the parameter space");
  }

  /// Euclidean projection onto Theta. beta and gamma are clamped; the delta
  /// pair is projected onto the triangle Theta_delta.
  ThetaVector project(const ThetaVector& t) const {
    ThetaVector p = t;
    p.beta = std::clamp(t.beta, beta_lo_, beta_hi_);
    p.gamma = std::clamp(t.gamma, gamma_lo(), gamma_hi());
    auto [d1, d2] = project_delta(t.delta1, t.delta2);
    p.delta1 = d1;
    p.delta2 = d2;
    return p;
  }

  std::pair<double, double> project_delta(double d1, double d2) const {
    const double lo = delta1_lo();
    const double hi = delta2_hi();
    // Points within rounding of the triangle are left alone, so that
    // projecting a projected point is a no-op.
    constexpr double tol = 1e-13;
    if (d1 >= lo - tol && d2 - d1 >= eta2_ - tol && d2 <= hi + tol) return {d1, d2};
    // Vertices of the triangle.
    const std::array<std::pair<double, double>, 3> v = {
        std::pair{lo, lo + eta2_}, std::pair{lo, hi}, std::pair{hi - eta2_, hi}};
    double best = INFINITY;
    std::pair<double, double> out = v[0];
    for (std::size_t e = 0; e < 3; ++e) {
      const auto [ax, ay] = v[e];
      const auto [bx, by] = v[(e + 1) % 3];
      const double dx = bx - ax, dy = by - ay;
      double s = ((d1 - ax) * dx + (d2 - ay) * dy) / (dx * dx + dy * dy);
      s = std::clamp(s, 0.0, 1.0);
      const double px = ax + s * dx, py = ay + s * dy;
      const double dist = (px - d1) * (px - d1) + (py - d2) * (py - d2);
      if (dist < best) {
        best = dist;
        out = {px, py};
      }
    }
    return out;
  }

 private:
  double eta1_, eta2_, eta3_, eta4_, beta_lo_, beta_hi_;
};

/// Symmetric 2x2 matrix Omega.
struct OmegaMatrix {
  double w11 = 0.0;
  double w12 = 0.0;
  double w22 = 0.0;

  double det() const { return w11 * w22 - w12 * w12; }
  double rho() const { return w12 / std::sqrt(w11 * w22); }
  bool positive_definite() const { return w11 > 0.0 && w22 > 0.0 && det() > 0.0; }
  OmegaMatrix scaled(double c) const { return {c * w11, c * w12, c * w22}; }

  void validate() const {
    if (!positive_definite()) throw InvalidInput("Omega is not positive definite");
  }
  /// Validation for the identified model, where additionally omega12 != 0.
  void validate_coherent() const {
    validate();
    if (w12 == 0.0) throw InvalidInput("Omega: omega12 = 0 leaves the phase unidentified");
  }
};

/// Power-law tail weights of the cross-covariance,
///   cov(u1_t, u2_{t+j}) ~ kappa_plus  * j^(chi0-1),  j -> +inf
///   cov(u1_t, u2_{t-j}) ~ kappa_minus * j^(chi0-1),  j -> +inf
/// so kappa_plus describes u1 leading u2. With this orientation the phase
/// returned by gamma_from_kappas is the one estimated from the periodogram.
struct PhaseKappa {
  double kappa_plus = 0.0;
  double kappa_minus = 0.0;
  double chi0 = 0.0;  ///< delta01 + delta02

  void validate() const {
    if (kappa_plus == 0.0 && kappa_minus == 0.0) {
      throw InvalidInput("PhaseKappa: tail weights are both zero");
    }
    if (!(chi0 > 0.0 && chi0 < 1.0)) throw InvalidInput("PhaseKappa: chi0 must lie in (0, 1)");
  }
};

/// Tail weights of the rows of the MA coefficients C_j:
///   row k of C_j ~ xi_plus_k  * j^(delta0k - 1),   j -> +inf
///   row k of C_j ~ xi_minus_k * |j|^(delta0k - 1), j -> -inf
/// where u_t = sum_j C_j eps_{t-j}; positive j act on past innovations.
struct MaTailSpec {
  std::vector<double> xi_plus_1, xi_minus_1, xi_plus_2, xi_minus_2;
  double delta01 = 0.0;
  double delta02 = 0.0;

  std::size_t p() const { return xi_plus_1.size(); }

  void validate() const {
    const std::size_t n = xi_plus_1.size();
    if (n < 2) throw InvalidInput("MaTailSpec: innovation dimension p must be >= 2");
    if (xi_minus_1.size() != n || xi_plus_2.size() != n || xi_minus_2.size() != n) {
      throw InvalidInput("MaTailSpec: tail vectors must share one length");
    }
    if (!(delta01 > 0.0) || !(delta02 > 0.0)) {
      throw InvalidInput("MaTailSpec: memories must be strictly positive");
    }
    if (!(delta01 + delta02 < 1.0)) throw InvalidInput("MaTailSpec: need delta01 + delta02 < 1");
  }
};

/// One-sided fractional ARMA(1, d, 0) recipe
///   diag{(1-L)^delta01, (1-L)^delta02} (1 - ar_coeff L) u_t = F eps_t,
/// with F = innov_cov_factor and R = F F'.
struct FarimaSpec {
  double delta01 = 0.0;
  double delta02 = 0.0;
  double ar_coeff = 0.0;
  std::array<double, 4> innov_cov_factor = {1.0, 0.0, 0.0, 1.0};  ///< row-major F
  std::size_t truncation = 0;  ///< MA lags kept; 0 selects n + 10000
  std::size_t burn_in = 0;     ///< leading outputs discarded; 0 selects the truncation
  bool burn_in_set = false;    ///< true: use burn_in literally, even 0

  std::array<double, 4> innovation_covariance() const {
    const auto& f = innov_cov_factor;
    return {f[0] * f[0] + f[1] * f[1], f[0] * f[2] + f[1] * f[3], f[0] * f[2] + f[1] * f[3],
            f[2] * f[2] + f[3] * f[3]};
  }

  std::size_t truncation_for(std::size_t n) const { return truncation ? truncation : n + 10000; }
  std::size_t burn_in_for(std::size_t n) const {
    return burn_in_set ? burn_in : (burn_in ? burn_in : truncation_for(n));
  }

  void validate() const {
    for (double d : {delta01, delta02}) {
      if (!(d >= 0.0 && d < 0.5)) throw InvalidInput("FarimaSpec: memories must lie in [0, 1/2)");
    }
    if (!(std::abs(ar_coeff) < 1.0)) throw InvalidInput("FarimaSpec: need |ar_coeff| < 1");
    const auto r = innovation_covariance();
    if (!(r[0] > 0.0 && r[0] * r[3] - r[1] * r[2] > 0.0)) {
      throw InvalidInput("FarimaSpec: innovation covariance is not positive definite");
    }
  }

  /// The simulation design with R = [[1, 2 rho], [2 rho, 4]] and AR
  /// coefficient 0.5; F is the lower Cholesky factor of R.
  static FarimaSpec design(double delta01, double delta02, double rho, double ar = 0.5) {
    if (!(std::abs(rho) < 1.0)) throw InvalidInput("FarimaSpec: need |rho| < 1");
    FarimaSpec s;
    s.delta01 = delta01;
    s.delta02 = delta02;
    s.ar_coeff = ar;
    s.innov_cov_factor = {1.0, 0.0, 2.0 * rho, 2.0 * std::sqrt(1.0 - rho * rho)};
    return s;
  }
};

// ---------------------------------------------------------------------------
// Operations

/// Diagonal entry of Phi(lambda; alpha) = diag{|l|^d1, |l|^d2 e^{-i sign(l) gamma}}.
inline std::complex<double> phi_entry(double lambda, const AlphaVector& alpha, int row) {
  if (lambda == 0.0) throw DomainError("phi_entry: lambda = 0");
  const double a = std::abs(lambda);
  if (row == 1) return {std::pow(a, alpha.delta1), 0.0};
  if (row == 2) {
    const double s = lambda > 0.0 ? 1.0 : -1.0;
    return std::pow(a, alpha.delta2) * std::polar(1.0, -s * alpha.gamma);
  }
  throw InvalidInput("phi_entry: row must be 1 or 2");
}

struct PhaseParams {
  double gamma0 = 0.0;
  double omega12 = 0.0;
};

/// Phase and cross-spectral constant implied by cross-covariance tail weights:
///   gamma0  = arctan{ (k+ - k-)/(k+ + k-) tan(pi chi0 / 2) }
///   omega12 = (k+ + k-) Gamma(chi0) cos(pi chi0 / 2) / (2 pi cos gamma0)
/// When k+ + k- = 0 the arctan argument is infinite and gamma0 = +-pi/2 is
/// taken as the limit; omega12 then comes from the imaginary part,
/// (k+ - k-) Gamma(chi0) sin(pi chi0 / 2) / (2 pi sin gamma0).
inline PhaseParams gamma_from_kappas(const PhaseKappa& pk) {
  pk.validate();
  const double h = 0.5 * kPi * pk.chi0;
  const double sum = pk.kappa_plus + pk.kappa_minus;
  const double diff = pk.kappa_plus - pk.kappa_minus;
  const double g = gamma_fn(pk.chi0);
  PhaseParams out;
  if (sum == 0.0) {
    out.gamma0 = (diff > 0.0 ? 1.0 : -1.0) * (std::tan(h) > 0.0 ? 1.0 : -1.0) * kPi / 2;
    out.omega12 = diff * g * std::sin(h) / (kTwoPi * std::sin(out.gamma0));
    return out;
  }
  out.gamma0 = std::atan(diff / sum * std::tan(h));
  out.omega12 = sum * g * std::cos(h) / (kTwoPi * std::cos(out.gamma0));
  return out;
}

/// Exact inverse of gamma_from_kappas on gamma0 in (-pi/2, pi/2):
///   k(+-) = 2 pi omega12 sin(pi chi0 / 2 +- gamma0) / (Gamma(chi0) sin(pi chi0)).
inline PhaseKappa kappas_from_phase(double omega12, double chi0, double gamma0) {
  if (!(chi0 > 0.0 && chi0 < 1.0)) throw DomainError("kappas_from_phase: chi0 must lie in (0, 1)");
  if (!(std::abs(gamma0) < kPi / 2)) {
    throw DomainError("kappas_from_phase: gamma0 must lie in (-pi/2, pi/2)");
  }
  const double h = 0.5 * kPi * chi0;
  const double scale = kTwoPi * omega12 / (gamma_fn(chi0) * std::sin(kPi * chi0));
  return {scale * std::sin(h + gamma0), scale * std::sin(h - gamma0), chi0};
}

namespace detail {
inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}
}  // namespace detail

/// Cross-covariance tail weights generated by a (possibly bilateral) MA with
/// power-law coefficient tails. With chi0 = delta01 + delta02,
///   k+ = x+1'x+2 B(1-chi0, d01) + x-1'x+2 B(d02, d01) + x-1'x-2 B(1-chi0, d02)
///   k- = x+1'x+2 B(1-chi0, d02) + x+1'x-2 B(d01, d02) + x-1'x-2 B(1-chi0, d01)
/// (kappa_plus weights u1 leading u2, see PhaseKappa).
inline PhaseKappa kappas_from_ma_tails(const MaTailSpec& s) {
  s.validate();
  const double d1 = s.delta01, d2 = s.delta02, chi = d1 + d2;
  const double pp = detail::dot(s.xi_plus_1, s.xi_plus_2);
  const double pm = detail::dot(s.xi_plus_1, s.xi_minus_2);
  const double mp = detail::dot(s.xi_minus_1, s.xi_plus_2);
  const double mm = detail::dot(s.xi_minus_1, s.xi_minus_2);
  PhaseKappa k;
  k.chi0 = chi;
  k.kappa_plus = pp * beta_fn(1.0 - chi, d1) + mp * beta_fn(d2, d1) + mm * beta_fn(1.0 - chi, d2);
  k.kappa_minus = pp * beta_fn(1.0 - chi, d2) + pm * beta_fn(d1, d2) + mm * beta_fn(1.0 - chi, d1);
  return k;
}

struct ImpliedParams {
  double gamma0 = 0.0;
  OmegaMatrix omega0;  ///< spectral-density units: f_u ~ Phi^{-1} Omega0 Phi^{-1}*
};

/// gamma0 = (delta02 - delta01) pi / 2 and Omega0 = R / (2 pi a(1)^2) for
/// the fractional ARMA recipe, a(L) = 1 - ar_coeff L.
inline ImpliedParams implied_farima_params(const FarimaSpec& spec) {
  spec.validate();
  const double a1 = 1.0 - spec.ar_coeff;
  if (a1 == 0.0) throw InvalidInput("implied_farima_params: unit root in the AR polynomial");
  const auto r = spec.innovation_covariance();
  const double c = 1.0 / (kTwoPi * a1 * a1);
  return {(spec.delta02 - spec.delta01) * kPi / 2, {c * r[0], c * r[1], c * r[3]}};
}

/// Coefficients of (1 - L)^{-delta}: c_0 = 1, c_j = c_{j-1} (j - 1 + delta) / j.
inline std::vector<double> frac_ma_coeffs(double delta, std::size_t count) {
  if (!(delta > -0.5 && delta < 0.5)) throw DomainError("frac_ma_coeffs: need |delta| < 1/2");
  std::vector<double> c(count + 1);
  c[0] = 1.0;
  for (std::size_t j = 1; j <= count; ++j) {
    c[j] = c[j - 1] * (static_cast<double>(j) - 1.0 + delta) / static_cast<double>(j);
  }
  return c;
}

}  // namespace mlw
