#pragma once

// Multiple local Whittle objective
//   R(theta) = log det Omega_hat(theta) - 2 (delta1 + delta2) mean_j log|psi(lambda_j)|,
//   Omega_hat(theta) = Re mean_j Psi_j B I_j B' conj(Psi_j),
//   Psi_j = diag{psi_j^delta1, psi_j^delta2 e^{-i gamma}}, B = [[1, -beta], [0, 1]],
// with analytic score and Hessian, closed-form beta profiling and a
// grid + projected Newton minimizer over Theta.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mlw/errors.hpp"
#include "mlw/model.hpp"
#include "mlw/series.hpp"
#include "mlw/sigma.hpp"
#include "mlw/spectra.hpp"

namespace mlw {

/// ABS: psi(l) = |l|. NU: psi(l) = (1 - e^{il}) e^{i sign(l) pi/2}, so that
/// psi(l) = 2 sin(l/2) e^{il/2} for l > 0.
enum class PsiKind { Abs, Nu };

inline const char* to_string(PsiKind k) { return k == PsiKind::Abs ? "abs" : "nu"; }

inline cplx psi_value(PsiKind kind, double lambda) {
  if (kind == PsiKind::Abs) return {std::abs(lambda), 0.0};
  const double s = lambda > 0.0 ? 1.0 : (lambda < 0.0 ? -1.0 : 0.0);
  return (1.0 - std::polar(1.0, lambda)) * std::polar(1.0, s * kPi / 2);
}

/// Periodogram plus the per-frequency psi quantities the objective needs.
class ObjectiveContext {
 public:
  ObjectiveContext(PeriodogramSet pset, PsiKind psi) : pset_(std::move(pset)), psi_(psi) {
    const std::size_t m = pset_.m();
    if (m == 0 || pset_.I.size() != m) throw InvalidInput("ObjectiveContext: empty periodogram");
    logabs_.resize(m);
    arg_.resize(m);
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double lam = pset_.grid.lambdas[j];
      if (!(lam > 0.0)) throw DomainError("ObjectiveContext: non-positive frequency");
      const cplx p = psi_value(psi_, lam);
      logabs_[j] = std::log(std::abs(p));
      arg_[j] = std::arg(p);
      if (!std::isfinite(logabs_[j])) throw DomainError("ObjectiveContext: log|psi| not finite");
      s += logabs_[j];
    }
    lbar_ = s / double(m);
  }

  const PeriodogramSet& pset() const { return pset_; }
  PsiKind psi() const { return psi_; }
  std::size_t m() const { return pset_.m(); }
  double log_abs_psi(std::size_t j) const { return logabs_[j]; }
  double arg_psi(std::size_t j) const { return arg_[j]; }
  double mean_log_psi() const { return lbar_; }

 private:
  PeriodogramSet pset_;
  PsiKind psi_;
  std::vector<double> logabs_, arg_;
  double lbar_ = 0.0;
};

// ---------------------------------------------------------------------------
// Objective, score, Hessian

namespace detail {

struct Sym2 {
  double a11 = 0.0, a12 = 0.0, a22 = 0.0;
};

inline double det(const Sym2& s) { return s.a11 * s.a22 - s.a12 * s.a12; }

// tr(W^{-1} X) for symmetric 2x2 W, X.
inline double tr_inv(const Sym2& w, double dw, const Sym2& x) {
  return (w.a22 * x.a11 - 2.0 * w.a12 * x.a12 + w.a11 * x.a22) / dw;
}

// tr(W^{-1} X W^{-1} Y).
inline double tr_inv2(const Sym2& w, double dw, const Sym2& x, const Sym2& y) {
  // W^{-1} = [[w22, -w12], [-w12, w11]] / det
  const double i11 = w.a22 / dw, i12 = -w.a12 / dw, i22 = w.a11 / dw;
  const double p11 = i11 * x.a11 + i12 * x.a12, p12 = i11 * x.a12 + i12 * x.a22;
  const double p21 = i12 * x.a11 + i22 * x.a12, p22 = i12 * x.a12 + i22 * x.a22;
  const double q11 = i11 * y.a11 + i12 * y.a12, q12 = i11 * y.a12 + i12 * y.a22;
  const double q21 = i12 * y.a11 + i22 * y.a12, q22 = i12 * y.a12 + i22 * y.a22;
  return p11 * q11 + p12 * q21 + p21 * q12 + p22 * q22;
}

enum Need { kValue = 0, kGrad = 1, kHess = 2 };

struct Derivs {
  Sym2 w;
  std::array<Sym2, 4> d1{};
  std::array<std::array<Sym2, 4>, 4> d2{};
};

// Omega_hat and its first/second partial derivatives. Per frequency, with
// L = log|psi|, phi = arg psi:
//   A11 = e^{2 d1 L} M11,  M11 = I11 - 2 beta Re I12 + beta^2 I22
//   A22 = e^{2 d2 L} I22
//   A12 = e^{(d1+d2) L + i((d1-d2) phi + gamma)} M12,  M12 = I12 - beta I22
// and each entry is differentiated through its exponent and its M factor.
inline Derivs omega_derivs(const ObjectiveContext& ctx, const ThetaVector& th, int need) {
  const auto& ps = ctx.pset();
  const std::size_t m = ctx.m();
  const double b = th.beta, g = th.gamma, d1 = th.delta1, d2 = th.delta2;
  Derivs D;
  std::array<cplx, 4> s12_1{};
  std::array<std::array<cplx, 4>, 4> s12_2{};
  std::array<double, 4> s11_1{}, s22_1{};
  std::array<std::array<double, 4>, 4> s11_2{}, s22_2{};
  double s11 = 0.0, s22 = 0.0;
  cplx s12 = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    const auto& I = ps.I[j];
    const double L = ctx.log_abs_psi(j), ph = ctx.arg_psi(j);
    const double e1 = std::exp(2.0 * d1 * L), e2 = std::exp(2.0 * d2 * L);
    const cplx e12 = std::polar(std::exp((d1 + d2) * L), (d1 - d2) * ph + g);
    const double M11 = I.i11 - 2.0 * b * I.i12.real() + b * b * I.i22;
    const cplx M12 = I.i12 - b * I.i22;
    const double A11 = e1 * M11, A22 = e2 * I.i22;
    const cplx A12 = e12 * M12;
    s11 += A11;
    s22 += A22;
    s12 += A12;
    if (need < kGrad) continue;
    // exponent derivatives (y: A11, z: A22, x: A12) and M-factor derivatives
    const std::array<double, 4> y = {0.0, 0.0, 2.0 * L, 0.0};
    const std::array<double, 4> zz = {0.0, 0.0, 0.0, 2.0 * L};
    const std::array<cplx, 4> x = {0.0, cplx(0.0, 1.0), cplx(L, ph), cplx(L, -ph)};
    const double n1 = -2.0 * I.i12.real() + 2.0 * b * I.i22;  // dM11/dbeta
    const cplx m1 = -I.i22;                                    // dM12/dbeta
    for (int k = 0; k < 4; ++k) {
      const double nk = k == 0 ? n1 : 0.0;
      const cplx mk = k == 0 ? m1 : 0.0;
      s11_1[k] += e1 * (y[k] * M11 + nk);
      s22_1[k] += zz[k] * A22;
      s12_1[k] += e12 * (x[k] * M12 + mk);
      if (need < kHess) continue;
      for (int l = 0; l <= k; ++l) {
        const double nl = l == 0 ? n1 : 0.0;
        const cplx ml = l == 0 ? m1 : 0.0;
        const double nkl = (k == 0 && l == 0) ? 2.0 * I.i22 : 0.0;
        s11_2[k][l] += e1 * (y[k] * y[l] * M11 + y[k] * nl + y[l] * nk + nkl);
        s22_2[k][l] += zz[k] * zz[l] * A22;
        s12_2[k][l] += e12 * (x[k] * x[l] * M12 + x[k] * ml + x[l] * mk);
      }
    }
  }
  const double inv = 1.0 / double(m);
  D.w = {s11 * inv, s12.real() * inv, s22 * inv};
  if (need >= kGrad) {
    for (int k = 0; k < 4; ++k) D.d1[k] = {s11_1[k] * inv, s12_1[k].real() * inv, s22_1[k] * inv};
  }
  if (need >= kHess) {
    for (int k = 0; k < 4; ++k) {
      for (int l = 0; l <= k; ++l) {
        D.d2[k][l] = {s11_2[k][l] * inv, s12_2[k][l].real() * inv, s22_2[k][l] * inv};
        D.d2[l][k] = D.d2[k][l];
      }
    }
  }
  return D;
}

}  // namespace detail

inline OmegaMatrix omega_hat(const ObjectiveContext& ctx, const ThetaVector& th) {
  const auto D = detail::omega_derivs(ctx, th, detail::kValue);
  return {D.w.a11, D.w.a12, D.w.a22};
}

/// R(theta); +infinity where det Omega_hat(theta) <= 0.
inline double objective_R(const ObjectiveContext& ctx, const ThetaVector& th) {
  const auto w = omega_hat(ctx, th);
  const double d = w.det();
  if (!(d > 0.0) || !std::isfinite(d)) return std::numeric_limits<double>::infinity();
  return std::log(d) - 2.0 * (th.delta1 + th.delta2) * ctx.mean_log_psi();
}

inline Vec4 score(const ObjectiveContext& ctx, const ThetaVector& th) {
  const auto D = detail::omega_derivs(ctx, th, detail::kGrad);
  const double dw = detail::det(D.w);
  if (!(dw > 0.0)) throw NumericalFailure("score: Omega_hat is singular");
  Vec4 g;
  for (int k = 0; k < 4; ++k) g(k) = detail::tr_inv(D.w, dw, D.d1[k]);
  g(2) -= 2.0 * ctx.mean_log_psi();
  g(3) -= 2.0 * ctx.mean_log_psi();
  return g;
}

inline Mat4 hessian(const ObjectiveContext& ctx, const ThetaVector& th) {
  const auto D = detail::omega_derivs(ctx, th, detail::kHess);
  const double dw = detail::det(D.w);
  if (!(dw > 0.0)) throw NumericalFailure("hessian: Omega_hat is singular");
  Mat4 H;
  for (int k = 0; k < 4; ++k) {
    for (int l = 0; l <= k; ++l) {
      H(k, l) = detail::tr_inv(D.w, dw, D.d2[k][l]) - detail::tr_inv2(D.w, dw, D.d1[k], D.d1[l]);
      H(l, k) = H(k, l);
    }
  }
  return H;
}

// ---------------------------------------------------------------------------
// beta profile

/// Weighted periodogram sums that fix Omega_hat as a function of (beta, gamma)
/// for given (delta1, delta2):
///   Omega11 = a11 - 2 beta b11 + beta^2 c11
///   Omega12 = Re(e^{i gamma} (P - beta Q))
///   Omega22 = d22
struct DeltaSums {
  double a11 = 0.0, b11 = 0.0, c11 = 0.0, d22 = 0.0;
  cplx P = 0.0, Q = 0.0;
};

inline DeltaSums delta_sums(const ObjectiveContext& ctx, double d1, double d2) {
  DeltaSums s;
  const auto& ps = ctx.pset();
  const std::size_t m = ctx.m();
  for (std::size_t j = 0; j < m; ++j) {
    const auto& I = ps.I[j];
    const double L = ctx.log_abs_psi(j), ph = ctx.arg_psi(j);
    const double e1 = std::exp(2.0 * d1 * L), e2 = std::exp(2.0 * d2 * L);
    const cplx w12 = std::polar(std::exp((d1 + d2) * L), (d1 - d2) * ph);
    s.a11 += e1 * I.i11;
    s.b11 += e1 * I.i12.real();
    s.c11 += e1 * I.i22;
    s.d22 += e2 * I.i22;
    s.P += w12 * I.i12;
    s.Q += w12 * I.i22;
  }
  const double inv = 1.0 / double(m);
  s.a11 *= inv;
  s.b11 *= inv;
  s.c11 *= inv;
  s.d22 *= inv;
  s.P *= inv;
  s.Q *= inv;
  return s;
}

struct BetaProfile {
  double beta_star = 0.0;
  double c0 = 0.0, c1 = 0.0, c2 = 0.0;  ///< det Omega_hat = c0 + c1 beta + c2 beta^2
  bool fallback = false;                ///< c2 <= 0: golden-section search was used
};

namespace detail {

inline double golden_section(auto&& f, double lo, double hi, double tol = 1e-10) {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double x1 = b - r * (b - a), x2 = a + r * (b - a);
  double f1 = f(x1), f2 = f(x2);
  while (b - a > tol) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - r * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + r * (b - a);
      f2 = f(x2);
    }
  }
  return 0.5 * (a + b);
}

inline BetaProfile profile_from_sums(const DeltaSums& s, double gamma, double beta_lo,
                                     double beta_hi) {
  const cplx rot = std::polar(1.0, gamma);
  const double n0 = (rot * s.P).real();
  const double n1 = -(rot * s.Q).real();
  BetaProfile p;
  p.c0 = s.a11 * s.d22 - n0 * n0;
  p.c1 = -2.0 * s.b11 * s.d22 - 2.0 * n0 * n1;
  p.c2 = s.c11 * s.d22 - n1 * n1;
  if (p.c2 > 0.0) {
    p.beta_star = std::clamp(-p.c1 / (2.0 * p.c2), beta_lo, beta_hi);
  } else {
    p.fallback = true;
    auto detf = [&](double b) { return p.c0 + p.c1 * b + p.c2 * b * b; };
    p.beta_star = golden_section(detf, beta_lo, beta_hi);
  }
  return p;
}

}  // namespace detail

/// Closed-form minimiser of R over beta in [beta_lo, beta_hi] for fixed alpha.
inline BetaProfile profile_beta(const ObjectiveContext& ctx, const AlphaVector& a,
                                const ThetaSpace& space = {}) {
  const auto s = delta_sums(ctx, a.delta1, a.delta2);
  auto p = detail::profile_from_sums(s, a.gamma, space.beta_lo(), space.beta_hi());
  if (p.fallback) {
    auto f = [&](double b) { return objective_R(ctx, {b, a.gamma, a.delta1, a.delta2}); };
    p.beta_star = detail::golden_section(f, space.beta_lo(), space.beta_hi());
  }
  return p;
}

// ---------------------------------------------------------------------------
// Estimation

enum class NewtonHessian { Analytic, Surrogate };

struct EstimateOptions {
  int gamma_points = 25;
  double delta_step = 0.025;
  int max_iter = 100;
  double step_tol = 1e-8;
  NewtonHessian hessian = NewtonHessian::Analytic;
  /// Extra starting point (e.g. from the closed-form baselines); Newton is run
  /// from it as well and the lower objective wins.
  std::optional<ThetaVector> start;
  /// When set, beta is held at this value and only alpha is estimated.
  std::optional<double> fixed_beta;
};

struct EstimationResult {
  ThetaVector theta_hat;
  OmegaMatrix omega_hat;
  double R_min = 0.0;
  bool converged = false;
  int iterations = 0;
  std::array<bool, 4> boundary_hit{};
  ThetaVector grid_stage_argmin;
  bool degenerate = false;       ///< exactly collinear data; see estimate()
  bool beta_fixed = false;
  bool profile_fallback = false; ///< some grid point needed the golden-section profile
  std::size_t n = 0;
  std::size_t m = 0;
  PsiKind psi = PsiKind::Abs;
  ThetaSpace space;
};

struct GridPoint {
  ThetaVector theta;
  double R = 0.0;
};

/// The stage-one grid: gamma over `gamma_points` equispaced points in
/// Theta_gamma, delta1 = -eta1 + k step, delta2 = delta1 + eta2 + l step <= 1/2 - eta3.
inline std::vector<AlphaVector> alpha_grid(const ThetaSpace& sp, const EstimateOptions& o = {}) {
  std::vector<AlphaVector> out;
  const int ng = std::max(1, o.gamma_points);
  const double tiny = 1e-12;
  for (int k = 0;; ++k) {
    const double d1 = sp.delta1_lo() + k * o.delta_step;
    if (d1 + sp.min_gap() > sp.delta2_hi() + tiny) break;
    for (int l = 0;; ++l) {
      const double d2 = d1 + sp.min_gap() + l * o.delta_step;
      if (d2 > sp.delta2_hi() + tiny) break;
      for (int i = 0; i < ng; ++i) {
        const double g = ng == 1 ? 0.5 * (sp.gamma_lo() + sp.gamma_hi())
                                 : sp.gamma_lo() + (sp.gamma_hi() - sp.gamma_lo()) * i / (ng - 1);
        out.push_back({g, d1, std::min(d2, sp.delta2_hi())});
      }
    }
  }
  return out;
}

/// Profiled objective over the stage-one grid (beta* per alpha).
inline std::vector<GridPoint> objective_surface(const ObjectiveContext& ctx, const ThetaSpace& sp,
                                                const EstimateOptions& o = {},
                                                bool* any_fallback = nullptr) {
  const auto grid = alpha_grid(sp, o);
  std::vector<GridPoint> out;
  out.reserve(grid.size());
  double cd1 = NAN, cd2 = NAN;
  DeltaSums sums;
  for (const auto& a : grid) {
    if (a.delta1 != cd1 || a.delta2 != cd2) {
      sums = delta_sums(ctx, a.delta1, a.delta2);
      cd1 = a.delta1;
      cd2 = a.delta2;
    }
    double b;
    if (o.fixed_beta) {
      b = *o.fixed_beta;
    } else {
      auto p = detail::profile_from_sums(sums, a.gamma, sp.beta_lo(), sp.beta_hi());
      if (p.fallback) {
        if (any_fallback) *any_fallback = true;
        p = profile_beta(ctx, a, sp);
      }
      b = p.beta_star;
    }
    const ThetaVector th{b, a.gamma, a.delta1, a.delta2};
    out.push_back({th, objective_R(ctx, th)});
  }
  return out;
}

namespace detail {

// Smallest R, ties broken lexicographically on (gamma, delta1, delta2).
inline bool grid_less(const GridPoint& a, const GridPoint& b) {
  if (a.R != b.R) return a.R < b.R;
  if (a.theta.gamma != b.theta.gamma) return a.theta.gamma < b.theta.gamma;
  if (a.theta.delta1 != b.theta.delta1) return a.theta.delta1 < b.theta.delta1;
  return a.theta.delta2 < b.theta.delta2;
}

// Linear constraints a' theta <= b describing Theta.
struct Constraint {
  Vec4 a;
  double b;
};

inline std::vector<Constraint> constraints(const ThetaSpace& sp, bool beta_fixed) {
  std::vector<Constraint> c;
  if (!beta_fixed) {
    c.push_back({Vec4(1, 0, 0, 0), sp.beta_hi()});
    c.push_back({Vec4(-1, 0, 0, 0), -sp.beta_lo()});
  }
  c.push_back({Vec4(0, 1, 0, 0), sp.gamma_hi()});
  c.push_back({Vec4(0, -1, 0, 0), -sp.gamma_lo()});
  c.push_back({Vec4(0, 0, -1, 0), -sp.delta1_lo()});
  c.push_back({Vec4(0, 0, 1, -1), -sp.min_gap()});
  c.push_back({Vec4(0, 0, 0, 1), sp.delta2_hi()});
  return c;
}

inline Vec4 to_vec(const ThetaVector& t) { return Vec4(t.beta, t.gamma, t.delta1, t.delta2); }
inline ThetaVector to_theta(const Vec4& v) { return {v(0), v(1), v(2), v(3)}; }

// Symmetric matrix with eigenvalues replaced by max(|ev|, floor).
inline Mat4 make_pd(const Mat4& H) {
  Eigen::SelfAdjointEigenSolver<Mat4> es(H);
  Vec4 ev = es.eigenvalues();
  const double scale = std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
  bool ok = true;
  for (int i = 0; i < 4; ++i) ok = ok && ev(i) > 1e-10 * scale;
  if (ok) return H;
  for (int i = 0; i < 4; ++i) ev(i) = std::max(std::abs(ev(i)), 1e-8 * scale);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

// Newton direction for the quadratic model restricted to the active face:
// minimise g'd + d'Hd/2 subject to N'd = 0 via the KKT system.
inline Vec4 constrained_newton_dir(const Mat4& H, const Vec4& g, const std::vector<Vec4>& act) {
  const int q = static_cast<int>(act.size());
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(4 + q, 4 + q);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(4 + q);
  K.topLeftCorner(4, 4) = H;
  for (int i = 0; i < q; ++i) {
    K.block(0, 4 + i, 4, 1) = act[i];
    K.block(4 + i, 0, 1, 4) = act[i].transpose();
  }
  rhs.head(4) = -g;
  Eigen::VectorXd sol = K.colPivHouseholderQr().solve(rhs);
  return sol.head(4);
}

inline Mat4 surrogate_hessian(const ObjectiveContext& ctx, const ThetaVector& th,
                              const OmegaMatrix& om) {
  const double nu = std::clamp(th.nu(), 0.0, 0.499);
  const auto S = sigma_matrix(th.gamma, nu, om);
  const Vec4 d = scaling_delta(ctx.pset().grid.lambda_m(), th.nu());
  return d.asDiagonal() * S.S * d.asDiagonal();
}

struct NewtonOutcome {
  ThetaVector theta;
  double R;
  int iterations = 0;
  bool converged = false;
};

inline NewtonOutcome newton(const ObjectiveContext& ctx, const ThetaSpace& sp, ThetaVector th,
                            const EstimateOptions& o) {
  const bool fixb = o.fixed_beta.has_value();
  if (fixb) th.beta = *o.fixed_beta;
  th = sp.project(th);
  if (fixb) th.beta = *o.fixed_beta;
  double R = objective_R(ctx, th);
  NewtonOutcome out{th, R};
  if (!std::isfinite(R)) return out;
  const auto cons = constraints(sp, fixb);
  const OmegaMatrix om1 = omega_hat(ctx, th);

  auto project = [&](const Vec4& v) {
    ThetaVector t = sp.project(to_theta(v));
    if (fixb) t.beta = *o.fixed_beta;
    return t;
  };

  int polish = 0;
  for (int it = 1; it <= o.max_iter; ++it) {
    out.iterations = it;
    Vec4 g = score(ctx, th);
    Mat4 H = o.hessian == NewtonHessian::Analytic ? hessian(ctx, th)
                                                  : surrogate_hessian(ctx, th, om1);
    if (fixb) {
      g(0) = 0.0;
      H.row(0).setZero();
      H.col(0).setZero();
      H(0, 0) = 1.0;
    }
    H = make_pd(H);
    const Vec4 x = to_vec(th);
    // Active constraints whose outward normal is a descent direction.
    std::vector<Vec4> act;
    for (const auto& c : cons) {
      const double slack = c.b - c.a.dot(x);
      if (slack <= 1e-10 * (1.0 + std::abs(c.b)) && c.a.dot(-g) > 0.0) act.push_back(c.a);
    }
    Vec4 d = constrained_newton_dir(H, g, act);
    if (!d.allFinite()) d = -g;

    bool moved = false;
    ThetaVector cand = th;
    double Rc = R;
    if (out.converged) {
      // Polishing: objective changes are below its rounding here, so take the
      // full step without a decrease test.
      cand = project(x + d);
      Rc = objective_R(ctx, cand);
      if (!std::isfinite(Rc) || Rc > R + 1e-12 * (1.0 + std::abs(R))) break;
      th = cand;
      R = Rc;
      if (++polish > 3) break;
      continue;
    }
    for (double t = 1.0; t > 1e-12; t *= 0.5) {
      cand = project(x + t * d);
      Rc = objective_R(ctx, cand);
      if (Rc < R) {
        moved = true;
        break;
      }
    }
    if (!moved) {
      // Projected gradient with backtracking.
      const double gn = g.norm();
      if (gn > 0.0) {
        for (double t = 1.0 / gn; t > 1e-14; t *= 0.5) {
          cand = project(x - t * g);
          Rc = objective_R(ctx, cand);
          if (Rc < R) {
            moved = true;
            break;
          }
        }
      }
    }
    if (!moved) {
      // No representable decrease: stationary to working precision.
      out.converged = true;
      break;
    }
    const double step = (to_vec(cand) - x).norm();
    th = cand;
    R = Rc;
    // After the step test a few polishing steps take the iterate to working
    // precision, so inputs equal up to rounding give estimates equal up to rounding.
    if (step <= o.step_tol) out.converged = true;
  }
  out.theta = th;
  out.R = R;
  return out;
}

inline std::array<bool, 4> boundary_flags(const ThetaSpace& sp, const ThetaVector& t,
                                          bool beta_fixed, double tol = 1e-6) {
  std::array<bool, 4> b{};
  b[0] = !beta_fixed && (t.beta <= sp.beta_lo() + tol || t.beta >= sp.beta_hi() - tol);
  b[1] = t.gamma <= sp.gamma_lo() + tol || t.gamma >= sp.gamma_hi() - tol;
  const bool gap = t.delta2 - t.delta1 <= sp.min_gap() + tol;
  b[2] = t.delta1 <= sp.delta1_lo() + tol || gap;
  b[3] = t.delta2 >= sp.delta2_hi() - tol || gap;
  return b;
}

// 1 - |sum I12|^2 / (sum I11 sum I22): zero exactly when the DFT vectors of y
// and x are proportional over the band, i.e. y is a multiple of x there.
inline double band_incoherence(const PeriodogramSet& ps) {
  double s11 = 0.0, s22 = 0.0;
  cplx s12 = 0.0;
  for (const auto& I : ps.I) {
    s11 += I.i11;
    s22 += I.i22;
    s12 += I.i12;
  }
  return 1.0 - std::norm(s12) / (s11 * s22);
}

inline void check_degenerate_columns(const Series2& z, const PeriodogramSet& ps) {
  double e1 = 0.0, e2 = 0.0, p1 = 0.0, p2 = 0.0;
  for (std::size_t t = 0; t < z.size(); ++t) {
    e1 += z.c1[t] * z.c1[t];
    e2 += z.c2[t] * z.c2[t];
  }
  for (const auto& I : ps.I) {
    p1 += I.i11;
    p2 += I.i22;
  }
  if (!(p1 > 1e-20 * e1) || !(p2 > 1e-20 * e2) || !(p1 > 0.0) || !(p2 > 0.0)) {
    throw NumericalFailure("degenerate periodogram");
  }
}

}  // namespace detail

/// theta_hat = argmin over Theta of R. Stage one evaluates the beta-profiled
/// objective on alpha_grid(); stage two runs projected Newton on all four
/// coordinates from the grid argmin (and from options.start if given).
///
/// When y is an exact multiple of x over the band, R is -infinity along
/// beta = beta0 for every alpha. Then beta_hat = beta0 and alpha minimises
/// the limit of R - 2 log|beta - beta0|, namely log c2(alpha) - 2 (d1 + d2) Lbar;
/// the result is flagged `degenerate` and Newton is skipped.
inline EstimationResult estimate_from_context(const ObjectiveContext& ctx, const ThetaSpace& sp,
                                              const EstimateOptions& o = {}) {
  EstimationResult res;
  res.n = ctx.pset().n();
  res.m = ctx.m();
  res.psi = ctx.psi();
  res.space = sp;
  res.beta_fixed = o.fixed_beta.has_value();

  if (!res.beta_fixed && detail::band_incoherence(ctx.pset()) <= 1e-12) {
    res.degenerate = true;
    const auto& ps = ctx.pset();
    double s22 = 0.0;
    cplx s12 = 0.0;
    for (const auto& I : ps.I) {
      s22 += I.i22;
      s12 += I.i12;
    }
    const double b0 = std::clamp(s12.real() / s22, sp.beta_lo(), sp.beta_hi());
    GridPoint best{{}, std::numeric_limits<double>::infinity()};
    double cd1 = NAN, cd2 = NAN;
    DeltaSums sums;
    for (const auto& a : alpha_grid(sp, o)) {
      if (a.delta1 != cd1 || a.delta2 != cd2) {
        sums = delta_sums(ctx, a.delta1, a.delta2);
        cd1 = a.delta1;
        cd2 = a.delta2;
      }
      const double n1 = -(std::polar(1.0, a.gamma) * sums.Q).real();
      const double c2 = sums.c11 * sums.d22 - n1 * n1;
      const double v = c2 > 0.0 ? std::log(c2) - 2.0 * (a.delta1 + a.delta2) * ctx.mean_log_psi()
                                : -std::numeric_limits<double>::infinity();
      GridPoint gp{{b0, a.gamma, a.delta1, a.delta2}, v};
      if (detail::grid_less(gp, best)) best = gp;
    }
    res.theta_hat = best.theta;
    res.grid_stage_argmin = best.theta;
    res.omega_hat = omega_hat(ctx, best.theta);
    res.R_min = -std::numeric_limits<double>::infinity();
    res.converged = true;
    res.boundary_hit = detail::boundary_flags(sp, res.theta_hat, false);
    return res;
  }

  bool fb = false;
  const auto surf = objective_surface(ctx, sp, o, &fb);
  res.profile_fallback = fb;
  const GridPoint* best = nullptr;
  for (const auto& gp : surf) {
    if (!std::isfinite(gp.R)) continue;
    if (!best || detail::grid_less(gp, *best)) best = &gp;
  }
  if (!best) throw NumericalFailure("estimation failed: det Omega_hat <= 0 on the whole grid");
  res.grid_stage_argmin = best->theta;

  auto run = detail::newton(ctx, sp, best->theta, o);
  if (o.start) {
    auto alt = detail::newton(ctx, sp, *o.start, o);
    if (alt.R < run.R) run = alt;
  }
  res.theta_hat = run.theta;
  res.R_min = run.R;
  res.converged = run.converged;
  res.iterations = run.iterations;
  res.omega_hat = omega_hat(ctx, run.theta);
  res.boundary_hit = detail::boundary_flags(sp, run.theta, res.beta_fixed);
  return res;
}

inline void check_estimation_input(const Series2& z, std::size_t m) {
  if (z.size() < 32) throw InvalidInput("estimate: need n >= 32");
  if (m < 1 || m > z.size() / 2) throw InvalidInput("estimate: need 1 <= m <= n/2");
  if (!z.all_finite()) throw InvalidInput("estimate: non-finite data");
}

inline EstimationResult estimate(const Series2& z, std::size_t m, PsiKind psi = PsiKind::Abs,
                                 const ThetaSpace& sp = {}, const EstimateOptions& o = {}) {
  check_estimation_input(z, m);
  auto ps = periodogram(z, m);
  detail::check_degenerate_columns(z, ps);
  ObjectiveContext ctx(std::move(ps), psi);
  return estimate_from_context(ctx, sp, o);
}

/// estimate() with beta held at a known beta0.
inline EstimationResult estimate_known_beta(const Series2& z, std::size_t m, PsiKind psi,
                                            const ThetaSpace& sp, double beta0,
                                            EstimateOptions o = {}) {
  o.fixed_beta = beta0;
  return estimate(z, m, psi, sp, o);
}

}  // namespace mlw
