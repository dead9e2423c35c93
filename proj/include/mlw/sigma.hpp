#pragma once

// Limiting information matrix Sigma of the multiple local Whittle estimate,
// with the diagonal scaling Delta_n and a positive-definiteness audit.

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "mlw/errors.hpp"
#include "mlw/model.hpp"

namespace mlw {

using Mat4 = Eigen::Matrix4d;
using Vec4 = Eigen::Vector4d;

/// Published: the closed form as printed in the source article.
/// Corrected (default): the probability limit of Delta_n^{-1} H(theta0) Delta_n^{-1},
/// H the Hessian of R. It differs from the printed form in two entries,
///   sigma14 = -2 mu nu0 (1 - nu0)^{-2} cos(gamma0) w12 / w11,
///   sigma33 = sigma44 = 4 + 2 mu rho^2.
/// See README for the derivation and the simulation check.
enum class SigmaVariant { Corrected, Published };

inline const char* to_string(SigmaVariant v) {
  return v == SigmaVariant::Corrected ? "corrected" : "published";
}

struct PdAudit {
  bool positive_definite = false;
  double min_eigenvalue = 0.0;
  Vec4 eigenvalues = Vec4::Zero();
  std::string message;  ///< empty when positive definite
};

struct SigmaMatrix {
  Mat4 S = Mat4::Zero();
  double gamma0 = 0.0;
  double nu0 = 0.0;
  OmegaMatrix omega;
  SigmaVariant variant = SigmaVariant::Corrected;
  PdAudit audit;

  double operator()(int k, int l) const { return S(k, l); }
};

inline PdAudit audit_pd(const Mat4& S) {
  Eigen::SelfAdjointEigenSolver<Mat4> es(S, Eigen::EigenvaluesOnly);
  PdAudit a;
  a.eigenvalues = es.eigenvalues();
  a.min_eigenvalue = a.eigenvalues.minCoeff();
  const double tol = 1e-12 * std::max(1.0, a.eigenvalues.cwiseAbs().maxCoeff());
  a.positive_definite = a.min_eigenvalue > tol;
  if (!a.positive_definite) {
    a.message = "Sigma is not positive definite; smallest eigenvalue " +
                std::to_string(a.min_eigenvalue);
  }
  return a;
}

inline SigmaMatrix sigma_matrix(double gamma0, double nu0, const OmegaMatrix& om,
                                SigmaVariant variant = SigmaVariant::Corrected) {
  if (!(nu0 >= 0.0 && nu0 < 0.5)) throw DomainError("sigma_matrix: need 0 <= nu0 < 1/2");
  if (!(om.w11 > 0.0 && om.w22 > 0.0)) throw DomainError("sigma_matrix: omega diagonal must be positive");
  const double rho = om.rho();
  if (!(std::abs(rho) < 1.0)) throw DomainError("sigma_matrix: need |rho| < 1");
  const double mu = 1.0 / (1.0 - rho * rho);
  const double c = std::cos(gamma0), s = std::sin(gamma0);
  const double a = 1.0 - nu0;

  SigmaMatrix out;
  out.gamma0 = gamma0;
  out.nu0 = nu0;
  out.omega = om;
  out.variant = variant;
  Mat4& S = out.S;
  S(0, 0) = 2.0 * mu * (1.0 / (1.0 - 2.0 * nu0) - c * c / (a * a)) * om.w22 / om.w11;
  S(0, 1) = -2.0 * mu / a * s * om.w12 / om.w11;
  S(0, 2) = 2.0 * mu * nu0 / (a * a) * c * om.w12 / om.w11;
  const double w14 = variant == SigmaVariant::Corrected ? om.w12 : om.w22;
  S(0, 3) = -2.0 * mu * nu0 / (a * a) * c * w14 / om.w11;
  S(1, 1) = 2.0 * mu * rho * rho;
  S(2, 3) = -2.0 * mu * rho * rho;
  S(1, 2) = S(1, 3) = 0.0;
  const double d = variant == SigmaVariant::Corrected ? 4.0 - S(2, 3) : 4.0 + S(2, 3);
  S(2, 2) = S(3, 3) = d;
  for (int k = 0; k < 4; ++k) {
    for (int l = 0; l < k; ++l) S(k, l) = S(l, k);
  }
  out.audit = audit_pd(S);
  return out;
}

/// Diagonal of Delta_n = diag{lambda_m^{-nu}, 1, 1, 1}.
inline Vec4 scaling_delta(double lambda_m, double nu) {
  if (!(lambda_m > 0.0)) throw DomainError("scaling_delta: need lambda_m > 0");
  return Vec4(std::pow(lambda_m, -nu), 1.0, 1.0, 1.0);
}

}  // namespace mlw
