#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mlw/inference.hpp"
#include "test_util.hpp"

using namespace mlw;

namespace {

/// Periodogram replaced by its local-model expectation: the u-periodogram is
/// Lambda_j^{-1} Omega Lambda_j^{-1*} with the phase carried by u1, then
/// mapped to z = (beta0 u2 + u1, u2).
PeriodogramSet expected_pset(std::size_t n, std::size_t m, const ThetaVector& t0,
                             const OmegaMatrix& om, PsiKind psi) {
  PeriodogramSet ps{FourierGrid(n, m), {}};
  ps.I.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    const cplx p = psi_value(psi, ps.grid.lambdas[j]);
    const double L = std::log(std::abs(p)), ph = std::arg(p);
    const double u11 = om.w11 * std::exp(-2 * t0.delta1 * L);
    const double u22 = om.w22 * std::exp(-2 * t0.delta2 * L);
    const cplx u12 = om.w12 * std::exp(cplx(-(t0.delta1 + t0.delta2) * L,
                                            -((t0.delta1 - t0.delta2) * ph + t0.gamma)));
    const double b = t0.beta;
    ps.I[j] = {u11 + 2 * b * u12.real() + b * b * u22, u12 + b * u22, u22};
  }
  return ps;
}

Mat4 scaled_expected_hessian(const ThetaVector& t0, const OmegaMatrix& om, std::size_t m) {
  const std::size_t n = 1000 * m;
  const ObjectiveContext ctx(expected_pset(n, m, t0, om, PsiKind::Abs), PsiKind::Abs);
  const Mat4 H = hessian(ctx, t0);
  const Vec4 d = scaling_delta(ctx.pset().grid.lambda_m(), t0.nu());
  return d.cwiseInverse().asDiagonal() * H * d.cwiseInverse().asDiagonal();
}

OmegaMatrix omega_rho(double rho, double s1 = 1.0, double s2 = 2.0) {
  return {s1 * s1, rho * s1 * s2, s2 * s2};
}

}  // namespace

TEST(SigmaMatrix, SymmetryAndStructuralZeros) {
  for (double g : {-1.0, 0.0, 0.3}) {
    for (double nu : {0.0, 0.1, 0.4}) {
      for (double rho : {-0.6, 0.0, 0.5, 0.9}) {
        for (auto v : {SigmaVariant::Corrected, SigmaVariant::Published}) {
          const auto s = sigma_matrix(g, nu, omega_rho(rho), v);
          EXPECT_EQ(s.S, s.S.transpose());
          EXPECT_EQ(s.S(1, 2), 0.0);
          EXPECT_EQ(s.S(1, 3), 0.0);
        }
      }
    }
  }
}

TEST(SigmaMatrix, ZeroCoherenceDiagonal) {
  const auto s = sigma_matrix(0.4, 0.2, omega_rho(0.0));
  EXPECT_EQ(s.S(1, 1), 0.0);
  EXPECT_EQ(s.S(2, 3), 0.0);
  EXPECT_EQ(s.S(2, 2), 4.0);
  EXPECT_EQ(s.S(3, 3), 4.0);
}

TEST(SigmaMatrix, ZeroPhaseSeparatesGamma) {
  const auto s = sigma_matrix(0.0, 0.3, omega_rho(0.7));
  for (int k : {0, 2, 3}) EXPECT_EQ(s.S(1, k), 0.0);
}

TEST(SigmaMatrix, EqualMemoriesAndZeroPhaseUnidentified) {
  const auto s = sigma_matrix(0.0, 0.0, omega_rho(0.5));
  EXPECT_NEAR(s.S(0, 0), 0.0, 1e-15);
  EXPECT_FALSE(s.audit.positive_definite);
}

TEST(SigmaMatrix, DomainErrors) {
  EXPECT_THROW(sigma_matrix(0.0, 0.5, omega_rho(0.5)), DomainError);
  EXPECT_THROW(sigma_matrix(0.0, -0.1, omega_rho(0.5)), DomainError);
  EXPECT_THROW(sigma_matrix(0.0, 0.2, omega_rho(1.0)), DomainError);
}

TEST(SigmaMatrix, PublishedFormIndefiniteAtHighCoherence) {
  const auto p = sigma_matrix(0.4 * kPi / 2, 0.4, omega_rho(0.75), SigmaVariant::Published);
  EXPECT_FALSE(p.audit.positive_definite);
  EXPECT_LT(p.audit.min_eigenvalue, 0.0);
  EXPECT_FALSE(p.audit.message.empty());
  const auto c = sigma_matrix(0.4 * kPi / 2, 0.4, omega_rho(0.75));
  EXPECT_TRUE(c.audit.positive_definite);
}

TEST(SigmaMatrix, CorrectedPositiveDefiniteOverGrid) {
  for (double nu = 0.05; nu < 0.5; nu += 0.1) {
    for (double rho = -0.95; rho < 1.0; rho += 0.1) {
      for (double g = -1.5; g <= 1.5; g += 0.25) {
        const auto s = sigma_matrix(g, nu, omega_rho(rho, 1.0, 0.7));
        EXPECT_TRUE(s.audit.positive_definite) << nu << " " << rho << " " << g;
      }
    }
  }
}

// plim Delta^{-1} H(theta0) Delta^{-1} with the periodogram at its local-model
// expectation; m large so the finite-m remainder is small (nu0 <= 0.25).
TEST(SigmaMatrix, MatchesExpectedHessianLimit) {
  struct Case {
    double g, d1, d2, rho;
  };
  for (const Case& c : {Case{0.1 * kPi / 2, 0.2, 0.3, 0.9}, Case{0.2, 0.0, 0.25, 0.5},
                        Case{-0.7, 0.1, 0.2, -0.3}, Case{1.0, 0.3, 0.45, 0.75},
                        Case{0.0, 0.1, 0.3, 0.6}}) {
    const auto om = omega_rho(c.rho, 1.3, 0.6);
    const ThetaVector t0{0.8, c.g, c.d1, c.d2};
    const Mat4 emp = scaled_expected_hessian(t0, om, 400000);
    const auto s = sigma_matrix(c.g, c.d2 - c.d1, om);
    for (int k = 0; k < 4; ++k) {
      for (int l = 0; l < 4; ++l) {
        EXPECT_NEAR(emp(k, l), s(k, l), 0.01 * (1.0 + std::abs(s(k, l))))
            << "entry " << k << l << " rho " << c.rho;
      }
    }
  }
}

TEST(ScalingDelta, Values) {
  const Vec4 d = scaling_delta(0.25, 0.4);
  EXPECT_NEAR(d(0), std::pow(0.25, -0.4), 1e-15);
  EXPECT_EQ(d(1), 1.0);
  EXPECT_THROW(scaling_delta(0.0, 0.4), DomainError);
}

namespace {

EstimationResult fake_result(const ThetaVector& th, const OmegaMatrix& om, std::size_t n,
                             std::size_t m) {
  EstimationResult r;
  r.theta_hat = th;
  r.omega_hat = om;
  r.n = n;
  r.m = m;
  return r;
}

}  // namespace

TEST(EstimateCovariance, WeakCoherenceGivesUnivariateMemoryVariance) {
  const std::size_t n = 1024, m = 64;
  const auto res = fake_result({1.0, 0.0, 0.1, 0.3}, omega_rho(1e-4), n, m);
  const auto cov = estimate_covariance(res, FourierGrid(n, m));
  EXPECT_NEAR(cov.cov(2, 2), 1.0 / (4.0 * m), 1e-9);
  EXPECT_NEAR(cov.cov(3, 3), 1.0 / (4.0 * m), 1e-9);
}

TEST(EstimateCovariance, ZeroCoherenceNamesGammaDirection) {
  const auto res = fake_result({1.0, 0.0, 0.1, 0.3}, omega_rho(0.0), 1024, 64);
  try {
    estimate_covariance(res, FourierGrid(1024, 64));
    FAIL();
  } catch (const NumericalFailure& e) {
    EXPECT_NE(std::string(e.what()).find("gamma"), std::string::npos) << e.what();
  }
}

TEST(EstimateCovariance, EqualMemoriesZeroPhaseFails) {
  const auto res = fake_result({1.0, 0.0, 0.2, 0.2}, omega_rho(0.5), 1024, 64);
  EXPECT_THROW(estimate_covariance(res, FourierGrid(1024, 64)), NumericalFailure);
}

TEST(EstimateCovariance, ScalesWithBandwidthAndLambda) {
  const ThetaVector th{1.0, 0.5, 0.1, 0.4};
  const auto om = omega_rho(0.5);
  const auto a = estimate_covariance(fake_result(th, om, 1024, 64), FourierGrid(1024, 64));
  const auto sig = sigma_matrix(th.gamma, th.nu(), om);
  const Mat4 Si = sig.S.inverse();
  const double lm = kTwoPi * 64 / 1024;
  EXPECT_NEAR(a.cov(0, 0), Si(0, 0) * std::pow(lm, 2 * th.nu()) / 64, 1e-12);
  EXPECT_NEAR(a.cov(1, 3), Si(1, 3) / 64, 1e-12);
  EXPECT_NEAR(a.se(2), std::sqrt(Si(2, 2) / 64), 1e-12);
}

TEST(EstimateCovariance, KnownBetaUsesAlphaBlock) {
  auto res = fake_result({1.0, 0.5, 0.1, 0.4}, omega_rho(0.5), 1024, 64);
  res.beta_fixed = true;
  const auto c = estimate_covariance(res, FourierGrid(1024, 64));
  const auto sig = sigma_matrix(0.5, 0.3, omega_rho(0.5));
  const Eigen::Matrix3d blk = sig.S.block<3, 3>(1, 1).inverse() / 64.0;
  EXPECT_EQ(c.cov(0, 0), 0.0);
  EXPECT_NEAR(c.cov(1, 1), blk(0, 0), 1e-12);
  EXPECT_NEAR(c.cov(2, 3), blk(1, 2), 1e-12);
}

TEST(NamedHypothesis, Rows) {
  EXPECT_EQ(hypothesis_names().size(), 5u);
  const ThetaVector th{0.7, 0.3 * kPi / 2, 0.1, 0.4};
  const Vec4 v(th.beta, th.gamma, th.delta1, th.delta2);
  EXPECT_NEAR((named_hypothesis("purely-nondeterministic").A * v)(0), 0.0, 1e-15);
  const ThetaVector wc{0.7, 0.5 * kPi / 2, 0.1, 0.4};
  const Vec4 w(wc.beta, wc.gamma, wc.delta1, wc.delta2);
  EXPECT_NEAR((named_hypothesis("weak-causality").A * w)(0), 0.0, 1e-15);
  EXPECT_EQ(named_hypothesis("no-cointegration").A(0, 0), 1.0);
  EXPECT_EQ(named_hypothesis("zero-phase").A(0, 1), 1.0);
  EXPECT_EQ(named_hypothesis("short-memory-error").A(0, 2), 1.0);
  for (const auto& n : hypothesis_names()) {
    EXPECT_EQ(named_hypothesis(n).c(0), 0.0);
  }
  EXPECT_THROW(named_hypothesis("bogus"), InvalidInput);
}

TEST(WaldTest, ExactRestrictionGivesZero) {
  const Mat4 cov = Mat4::Identity() * 0.01;
  const auto w = wald_test({0.0, 0.2, 0.1, 0.4}, cov, named_hypothesis("no-cointegration"));
  EXPECT_EQ(w.statistic, 0.0);
  EXPECT_EQ(w.p_value, 1.0);
  EXPECT_EQ(w.df, 1);
}

TEST(WaldTest, KnownValueAndPValue) {
  Mat4 cov = Mat4::Identity();
  cov(0, 0) = 0.04;
  const auto w = wald_test({0.5, 0.2, 0.1, 0.4}, cov, named_hypothesis("no-cointegration"));
  EXPECT_NEAR(w.statistic, 0.25 / 0.04, 1e-12);
  EXPECT_NEAR(w.p_value, std::erfc(std::sqrt(w.statistic / 2)), 1e-12);
}

TEST(WaldTest, RowScalingInvariant) {
  std::mt19937_64 eng(3);
  std::normal_distribution<double> g;
  Eigen::Matrix4d B;
  for (int i = 0; i < 16; ++i) B(i / 4, i % 4) = g(eng);
  const Mat4 cov = B * B.transpose() + Mat4::Identity();
  Restriction r{"two", Eigen::MatrixXd(2, 4), Eigen::VectorXd(2)};
  r.A << 1, 0, 0.5, 0, 0, 1, -1, 2;
  r.c << 0.1, -0.3;
  const ThetaVector th{0.3, 0.2, 0.1, 0.4};
  const auto w1 = wald_test(th, cov, r);
  Restriction s = r;
  s.A.row(0) *= 7.0;
  s.c(0) *= 7.0;
  s.A.row(1) *= -0.2;
  s.c(1) *= -0.2;
  const auto w2 = wald_test(th, cov, s);
  EXPECT_NEAR(w1.statistic, w2.statistic, 1e-10 * w1.statistic);
  EXPECT_EQ(w1.df, 2);
}

TEST(WaldTest, Errors) {
  Restriction r{"dup", Eigen::MatrixXd(2, 4), Eigen::VectorXd::Zero(2)};
  r.A << 1, 0, 0, 0, 2, 0, 0, 0;
  EXPECT_THROW(wald_test({0, 0, 0, 0}, Mat4::Identity(), r), InvalidInput);
  Mat4 cov = Mat4::Identity();
  cov(0, 0) = 0.0;
  EXPECT_THROW(wald_test({1, 0, 0, 0}, cov, named_hypothesis("no-cointegration")), NumericalFailure);
}

TEST(WaldTest, InvariantToDataRescaling) {
  SystemSpec s{FarimaSpec::design(0.05, 0.45, 0.5), 1.0, 17};
  const auto z = simulate_system(s, 512);
  const auto a = estimate(z, 64), b = estimate(z.scaled(4.0), 64);
  for (const auto& name : hypothesis_names()) {
    const auto r = named_hypothesis(name);
    const double wa = wald_test(a, estimate_covariance(a, FourierGrid(512, 64)), r).statistic;
    const double wb = wald_test(b, estimate_covariance(b, FourierGrid(512, 64)), r).statistic;
    EXPECT_NEAR(wa, wb, 1e-6 * (1 + wa)) << name;
  }
}

TEST(ConfidenceIntervals, NormalQuantile) {
  const auto ci = confidence_intervals({1, 0, 0.1, 0.4}, Vec4(0.1, 0.2, 0.3, 0.4), 0.95);
  EXPECT_NEAR(ci[0].hi - 1.0, 0.1 * 1.959963984540054, 1e-12);
  EXPECT_NEAR(ci[3].lo, 0.4 - 0.4 * 1.959963984540054, 1e-12);
  EXPECT_THROW(confidence_intervals({}, Vec4::Ones(), 1.0), InvalidInput);
}

TEST(Misspecification, PlimOmega) {
  const OmegaMatrix om{2.0, 0.5, 1.0};
  const auto a = plim_omega_misspec(0.3, 0.3, om);
  EXPECT_EQ(a(0, 1), 0.5);
  EXPECT_NEAR(plim_omega_misspec(0.3 + kPi / 2, 0.3, om)(0, 1), 0.0, 1e-16);
}

TEST(Misspecification, ScoreBiasZeros) {
  const OmegaMatrix om{2.0, 0.5, 1.0};
  EXPECT_EQ(score_bias_misspec(0.4, 0.4, om, 0.3, 0.1), 0.0);
  EXPECT_EQ(score_bias_misspec(0.0, 0.4, om, 0.3, 0.1), 0.0);
  EXPECT_THROW(score_bias_misspec(0.4, 0.4, {1.0, 1.0, 1.0}, 0.3, 0.1), DomainError);
}

// With the periodogram at its expectation, dR/dbeta at theta0* approaches the
// leading term as m grows; this pins down the sign.
TEST(Misspecification, ScoreBiasMatchesExpectedScore) {
  const OmegaMatrix om = omega_rho(0.6, 1.0, 1.5);
  const double d1 = 0.1, d2 = 0.3, g0 = (d2 - d1) * kPi / 2;
  for (double gs : {-0.5, 0.1, 0.6}) {
    const std::size_t m = 200000, n = 1000 * m;
    const ThetaVector t0{1.0, g0, d1, d2};
    const ObjectiveContext ctx(expected_pset(n, m, t0, om, PsiKind::Abs), PsiKind::Abs);
    const ThetaVector ts{1.0, gs, d1, d2};
    const double got = score(ctx, ts)(0);
    const double want = score_bias_misspec(gs, g0, om, d2 - d1, ctx.pset().grid.lambda_m());
    EXPECT_NEAR(got / want, 1.0, 0.01) << gs;
  }
}

TEST(MeanClt, ShortMemoryIsTwoPiOmega) {
  const OmegaMatrix om{2.0, 0.5, 1.0};
  const auto c = mean_clt_covariance(0.0, 0.0, 0.7, om);
  EXPECT_NEAR(c.cov(0, 0), kTwoPi * 2.0, 1e-12);
  EXPECT_NEAR(c.cov(0, 1), kTwoPi * 0.5 * std::cos(0.7), 1e-12);
  EXPECT_NEAR(c.cov(1, 1), kTwoPi * 1.0, 1e-12);
  EXPECT_EQ(c.exponents[0], 0.5);
}

TEST(MeanClt, DiagonalIndependentOfPhase) {
  const OmegaMatrix om{2.0, 0.5, 1.0};
  const auto a = mean_clt_covariance(0.1, 0.3, 0.0, om), b = mean_clt_covariance(0.1, 0.3, 1.2, om);
  EXPECT_EQ(a.cov(0, 0), b.cov(0, 0));
  EXPECT_EQ(a.cov(1, 1), b.cov(1, 1));
  EXPECT_THROW(mean_clt_covariance(0.5, 0.5, 0.0, om), DomainError);
}

// Variance of n^{1/2 - d02} x_bar over replications. No AR part and a
// moderate memory keep the finite-n remainder and the truncation loss small.
TEST(MeanClt, MonteCarloVarianceOfMean) {
  const double d2 = 0.2;
  auto spec = FarimaSpec::design(0.05, d2, 0.5, 0.0);
  const auto imp = implied_farima_params(spec);
  const auto c = mean_clt_covariance(0.05, d2, imp.gamma0, imp.omega0);
  const std::size_t n = 4096;
  std::vector<double> v;
  for (int r = 0; r < 2000; ++r) {
    const auto u = simulate_u(spec, n, mix_seed(99, r));
    double s = 0.0;
    for (double x : u.c2) s += x;
    v.push_back(std::pow(double(n), 0.5 - d2) * s / double(n));
  }
  double ss = 0.0;
  for (double x : v) ss += x * x;
  EXPECT_NEAR(ss / v.size() / c.cov(1, 1), 1.0, 0.10);
}
