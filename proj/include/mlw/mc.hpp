#pragma once

// Monte Carlo harness: simulate -> estimate -> Wald tests over replications,
// aggregated into rejection frequencies, bias, dispersion and coverage.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <iomanip>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include "mlw/baselines.hpp"
#include "mlw/inference.hpp"
#include "mlw/model.hpp"
#include "mlw/numeric.hpp"
#include "mlw/simulate.hpp"
#include "mlw/spectra.hpp"
#include "mlw/whittle.hpp"

namespace mlw::mc {

/// Runs fn(i) for i in [0, count) on up to `threads` workers (0: hardware
/// concurrency). fn must write only to slot i of its output. The first
/// exception thrown by fn is rethrown after all workers stop.
inline void parallel_for(std::size_t count, unsigned threads,
                         const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(count, 1)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!err) err = std::current_exception();
        next.store(count);
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (err) std::rethrow_exception(err);
}

/// Seed of replication `rep` for sample size n.
inline std::uint64_t replication_seed(std::uint64_t seed, std::size_t n, std::size_t rep) {
  return mix_seed(mix_seed(seed, n), rep);
}

/// Bandwidths: a preset rule or an explicit list.
struct MRule {
  std::vector<BandwidthRule> rules = {BandwidthRule::One};
  std::vector<std::size_t> explicit_m;  ///< used instead of `rules` when non-empty

  std::vector<std::size_t> for_n(std::size_t n) const {
    std::vector<std::size_t> out;
    if (!explicit_m.empty()) {
      out = explicit_m;
    } else {
      for (auto r : rules) out.push_back(bandwidth(n, r));
    }
    return out;
  }
};

struct McConfig {
  FarimaSpec dgp = FarimaSpec::design(0.05, 0.45, 0.75);
  double beta0 = 1.0;
  std::vector<std::size_t> n_list = {512};
  MRule m_rule;
  std::size_t reps = 1000;
  std::uint64_t seed = 1;
  std::vector<std::string> hypotheses = {"no-cointegration", "purely-nondeterministic",
                                         "short-memory-error"};
  double level = 0.05;
  PsiKind psi = PsiKind::Abs;
  ThetaSpace space;
  EstimateOptions options;
  bool baseline_start = false;
  SigmaVariant sigma_variant = SigmaVariant::Corrected;
  unsigned threads = 0;
  bool keep_replications = true;

  void validate() const {
    dgp.validate();
    if (reps < 1) throw InvalidInput("McConfig: reps must be >= 1");
    if (!(level > 0.0 && level < 1.0)) throw InvalidInput("McConfig: level must lie in (0, 1)");
    if (n_list.empty()) throw InvalidInput("McConfig: n_list is empty");
    for (auto n : n_list) {
      for (auto m : m_rule.for_n(n)) {
        if (n < 32 || m < 1 || m > n / 2) throw InvalidInput("McConfig: need n >= 32, 1 <= m <= n/2");
      }
    }
    for (const auto& h : hypotheses) named_hypothesis(h);
  }

  ThetaVector truth() const {
    const auto ip = implied_farima_params(dgp);
    return {beta0, ip.gamma0, dgp.delta01, dgp.delta02};
  }
};

/// One replication at one (n, m).
struct Replication {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  ThetaVector theta_hat;
  Vec4 se = Vec4::Zero();
  std::vector<double> wald;  ///< per hypothesis, in config order
  bool converged = false;
  int iterations = 0;
  std::array<bool, 4> boundary_hit{};
};

struct HypothesisStats {
  std::string name;
  std::size_t rejections = 0;
  std::size_t valid = 0;
  double frequency() const { return valid ? double(rejections) / double(valid) : NAN; }
  double se() const {
    const double p = frequency();
    return valid ? std::sqrt(p * (1.0 - p) / double(valid)) : NAN;
  }
};

struct ParamStats {
  double mean_bias = 0.0;
  double emp_sd = 0.0;
  double theory_sd = 0.0;  ///< from Sigma^{-1} at the true parameters
  double coverage = 0.0;   ///< of (1 - level) Wald intervals
};

struct Cell {
  std::size_t n = 0;
  std::size_t m = 0;
  std::vector<HypothesisStats> tests;
  std::array<ParamStats, 4> params{};
  std::size_t reps = 0;
  std::size_t failures = 0;
  std::size_t nonconverged = 0;
  std::array<std::size_t, 4> boundary{};
  std::vector<Replication> replications;
};

struct McResult {
  McConfig config;
  ThetaVector truth;
  std::vector<Cell> cells;
};

namespace detail {

inline Replication run_one(const McConfig& c, const Series2& z, std::size_t m,
                           const std::vector<Restriction>& hyps) {
  Replication r;
  auto ps = periodogram(z, m);
  mlw::detail::check_degenerate_columns(z, ps);
  EstimateOptions opt = c.options;
  if (c.baseline_start) opt.start = baseline_start(ps, c.space);
  ObjectiveContext ctx(std::move(ps), c.psi);
  const auto res = estimate_from_context(ctx, c.space, opt);
  r.theta_hat = res.theta_hat;
  r.converged = res.converged;
  r.iterations = res.iterations;
  r.boundary_hit = res.boundary_hit;
  const auto cov = estimate_covariance(res, ctx.pset().grid, c.sigma_variant);
  r.se = cov.se;
  for (const auto& h : hyps) r.wald.push_back(wald_test(res, cov, h).statistic);
  r.ok = true;
  return r;
}

inline void aggregate(const McConfig& c, const ThetaVector& truth, Cell& cell) {
  const double crit = boost::math::quantile(
      boost::math::complement(boost::math::chi_squared(1.0), c.level));
  const double z = boost::math::quantile(boost::math::normal(), 1.0 - 0.5 * c.level);
  cell.tests.clear();
  for (const auto& h : c.hypotheses) cell.tests.push_back({h, 0, 0});
  std::array<double, 4> sum{}, sum2{};
  std::array<std::size_t, 4> cover{};
  std::size_t ok = 0;
  for (const auto& r : cell.replications) {
    if (!r.ok) {
      ++cell.failures;
      continue;
    }
    ++ok;
    for (std::size_t k = 0; k < c.hypotheses.size(); ++k) {
      // Each test here has one restriction row, so df = 1.
      ++cell.tests[k].valid;
      if (r.wald[k] > crit) ++cell.tests[k].rejections;
    }
    for (int k = 0; k < 4; ++k) {
      const double e = r.theta_hat[k] - truth[k];
      sum[k] += e;
      sum2[k] += e * e;
      if (std::abs(e) <= z * r.se(k)) ++cover[k];
      if (r.boundary_hit[k]) ++cell.boundary[k];
    }
    if (!r.converged) ++cell.nonconverged;
  }
  for (int k = 0; k < 4; ++k) {
    auto& p = cell.params[k];
    if (ok == 0) {
      p.mean_bias = p.emp_sd = p.coverage = NAN;
      continue;
    }
    p.mean_bias = sum[k] / double(ok);
    const double var = ok > 1 ? (sum2[k] - double(ok) * p.mean_bias * p.mean_bias) / double(ok - 1) : 0.0;
    p.emp_sd = std::sqrt(std::max(0.0, var));
    p.coverage = double(cover[k]) / double(ok);
  }
  // Theory SD at the true parameters; Omega enters Sigma only through ratios.
  try {
    const auto ip = implied_farima_params(c.dgp);
    const auto S = sigma_matrix(ip.gamma0, truth.nu(), ip.omega0, c.sigma_variant);
    const Mat4 Si = S.S.inverse();
    const FourierGrid g(cell.n, cell.m);
    const Vec4 d = scaling_delta(g.lambda_m(), truth.nu());
    for (int k = 0; k < 4; ++k) {
      cell.params[k].theory_sd = std::sqrt(std::max(0.0, Si(k, k)) / double(cell.m)) / d(k);
    }
  } catch (const Error&) {
    for (auto& p : cell.params) p.theory_sd = NAN;
  }
}

}  // namespace detail

/// Runs all (n, m) cells. Replication r at sample size n uses
/// replication_seed(seed, n, r); the same data serve every m. Results are
/// aggregated in replication order, so output does not depend on `threads`.
/// Throws NumericalFailure when more than 5% of a cell's replications fail.
inline McResult run(const McConfig& c) {
  c.validate();
  McResult out;
  out.config = c;
  out.truth = c.truth();
  std::vector<Restriction> hyps;
  for (const auto& h : c.hypotheses) hyps.push_back(named_hypothesis(h));
  for (std::size_t n : c.n_list) {
    const auto ms = c.m_rule.for_n(n);
    std::vector<std::vector<Replication>> reps(ms.size(), std::vector<Replication>(c.reps));
    parallel_for(c.reps, c.threads, [&](std::size_t i) {
      SystemSpec spec{c.dgp, c.beta0, replication_seed(c.seed, n, i)};
      const Series2 z = simulate_system(spec, n);
      for (std::size_t k = 0; k < ms.size(); ++k) {
        Replication r;
        try {
          r = detail::run_one(c, z, ms[k], hyps);
        } catch (const Error& e) {
          r = Replication{};
          r.error = e.what();
        }
        r.index = i;
        r.seed = spec.seed;
        reps[k][i] = std::move(r);
      }
    });
    for (std::size_t k = 0; k < ms.size(); ++k) {
      Cell cell;
      cell.n = n;
      cell.m = ms[k];
      cell.reps = c.reps;
      cell.replications = std::move(reps[k]);
      detail::aggregate(c, out.truth, cell);
      if (double(cell.failures) > 0.05 * double(c.reps)) {
        throw NumericalFailure("mc: " + std::to_string(cell.failures) + " of " +
                               std::to_string(c.reps) + " replications failed at n=" +
                               std::to_string(n) + ", m=" + std::to_string(cell.m));
      }
      if (!c.keep_replications) cell.replications.clear();
      out.cells.push_back(std::move(cell));
    }
  }
  return out;
}

/// Table-shaped text: one row per (n, m) with rejection percentages, then
/// bias / SD / theory SD / coverage per parameter.
inline std::string summarize(const McResult& r) {
  std::ostringstream os;
  os << std::fixed;
  const auto& c = r.config;
  os << "delta0 = (" << std::setprecision(2) << c.dgp.delta01 << ", " << c.dgp.delta02
     << ")  beta0 = " << c.beta0 << "  reps = " << c.reps << "  level = " << c.level << "\n";
  os << std::setw(6) << "n" << std::setw(6) << "m";
  for (const auto& h : c.hypotheses) os << std::setw(26) << h;
  os << std::setw(10) << "failed" << "\n";
  for (const auto& cell : r.cells) {
    os << std::setw(6) << cell.n << std::setw(6) << cell.m;
    for (const auto& t : cell.tests) {
      std::ostringstream v;
      v << std::fixed << std::setprecision(1) << 100.0 * t.frequency() << " (" << 100.0 * t.se()
        << ")";
      os << std::setw(26) << v.str();
    }
    os << std::setw(10) << cell.failures << "\n";
  }
  os << "\n"
     << std::setw(6) << "n" << std::setw(6) << "m" << std::setw(8) << "param" << std::setw(12)
     << "bias" << std::setw(12) << "sd" << std::setw(12) << "theory_sd" << std::setw(10)
     << "coverage" << std::setw(10) << "boundary" << "\n";
  for (const auto& cell : r.cells) {
    for (int k = 0; k < 4; ++k) {
      const auto& p = cell.params[k];
      os << std::setw(6) << cell.n << std::setw(6) << cell.m << std::setw(8) << kThetaNames[k]
         << std::setprecision(5) << std::setw(12) << p.mean_bias << std::setw(12) << p.emp_sd
         << std::setw(12) << p.theory_sd << std::setprecision(3) << std::setw(10) << p.coverage
         << std::setw(10) << cell.boundary[k] << "\n";
    }
  }
  return os.str();
}

}  // namespace mlw::mc
