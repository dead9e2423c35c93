// mlw: command-line front end for simulation, estimation, testing and Monte Carlo.

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mlw/mlw.hpp"

using namespace mlw;
using namespace mlw::io;
using json = nlohmann::json;

namespace {

// Exit codes.
constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kNumerical = 2;

struct SpaceOpts {
  ThetaSpace def;
  double eta1 = def.eta1(), eta2 = def.eta2(), eta3 = def.eta3(), eta4 = def.eta4();
  double beta_lo = def.beta_lo(), beta_hi = def.beta_hi();

  void add(CLI::App* a) {
    a->add_option("--eta1", eta1, "delta1 >= -eta1")->capture_default_str();
    a->add_option("--eta2", eta2, "delta2 - delta1 >= eta2")->capture_default_str();
    a->add_option("--eta3", eta3, "delta2 <= 1/2 - eta3")->capture_default_str();
    a->add_option("--eta4", eta4, "|gamma| <= pi/2 - eta4")->capture_default_str();
    a->add_option("--beta-lo", beta_lo, "lower bound for beta")->capture_default_str();
    a->add_option("--beta-hi", beta_hi, "upper bound for beta")->capture_default_str();
  }
  ThetaSpace space() const { return ThetaSpace(eta1, eta2, eta3, eta4, beta_lo, beta_hi); }
};

struct DgpOpts {
  double delta1 = 0.05, delta2 = 0.45, rho = 0.75, beta0 = 1.0, ar = 0.5;

  void add(CLI::App* a) {
    a->add_option("--delta1", delta1, "memory of the cointegrating error")->capture_default_str();
    a->add_option("--delta2", delta2, "memory of the regressor")->capture_default_str();
    a->add_option("--rho", rho, "innovation correlation")->capture_default_str();
    a->add_option("--beta0", beta0, "cointegrating coefficient")->capture_default_str();
    a->add_option("--ar", ar, "AR(1) coefficient of both errors")->capture_default_str();
  }
  FarimaSpec spec() const {
    auto s = FarimaSpec::design(delta1, delta2, rho, ar);
    s.validate();
    return s;
  }
};

const std::map<std::string, PsiKind> kPsiMap = {{"abs", PsiKind::Abs}, {"nu", PsiKind::Nu}};
const std::map<std::string, BandwidthRule> kRuleMap = {
    {"half", BandwidthRule::Half}, {"one", BandwidthRule::One}, {"two", BandwidthRule::Two}};
const std::map<std::string, SigmaVariant> kSigmaMap = {{"corrected", SigmaVariant::Corrected},
                                                       {"published", SigmaVariant::Published}};

struct EstimateOpts {
  std::string in = "-";
  std::size_t m = 0;
  std::string m_rule = "one";
  std::string psi = "abs";
  std::optional<double> known_beta;
  bool baseline_start = false;
  std::string sigma = "corrected";
  std::string hessian = "analytic";
  SpaceOpts space;

  /// Which flags a subcommand takes: input and bandwidth only, the objective
  /// as well, or everything estimation uses.
  enum class Scope { Bandwidth, Objective, Estimation };

  void add(CLI::App* a, Scope scope = Scope::Estimation) {
    a->add_option("--in", in, "input CSV with header y,x ('-' for stdin)")->capture_default_str();
    a->add_option("--m", m, "bandwidth; 0 selects --m-rule")->capture_default_str();
    a->add_option("--m-rule", m_rule, "bandwidth preset: half, one or two times n^(2/3)")
        ->check(CLI::IsMember({"half", "one", "two"}))
        ->capture_default_str();
    if (scope == Scope::Bandwidth) return;
    a->add_option("--psi", psi, "frequency function: abs (|lambda|) or nu (2 sin(lambda/2) e^{i lambda/2})")
        ->check(CLI::IsMember({"abs", "nu"}))
        ->capture_default_str();
    a->add_option("--known-beta", known_beta, "hold beta fixed at this value");
    if (scope == Scope::Objective) {
      space.add(a);
      return;
    }
    a->add_flag("--baseline-start", baseline_start, "also start Newton from the closed-form baselines");
    a->add_option("--sigma", sigma, "asymptotic covariance form: corrected or published")
        ->check(CLI::IsMember({"corrected", "published"}))
        ->capture_default_str();
    a->add_option("--hessian", hessian, "Newton curvature: analytic or surrogate")
        ->check(CLI::IsMember({"analytic", "surrogate"}))
        ->capture_default_str();
    space.add(a);
  }

  std::size_t bandwidth_for(std::size_t n) const { return m ? m : bandwidth(n, kRuleMap.at(m_rule)); }

  EstimateOptions options() const {
    EstimateOptions o;
    o.fixed_beta = known_beta;
    o.hessian = hessian == "surrogate" ? NewtonHessian::Surrogate : NewtonHessian::Analytic;
    return o;
  }
};

Series2 read_input(const std::string& path) {
  if (path == "-") return read_series_csv(std::cin);
  return read_series_csv(path);
}

/// Writes text to `path`, or to stdout when path is empty or "-".
void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(path);
  if (!f) throw InvalidInput("cannot write '" + path + "'");
  f << text;
}

EstimationResult run_estimate(const Series2& z, const EstimateOpts& e) {
  const std::size_t m = e.bandwidth_for(z.size());
  check_estimation_input(z, m);
  auto ps = periodogram(z, m);
  mlw::detail::check_degenerate_columns(z, ps);
  const auto sp = e.space.space();
  auto o = e.options();
  if (e.baseline_start) o.start = baseline_start(ps, sp);
  ObjectiveContext ctx(std::move(ps), kPsiMap.at(e.psi));
  return estimate_from_context(ctx, sp, o);
}

std::vector<Restriction> restrictions(const std::vector<std::string>& names) {
  std::vector<Restriction> out;
  for (const auto& n : names) out.push_back(named_hypothesis(n));
  return out;
}

// ---------------------------------------------------------------------------
// Config file: key=value lines mirroring the long flags of the subcommand.
// Keys already given on the command line are skipped, so flags win.

std::vector<std::string> inject_config(std::vector<std::string> args) {
  std::string path;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (path.empty()) return rest;
  std::ifstream f(path);
  if (!f) throw InvalidInput("cannot open config file '" + path + "'");
  std::set<std::string> given;
  for (const auto& a : rest) {
    if (a.rfind("--", 0) == 0) given.insert(a.substr(2, a.find('=') == std::string::npos ? std::string::npos : a.find('=') - 2));
  }
  std::vector<std::string> extra;
  std::string line;
  std::size_t ln = 0;
  while (std::getline(f, line)) {
    ++ln;
    const auto t = std::string(mlw::io::detail::trim(line));
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw InvalidInput("config line " + std::to_string(ln) + ": expected key=value");
    }
    const std::string key(mlw::io::detail::trim(t.substr(0, eq)));
    const std::string val(mlw::io::detail::trim(t.substr(eq + 1)));
    if (key.empty()) throw InvalidInput("config line " + std::to_string(ln) + ": empty key");
    if (given.count(key)) continue;
    extra.push_back("--" + key + "=" + val);
  }
  // Config values go right after the subcommand name.
  std::size_t pos = 0;
  while (pos < rest.size() && rest[pos].rfind("-", 0) == 0) ++pos;
  if (pos < rest.size()) ++pos;
  rest.insert(rest.begin() + static_cast<std::ptrdiff_t>(pos), extra.begin(), extra.end());
  return rest;
}

}  // namespace


int main(int argc, char** argv) {
  CLI::App app{"Multivariate local Whittle estimation of fractional cointegration"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "mlw 1.0");
  std::string config_path;
  app.add_option("--config", config_path,
                 "key=value file mirroring the flags of the subcommand; flags win");

  // simulate
  auto* sim = app.add_subcommand("simulate", "simulate y = beta0 x + u1, x = u2 and write CSV");
  std::size_t sim_n = 512;
  std::uint64_t sim_seed = 1;
  double mean_y = 0.0, mean_x = 0.0;
  std::string sim_out;
  DgpOpts sim_dgp;
  sim->add_option("--n", sim_n, "sample size")->capture_default_str();
  sim->add_option("--seed", sim_seed, "random seed")->capture_default_str();
  sim->add_option("--mean-y", mean_y, "constant added to y")->capture_default_str();
  sim->add_option("--mean-x", mean_x, "constant added to x")->capture_default_str();
  sim->add_option("--out", sim_out, "output CSV (default stdout)");
  sim_dgp.add(sim);

  // estimate
  auto* est = app.add_subcommand("estimate", "estimate (beta, gamma, delta1, delta2) and write JSON");
  EstimateOpts est_o;
  std::vector<std::string> est_tests;
  std::string est_out;
  est_o.add(est);
  est->add_option("--test", est_tests, "hypotheses to test (repeatable or comma separated)")
      ->delimiter(',')
      ->check(CLI::IsMember(hypothesis_names()));
  est->add_option("--out", est_out, "output JSON (default stdout)");

  // wald
  auto* wald = app.add_subcommand("wald", "Wald tests from a stored estimate or a raw series");
  std::string wald_result;
  EstimateOpts wald_o;
  std::vector<std::string> wald_tests = hypothesis_names();
  std::string wald_out;
  wald->add_option("--result", wald_result, "estimate JSON written by 'mlw estimate'");
  wald_o.add(wald);
  wald->add_option("--test", wald_tests, "hypotheses (default: all five)")
      ->delimiter(',')
      ->check(CLI::IsMember(hypothesis_names()));
  wald->add_option("--out", wald_out, "output JSON (default stdout)");

  // mc
  auto* mcc = app.add_subcommand("mc", "Monte Carlo study");
  std::string preset;
  DgpOpts mc_dgp;
  std::vector<std::size_t> mc_n = {512};
  std::vector<std::size_t> mc_m;
  std::vector<std::string> mc_rules;
  std::size_t mc_reps = 1000;
  std::uint64_t mc_seed = 1;
  std::vector<std::string> mc_tests;
  double mc_level = 0.05;
  std::string mc_psi = "abs", mc_sigma = "corrected";
  bool mc_baseline = false;
  unsigned threads = 0;
  std::string mc_jsonl, mc_summary, mc_csv;
  SpaceOpts mc_space;
  mcc->add_option("--preset", preset, "table1-row: the three hypotheses and bandwidths of the size/power table")
      ->check(CLI::IsMember({"table1-row"}));
  mc_dgp.add(mcc);
  mcc->add_option("--n", mc_n, "sample sizes")->delimiter(',')->capture_default_str();
  mcc->add_option("--m", mc_m, "explicit bandwidths (override --m-rule)")->delimiter(',');
  mcc->add_option("--m-rule", mc_rules, "bandwidth presets among half, one, two (default one)")
      ->delimiter(',')
      ->check(CLI::IsMember({"half", "one", "two"}));
  mcc->add_option("--reps", mc_reps, "replications")->capture_default_str();
  mcc->add_option("--seed", mc_seed, "base seed")->capture_default_str();
  mcc->add_option("--test", mc_tests,
                  "hypotheses (default: no-cointegration, purely-nondeterministic, short-memory-error)")
      ->delimiter(',')
      ->check(CLI::IsMember(hypothesis_names()));
  mcc->add_option("--level", mc_level, "nominal size")->capture_default_str();
  mcc->add_option("--psi", mc_psi, "abs or nu")->check(CLI::IsMember({"abs", "nu"}))->capture_default_str();
  mcc->add_option("--sigma", mc_sigma, "corrected or published")
      ->check(CLI::IsMember({"corrected", "published"}))
      ->capture_default_str();
  mcc->add_flag("--baseline-start", mc_baseline, "also start Newton from the closed-form baselines");
  mcc->add_option("--threads", threads, "worker threads (0: all cores)")->capture_default_str();
  mcc->add_option("--jsonl", mc_jsonl, "per-replication JSON lines");
  mcc->add_option("--summary", mc_summary, "summary JSON");
  mcc->add_option("--csv", mc_csv, "summary table as CSV");
  mc_space.add(mcc);

  // surface
  auto* surf = app.add_subcommand("surface", "profiled objective over the stage-one grid as CSV");
  EstimateOpts surf_o;
  std::string surf_out;
  int gamma_points = 25;
  double delta_step = 0.025;
  surf_o.add(surf, EstimateOpts::Scope::Objective);
  surf->add_option("--gamma-points", gamma_points, "grid points for gamma")->capture_default_str();
  surf->add_option("--delta-step", delta_step, "grid step for delta")->capture_default_str();
  surf->add_option("--out", surf_out, "output CSV (default stdout)");

  // periodogram
  auto* per = app.add_subcommand("periodogram", "periodogram ordinates 1..m as CSV");
  EstimateOpts per_o;
  std::string per_out;
  per_o.add(per, EstimateOpts::Scope::Bandwidth);
  per->add_option("--out", per_out, "output CSV (default stdout)");

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = inject_config(args);
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (*sim) {
      SystemSpec s{sim_dgp.spec(), sim_dgp.beta0, sim_seed, {mean_y, mean_x}};
      std::ostringstream os;
      write_series_csv(os, simulate_system(s, sim_n));
      emit(sim_out, os.str());
    } else if (*est) {
      const auto z = read_input(est_o.in);
      const auto res = run_estimate(z, est_o);
      json j;
      try {
        const auto cov = estimate_covariance(res, FourierGrid(res.n, res.m), kSigmaMap.at(est_o.sigma));
        std::vector<WaldResult> tests;
        for (const auto& r : restrictions(est_tests)) tests.push_back(wald_test(res, cov, r));
        j = to_json(res, &cov, tests);
      } catch (const NumericalFailure& e) {
        if (!est_tests.empty()) throw;
        j = to_json(res, nullptr);
        j["warnings"] = {std::string("standard errors unavailable: ") + e.what()};
      }
      emit(est_out, j.dump(2) + "\n");
    } else if (*wald) {
      const auto hyps = restrictions(wald_tests);
      json out = {{"schema_version", kSchemaVersion}, {"kind", "wald"}};
      json tests = json::array();
      if (!wald_result.empty()) {
        std::ifstream f(wald_result);
        if (!f) throw InvalidInput("cannot open '" + wald_result + "'");
        json rec;
        try {
          rec = json::parse(f);
        } catch (const json::exception& e) {
          throw InvalidInput(std::string("malformed estimate JSON: ") + e.what());
        }
        if (!rec.contains("cov") || rec["cov"].is_null()) {
          throw InvalidInput("estimate JSON has no covariance matrix");
        }
        ThetaVector th;
        Mat4 cov;
        try {
          th = theta_from_json(rec.at("theta_hat"));
          cov = mat4_from_json(rec.at("cov"));
        } catch (const json::exception& e) {
          throw InvalidInput(std::string("malformed estimate JSON: ") + e.what());
        }
        out["theta_hat"] = to_json(th);
        for (const auto& r : hyps) tests.push_back(to_json(wald_test(th, cov, r)));
      } else {
        const auto z = read_input(wald_o.in);
        const auto res = run_estimate(z, wald_o);
        const auto cov = estimate_covariance(res, FourierGrid(res.n, res.m), kSigmaMap.at(wald_o.sigma));
        out["theta_hat"] = to_json(res.theta_hat);
        for (const auto& r : hyps) tests.push_back(to_json(wald_test(res, cov, r)));
      }
      out["tests"] = tests;
      emit(wald_out, out.dump(2) + "\n");
    } else if (*mcc) {
      mc::McConfig c;
      c.dgp = mc_dgp.spec();
      c.beta0 = mc_dgp.beta0;
      c.n_list = mc_n;
      c.reps = mc_reps;
      c.seed = mc_seed;
      c.level = mc_level;
      c.psi = kPsiMap.at(mc_psi);
      c.sigma_variant = kSigmaMap.at(mc_sigma);
      c.baseline_start = mc_baseline;
      c.threads = threads;
      c.space = mc_space.space();
      c.keep_replications = !mc_jsonl.empty();
      if (!mc_tests.empty()) c.hypotheses = mc_tests;
      if (!mc_m.empty()) {
        c.m_rule.explicit_m = mc_m;
      } else if (!mc_rules.empty()) {
        c.m_rule.rules.clear();
        for (const auto& r : mc_rules) c.m_rule.rules.push_back(kRuleMap.at(r));
      } else if (preset == "table1-row") {
        c.m_rule.rules = {BandwidthRule::Half, BandwidthRule::One, BandwidthRule::Two};
      }
      const auto res = mc::run(c);
      if (!mc_jsonl.empty()) {
        std::ostringstream os;
        for (const auto& cell : res.cells) {
          for (const auto& r : cell.replications) {
            os << to_json(r, c.hypotheses, cell.n, cell.m).dump() << "\n";
          }
        }
        emit(mc_jsonl, os.str());
      }
      if (!mc_summary.empty()) emit(mc_summary, summary_json(res).dump(2) + "\n");
      if (!mc_csv.empty()) {
        std::ostringstream os;
        write_summary_csv(os, res);
        emit(mc_csv, os.str());
      }
      std::cout << mc::summarize(res);
    } else if (*surf) {
      const auto z = read_input(surf_o.in);
      const std::size_t m = surf_o.bandwidth_for(z.size());
      check_estimation_input(z, m);
      auto ps = periodogram(z, m);
      mlw::detail::check_degenerate_columns(z, ps);
      ObjectiveContext ctx(std::move(ps), kPsiMap.at(surf_o.psi));
      auto o = surf_o.options();
      o.gamma_points = gamma_points;
      o.delta_step = delta_step;
      std::ostringstream os;
      write_surface_csv(os, objective_surface(ctx, surf_o.space.space(), o));
      emit(surf_out, os.str());
    } else if (*per) {
      const auto z = read_input(per_o.in);
      const std::size_t m = per_o.bandwidth_for(z.size());
      if (m < 1 || m > z.size() / 2) throw InvalidInput("need 1 <= m <= n/2");
      std::ostringstream os;
      write_periodogram_csv(os, periodogram(z, m));
      emit(per_out, os.str());
    }
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    const json err = {{"schema_version", kSchemaVersion},
                      {"kind", "error"},
                      {"error", e.what()},
                      {"type", dynamic_cast<const DomainError*>(&e) ? "domain_error" : "numerical_failure"}};
    std::cerr << err.dump() << "\n";
    return kNumerical;
  }
  return kOk;
}
