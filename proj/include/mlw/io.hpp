#pragma once

// CSV and JSON serialisation for series, estimates, tests and Monte Carlo output.

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mlw/errors.hpp"
#include "mlw/inference.hpp"
#include "mlw/mc.hpp"
#include "mlw/series.hpp"
#include "mlw/whittle.hpp"

namespace mlw::io {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// Malformed CSV input; carries the 1-based line number.
class CsvError : public InvalidInput {
 public:
  CsvError(std::size_t line, const std::string& what)
      : InvalidInput("CSV line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Shortest decimal that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline double parse_double(std::string_view s, std::size_t line) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) {
    throw CsvError(line, "not a number: '" + std::string(s) + "'");
  }
  if (!std::isfinite(v)) throw CsvError(line, "non-finite value");
  return v;
}

}  // namespace detail

/// Reads a two-column CSV with header `y,x`.
inline Series2 read_series_csv(std::istream& in) {
  std::string line;
  std::size_t ln = 0;
  if (!std::getline(in, line)) throw CsvError(1, "empty input");
  ++ln;
  if (detail::trim(line) != "y,x") throw CsvError(1, "expected header 'y,x'");
  Series2 z;
  while (std::getline(in, line)) {
    ++ln;
    const auto t = detail::trim(line);
    if (t.empty()) continue;
    const auto comma = t.find(',');
    if (comma == std::string_view::npos) throw CsvError(ln, "expected 2 fields, found 1");
    if (t.find(',', comma + 1) != std::string_view::npos) {
      throw CsvError(ln, "expected 2 fields, found more");
    }
    z.c1.push_back(detail::parse_double(t.substr(0, comma), ln));
    z.c2.push_back(detail::parse_double(t.substr(comma + 1), ln));
  }
  return z;
}

inline Series2 read_series_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InvalidInput("cannot open '" + path + "'");
  return read_series_csv(f);
}

inline void write_series_csv(std::ostream& out, const Series2& z) {
  out << "y,x\n";
  for (std::size_t t = 0; t < z.size(); ++t) {
    out << format_double(z.c1[t]) << ',' << format_double(z.c2[t]) << '\n';
  }
}

/// j, lambda_j, I11, Re I12, Im I12, I22.
inline void write_periodogram_csv(std::ostream& out, const PeriodogramSet& ps) {
  out << "j,lambda,I11,re_I12,im_I12,I22\n";
  for (std::size_t j = 0; j < ps.m(); ++j) {
    const auto& I = ps.I[j];
    out << j + 1 << ',' << format_double(ps.grid.lambdas[j]) << ',' << format_double(I.i11) << ','
        << format_double(I.i12.real()) << ',' << format_double(I.i12.imag()) << ','
        << format_double(I.i22) << '\n';
  }
}

inline void write_surface_csv(std::ostream& out, const std::vector<GridPoint>& surf) {
  out << "gamma,delta1,delta2,beta_star,R\n";
  for (const auto& g : surf) {
    out << format_double(g.theta.gamma) << ',' << format_double(g.theta.delta1) << ','
        << format_double(g.theta.delta2) << ',' << format_double(g.theta.beta) << ','
        << (std::isfinite(g.R) ? format_double(g.R) : std::string("inf")) << '\n';
  }
}

// ---------------------------------------------------------------------------
// JSON

inline json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json to_json(const ThetaVector& t) {
  return {{"beta", num(t.beta)}, {"gamma", num(t.gamma)}, {"delta1", num(t.delta1)},
          {"delta2", num(t.delta2)}};
}

inline ThetaVector theta_from_json(const json& j) {
  return {j.at("beta").get<double>(), j.at("gamma").get<double>(), j.at("delta1").get<double>(),
          j.at("delta2").get<double>()};
}

inline json to_json(const OmegaMatrix& o) {
  return {{"w11", num(o.w11)}, {"w12", num(o.w12)}, {"w22", num(o.w22)}};
}

inline OmegaMatrix omega_from_json(const json& j) {
  return {j.at("w11").get<double>(), j.at("w12").get<double>(), j.at("w22").get<double>()};
}

inline json to_json(const Mat4& m) {
  json a = json::array();
  for (int k = 0; k < 4; ++k) {
    json row = json::array();
    for (int l = 0; l < 4; ++l) row.push_back(num(m(k, l)));
    a.push_back(row);
  }
  return a;
}

inline Mat4 mat4_from_json(const json& j) {
  Mat4 m;
  for (int k = 0; k < 4; ++k) {
    for (int l = 0; l < 4; ++l) m(k, l) = j.at(k).at(l).get<double>();
  }
  return m;
}

inline json to_json(const WaldResult& w) {
  json A = json::array();
  for (Eigen::Index r = 0; r < w.restriction.A.rows(); ++r) {
    json row = json::array();
    for (int k = 0; k < 4; ++k) row.push_back(w.restriction.A(r, k));
    A.push_back(row);
  }
  json c = json::array();
  for (Eigen::Index r = 0; r < w.restriction.c.size(); ++r) c.push_back(w.restriction.c(r));
  return {{"name", w.restriction.name}, {"W", num(w.statistic)}, {"df", w.df},
          {"p", num(w.p_value)}, {"A", A}, {"c", c}};
}

/// Estimate record. Units: gamma in radians; omega_hat in periodogram units
/// (2 pi times the spectral-density constant); se and cov are for theta_hat.
inline json to_json(const EstimationResult& r, const CovarianceResult* cov,
                    const std::vector<WaldResult>& tests = {}) {
  json flags = {{"converged", r.converged},
                {"degenerate", r.degenerate},
                {"beta_fixed", r.beta_fixed},
                {"profile_fallback", r.profile_fallback},
                {"boundary_hit",
                 {{"beta", r.boundary_hit[0]},
                  {"gamma", r.boundary_hit[1]},
                  {"delta1", r.boundary_hit[2]},
                  {"delta2", r.boundary_hit[3]}}}};
  json j = {{"schema_version", kSchemaVersion},
            {"kind", "estimate"},
            {"n", r.n},
            {"m", r.m},
            {"psi", to_string(r.psi)},
            {"theta_hat", to_json(r.theta_hat)},
            {"omega_hat", to_json(r.omega_hat)},
            {"R_min", num(r.R_min)},
            {"iterations", r.iterations},
            {"grid_stage_argmin", to_json(r.grid_stage_argmin)},
            {"flags", flags}};
  if (cov) {
    j["se"] = {{"beta", num(cov->se(0))}, {"gamma", num(cov->se(1))}, {"delta1", num(cov->se(2))},
               {"delta2", num(cov->se(3))}};
    j["cov"] = to_json(cov->cov);
    j["sigma_variant"] = to_string(cov->sigma.variant);
    j["sigma_audit"] = {{"positive_definite", cov->sigma.audit.positive_definite},
                        {"min_eigenvalue", num(cov->sigma.audit.min_eigenvalue)}};
  } else {
    j["se"] = nullptr;
  }
  json t = json::array();
  for (const auto& w : tests) t.push_back(to_json(w));
  j["tests"] = t;
  return j;
}

inline json to_json(const mc::Replication& r, const std::vector<std::string>& hyps, std::size_t n,
                    std::size_t m) {
  json j = {{"index", r.index}, {"seed", r.seed}, {"n", n}, {"m", m}, {"ok", r.ok}};
  if (!r.ok) {
    j["error"] = r.error;
    return j;
  }
  j["theta_hat"] = to_json(r.theta_hat);
  j["se"] = {num(r.se(0)), num(r.se(1)), num(r.se(2)), num(r.se(3))};
  json w = json::object();
  for (std::size_t k = 0; k < hyps.size() && k < r.wald.size(); ++k) w[hyps[k]] = num(r.wald[k]);
  j["W"] = w;
  j["flags"] = {{"converged", r.converged},
                {"iterations", r.iterations},
                {"boundary_hit", {r.boundary_hit[0], r.boundary_hit[1], r.boundary_hit[2],
                                  r.boundary_hit[3]}}};
  return j;
}

inline json summary_json(const mc::McResult& res) {
  const auto& c = res.config;
  json cells = json::array();
  for (const auto& cell : res.cells) {
    json tests = json::array();
    for (const auto& t : cell.tests) {
      tests.push_back({{"name", t.name}, {"rejections", t.rejections}, {"valid", t.valid},
                       {"frequency", num(t.frequency())}, {"se", num(t.se())}});
    }
    json params = json::object();
    for (int k = 0; k < 4; ++k) {
      const auto& p = cell.params[k];
      params[kThetaNames[k]] = {{"mean_bias", num(p.mean_bias)}, {"emp_sd", num(p.emp_sd)},
                                {"theory_sd", num(p.theory_sd)}, {"coverage", num(p.coverage)},
                                {"boundary", cell.boundary[k]}};
    }
    cells.push_back({{"n", cell.n}, {"m", cell.m}, {"reps", cell.reps},
                     {"failures", cell.failures}, {"nonconverged", cell.nonconverged},
                     {"tests", tests}, {"params", params}});
  }
  return {{"schema_version", kSchemaVersion},
          {"kind", "mc_summary"},
          {"dgp",
           {{"delta01", c.dgp.delta01}, {"delta02", c.dgp.delta02}, {"ar", c.dgp.ar_coeff},
            {"innov_cov", c.dgp.innovation_covariance()}, {"beta0", c.beta0}}},
          {"truth", to_json(res.truth)},
          {"reps", c.reps},
          {"seed", c.seed},
          {"level", c.level},
          {"psi", to_string(c.psi)},
          {"sigma_variant", to_string(c.sigma_variant)},
          {"cells", cells}};
}

/// n, m, then frequency and SE per hypothesis.
inline void write_summary_csv(std::ostream& out, const mc::McResult& res) {
  out << "n,m";
  for (const auto& h : res.config.hypotheses) out << ',' << h << ',' << h << "_se";
  out << ",failures\n";
  for (const auto& cell : res.cells) {
    out << cell.n << ',' << cell.m;
    for (const auto& t : cell.tests) {
      out << ',' << format_double(t.frequency()) << ',' << format_double(t.se());
    }
    out << ',' << cell.failures << '\n';
  }
}

}  // namespace mlw::io
