#pragma once

// Run configuration for the command-line tool, read from a flat key = value
// file. See configs/ for annotated examples; the full key list is in README.md.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ncpath/data_gen.hpp"
#include "ncpath/error.hpp"
#include "ncpath/io.hpp"
#include "ncpath/loss.hpp"
#include "ncpath/path.hpp"
#include "ncpath/penalty.hpp"
#include "ncpath/robust_stats.hpp"

namespace ncpath {

enum class Method { NcPath, LassoBaseline, Oracle };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::NcPath: return "ncpath";
    case Method::LassoBaseline: return "lasso_baseline";
    case Method::Oracle: return "oracle";
  }
  return "?";
}

struct RunConfig {
  LossKind loss = LossKind::LeastSquares;

  // Data: a CSV file, or the generator design below.
  std::optional<std::filesystem::path> data_file;
  std::string response_column = "0";
  std::optional<std::filesystem::path> truth_file;
  ExperimentDesign design;

  PenaltySpec penalty = PenaltySpec::mcp(2.0);

  PathConfig path;
  /// lambda_tgt = C sqrt(log d / n) when set; overrides path.lambda_tgt.
  std::optional<double> lambda_tgt_c;

  // solve: lambda given directly or as a fraction of lambda0.
  std::optional<double> solve_lambda;
  std::optional<double> solve_lambda_frac;
  double solve_eps = 1e-6;

  int replications = 1;
  std::vector<Method> methods{Method::NcPath, Method::LassoBaseline, Method::Oracle};
  double zero_tol = 1e-8;

  EllipticalCovOptions catoni;

  std::filesystem::path out_dir = "out";
  int parallel = 1;

  std::vector<std::string> warnings;

  /// lambda_tgt for a problem of size n x d.
  double lambda_tgt_for(Eigen::Index n, Eigen::Index d) const {
    return lambda_tgt_c ? lambda_target_rule(*lambda_tgt_c, n, d) : path.lambda_tgt;
  }
};

namespace detail {

inline LossKind parse_loss(const std::string& s) {
  if (s == "ls" || s == "least_squares") return LossKind::LeastSquares;
  if (s == "logistic") return LossKind::Logistic;
  if (s == "elliptical") return LossKind::Elliptical;
  throw ConfigError("loss: expected ls, logistic or elliptical, got '" + s + "'");
}

inline DesignKind parse_design(const std::string& s) {
  if (s == "ar_gaussian") return DesignKind::ARGaussian;
  if (s == "ar_t") return DesignKind::ART;
  if (s == "equicorrelated") return DesignKind::EquicorrelatedGaussian;
  throw ConfigError("gen.design: expected ar_gaussian, ar_t or equicorrelated, got '" + s + "'");
}

inline std::vector<Method> parse_methods(const std::string& s) {
  std::vector<Method> out;
  for (const auto& tok : io::split(s, ',')) {
    if (tok == "ncpath") out.push_back(Method::NcPath);
    else if (tok == "lasso_baseline") out.push_back(Method::LassoBaseline);
    else if (tok == "oracle") out.push_back(Method::Oracle);
    else throw ConfigError("experiment.methods: unknown method '" + tok + "'");
  }
  if (out.empty()) throw ConfigError("experiment.methods: empty list");
  return out;
}

}  // namespace detail

/// Parse and validate. Relative file paths resolve against base_dir.
inline RunConfig parse_run_config(const io::KeyValueConfig& kv, const std::filesystem::path& base_dir = {}) {
  RunConfig rc;
  rc.loss = detail::parse_loss(kv.get_string("loss", "ls"));

  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
  };
  if (auto f = kv.get("data")) {
    rc.data_file = resolve(*f);
    if (!std::filesystem::exists(*rc.data_file)) throw ConfigError("data file not found: " + rc.data_file->string());
  }
  rc.response_column = kv.get_string("response", "0");
  if (auto f = kv.get("truth")) {
    rc.truth_file = resolve(*f);
    if (!std::filesystem::exists(*rc.truth_file)) throw ConfigError("truth file not found: " + rc.truth_file->string());
  }

  ExperimentDesign& g = rc.design;
  g.n = kv.get_int("gen.n", g.n);
  g.d = kv.get_int("gen.d", g.d);
  g.s_star = kv.get_int("gen.s_star", g.s_star);
  g.design = detail::parse_design(kv.get_string("gen.design", "ar_gaussian"));
  g.rho = kv.get_double("gen.rho", g.rho);
  g.design_dof = kv.get_double("gen.design_dof", g.design_dof);
  const std::string signal = kv.get_string("gen.signal", "gaussian");
  if (signal == "gaussian") g.signal = SignalKind::GaussianCoeffs;
  else if (signal == "plus_minus") g.signal = SignalKind::PlusMinus;
  else throw ConfigError("gen.signal: expected gaussian or plus_minus, got '" + signal + "'");
  g.magnitude = kv.get_double("gen.magnitude", g.magnitude);
  const std::string noise = kv.get_string("gen.noise", "gaussian");
  if (noise == "gaussian") g.noise = NoiseKind::Gaussian;
  else if (noise == "t") g.noise = NoiseKind::T;
  else throw ConfigError("gen.noise: expected gaussian or t, got '" + noise + "'");
  g.noise_sd = kv.get_double("gen.noise_sd", g.noise_sd);
  g.noise_dof = kv.get_double("gen.noise_dof", g.noise_dof);
  g.noise_variance = kv.get_double("gen.noise_variance", g.noise_variance);
  g.response = rc.loss == LossKind::Logistic ? ResponseKind::Logistic : ResponseKind::Linear;
  const long long seed = kv.get_int("seed", 1);
  if (seed < 0) throw ConfigError("seed must be nonnegative");
  g.seed = static_cast<std::uint64_t>(seed);
  if (!rc.data_file) g.validate();

  const std::string pen = kv.get_string("penalty", "mcp");
  if (pen == "scad") rc.penalty = PenaltySpec::scad(kv.get_double("penalty.a", 3.7));
  else if (pen == "mcp") rc.penalty = PenaltySpec::mcp(kv.get_double("penalty.b", 2.0));
  else if (pen == "l1") rc.penalty = PenaltySpec::l1();
  else throw ConfigError("penalty: expected scad, mcp or l1, got '" + pen + "'");

  PathConfig& pc = rc.path;
  pc.eta = kv.get_double("path.eta", pc.eta);
  rc.lambda_tgt_c = kv.get_optional_double("path.lambda_tgt_c");
  const auto lt = kv.get_optional_double("path.lambda_tgt");
  if (lt && rc.lambda_tgt_c) throw ConfigError("set only one of path.lambda_tgt and path.lambda_tgt_c");
  pc.lambda_tgt = lt.value_or(rc.lambda_tgt_c ? 1.0 : 0.0);  // placeholder until n, d are known
  pc.eps_opt = kv.get_double("path.eps_opt", pc.eps_opt);
  pc.L_min = kv.get_double("path.L_min", pc.L_min);
  pc.radius = kv.get_double("path.radius", pc.radius);
  pc.max_iters = static_cast<int>(kv.get_int("path.max_iters", pc.max_iters));
  pc.max_doublings = static_cast<int>(kv.get_int("path.max_doublings", pc.max_doublings));
  pc.fast_path = kv.get_bool("path.fast_path", pc.fast_path);
  if (rc.lambda_tgt_c && !(*rc.lambda_tgt_c > 0.0)) throw ConfigError("path.lambda_tgt_c must be positive");

  rc.solve_lambda = kv.get_optional_double("solve.lambda");
  rc.solve_lambda_frac = kv.get_optional_double("solve.lambda_frac");
  if (rc.solve_lambda && rc.solve_lambda_frac) throw ConfigError("set only one of solve.lambda and solve.lambda_frac");
  if (rc.solve_lambda && !(*rc.solve_lambda > 0.0)) throw ConfigError("solve.lambda must be positive");
  if (rc.solve_lambda_frac && !(*rc.solve_lambda_frac > 0.0)) throw ConfigError("solve.lambda_frac must be positive");
  rc.solve_eps = kv.get_double("solve.eps", rc.solve_eps);
  if (!(rc.solve_eps > 0.0)) throw ConfigError("solve.eps must be positive");

  rc.replications = static_cast<int>(kv.get_int("experiment.replications", 1));
  if (rc.replications < 1) throw ConfigError("experiment.replications must be >= 1");
  if (auto m = kv.get("experiment.methods")) rc.methods = detail::parse_methods(*m);
  rc.zero_tol = kv.get_double("experiment.zero_tol", rc.zero_tol);
  if (!(rc.zero_tol >= 0.0)) throw ConfigError("experiment.zero_tol must be >= 0");

  if (auto d = kv.get_optional_double("catoni.delta")) {
    if (!(*d > 0.0 && *d < 1.0)) throw ConfigError("catoni.delta must lie in (0, 1)");
    rc.catoni.delta = *d;
  }
  rc.catoni.v_mean = kv.get_optional_double("catoni.v_mean");
  rc.catoni.v_second = kv.get_optional_double("catoni.v_second");
  const std::string bound = kv.get_string("catoni.bound", "twice_median");
  if (bound == "twice_median") rc.catoni.bound = VarianceBound::TwiceMedian;
  else if (bound == "twice_max") rc.catoni.bound = VarianceBound::TwiceMax;
  else if (bound == "per_column") rc.catoni.bound = VarianceBound::PerColumn;
  else throw ConfigError("catoni.bound: expected twice_median, twice_max or per_column, got '" + bound + "'");

  rc.out_dir = kv.get_string("out", "out");
  rc.parallel = static_cast<int>(kv.get_int("parallel", 1));
  if (rc.parallel < 1) throw ConfigError("parallel must be >= 1");

  if (rc.loss == LossKind::Logistic && !std::isfinite(pc.radius)) {
    throw ConfigError("logistic loss requires a finite path.radius");
  }
  if (rc.data_file && rc.replications > 1) {
    throw ConfigError("experiment.replications > 1 needs a generator design, not a data file");
  }
  for (const auto& k : kv.unused_keys()) rc.warnings.push_back("unknown config key '" + k + "' ignored");
  return rc;
}

inline RunConfig load_run_config(const std::filesystem::path& file) {
  return parse_run_config(io::KeyValueConfig::load(file), file.parent_path());
}

}  // namespace ncpath
