// ncpath: solve / path / experiment / gen / check on a key = value config.
// Exit codes: 0 ok, 1 solver failure or non-convergence, 2 configuration error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ncpath/diagnostics.hpp"
#include "ncpath/experiment.hpp"
#include "ncpath/io.hpp"
#include "ncpath/path.hpp"
#include "ncpath/penalty.hpp"
#include "ncpath/prox_solver.hpp"
#include "ncpath/run_config.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace ncpath;

namespace {

constexpr int kOk = 0;
constexpr int kSolverFailure = 1;
constexpr int kConfigError = 2;

struct Overrides {
  std::string config;
  std::optional<unsigned long long> seed;
  std::optional<std::string> out;
  std::optional<int> reps;
  std::optional<int> parallel;
};

RunConfig load(const Overrides& o) {
  if (o.config.empty()) throw ConfigError("--config is required");
  io::KeyValueConfig kv = io::KeyValueConfig::load(o.config);
  if (o.seed) kv.set("seed", std::to_string(*o.seed));
  if (o.out) kv.set("out", *o.out);
  if (o.reps) kv.set("experiment.replications", std::to_string(*o.reps));
  if (o.parallel) kv.set("parallel", std::to_string(*o.parallel));
  RunConfig rc = parse_run_config(kv, fs::path(o.config).parent_path());
  for (const auto& w : rc.warnings) std::cerr << "warning: " << w << '\n';
  fs::create_directories(rc.out_dir);
  return rc;
}

json vec_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index j = 0; j < v.size(); ++j) a.push_back(v[j]);
  return a;
}

json metrics_json(const RecoveryMetrics& m) {
  return {{"tps", m.tps}, {"fps", m.fps}, {"l2_error", m.l2_error}, {"exact_support", m.exact_support}};
}

void write_json(const fs::path& file, const json& j) {
  auto out = io::open_output(file);
  out << j.dump(2) << '\n';
}

int cmd_solve(const Overrides& o) {
  const RunConfig rc = load(o);
  const LoadedProblem prob = load_problem(rc);
  const LossModel model = build_model(rc, prob.data);
  const double l0 = lambda_zero(model);
  double lambda = 0.0;
  if (rc.solve_lambda) lambda = *rc.solve_lambda;
  else if (rc.solve_lambda_frac) lambda = *rc.solve_lambda_frac * l0;
  else lambda = rc.lambda_tgt_for(prob.data.n(), prob.data.d());
  if (!(lambda > 0.0)) throw ConfigError("solve: set solve.lambda, solve.lambda_frac or a path target");

  const PathConfig pc = resolved_path_config(rc, prob.data.n(), prob.data.d());
  const Vector beta_star = prob.truth ? prob.truth->beta_star : Vector();
  const StageResult res =
      proximal_gradient(model, rc.penalty, lambda, rc.solve_eps, Vector::Zero(model.dimension()), pc.L_min, pc.radius,
                        pc.solver_options(), {1, prob.truth ? &beta_star : nullptr});

  {
    auto out = io::open_output(rc.out_dir / "solve_trace.csv");
    io::write_trace_csv(out, res.trace);
  }
  const Suboptimality check = suboptimality(model, rc.penalty, lambda, res.beta, pc.radius);
  json j = {{"loss", to_string(rc.loss)},
            {"penalty", rc.penalty.describe()},
            {"lambda", lambda},
            {"lambda0", l0},
            {"eps", rc.solve_eps},
            {"converged", res.converged},
            {"iterations", res.iters},
            {"omega", res.omega},
            {"omega_recomputed", check.omega},
            {"boundary", res.boundary},
            {"L", res.L},
            {"objective", objective(model, rc.penalty, lambda, res.beta)},
            {"nnz", count_nonzeros(res.beta)},
            {"beta", vec_json(res.beta)}};
  if (prob.truth) j["metrics"] = metrics_json(recovery_metrics(res.beta, *prob.truth, rc.zero_tol));
  write_json(rc.out_dir / "solution.json", j);

  std::printf("lambda = %s  omega = %.3g  iterations = %d  nnz = %d\n", io::format_double(lambda).c_str(), res.omega,
              res.iters, count_nonzeros(res.beta));
  if (!res.converged) {
    std::fprintf(stderr, "error: solver did not reach omega <= %g within %d iterations\n", rc.solve_eps,
                 pc.max_iters);
    return kSolverFailure;
  }
  return kOk;
}

int cmd_path(const Overrides& o) {
  const RunConfig rc = load(o);
  const LoadedProblem prob = load_problem(rc);
  const LossModel model = build_model(rc, prob.data);
  const PathConfig pc = resolved_path_config(rc, prob.data.n(), prob.data.d());
  for (const auto& w : pc.validate(model.kind())) std::cerr << "warning: " << w << '\n';
  const PathSchedule sched = build_schedule(model, pc);
  std::printf("lambda0 = %s  lambda_tgt = %s  N = %d\n", io::format_double(sched.lambda0).c_str(),
              io::format_double(pc.lambda_tgt).c_str(), sched.N);

  const Vector beta_star = prob.truth ? prob.truth->beta_star : Vector();
  const PathResult path = run_path(model, rc.penalty, pc, prob.truth ? &beta_star : nullptr);
  {
    auto out = io::open_output(rc.out_dir / "path_trace.csv");
    io::write_trace_csv(out, path.trace());
  }

  json stages = json::array();
  for (const auto& s : path.stages) {
    stages.push_back({{"t", s.t},
                      {"lambda", s.lambda},
                      {"eps", s.eps},
                      {"iterations", s.result.iters},
                      {"omega", s.result.omega},
                      {"omega_recomputed", suboptimality(model, rc.penalty, s.lambda, s.result.beta, pc.radius).omega},
                      {"converged", s.result.converged},
                      {"boundary", s.result.boundary},
                      {"nnz", count_nonzeros(s.result.beta)},
                      {"L", s.result.L}});
  }
  json j = {{"loss", to_string(rc.loss)},
            {"penalty", rc.penalty.describe()},
            {"lambda0", sched.lambda0},
            {"lambda_tgt", pc.lambda_tgt},
            {"eta", pc.eta},
            {"N", sched.N},
            {"all_converged", path.all_converged()},
            {"total_iterations", path.total_iterations()},
            {"objective", objective(model, rc.penalty, pc.lambda_tgt, path.final_beta())},
            {"stages", stages},
            {"beta", vec_json(path.final_beta())}};
  if (prob.truth) j["metrics"] = metrics_json(recovery_metrics(path.final_beta(), *prob.truth, rc.zero_tol));
  write_json(rc.out_dir / "path_summary.json", j);

  std::printf("iterations = %d  nnz = %d  converged = %s\n", path.total_iterations(),
              count_nonzeros(path.final_beta()), path.all_converged() ? "yes" : "no");
  if (!path.all_converged()) {
    std::fprintf(stderr, "error: at least one path stage did not converge\n");
    return kSolverFailure;
  }
  return kOk;
}

int cmd_experiment(const Overrides& o) {
  const RunConfig rc = load(o);
  if (rc.data_file && !rc.truth_file) throw ConfigError("experiment on a data file needs a truth file");
  const auto results = run_experiment(rc, rc.replications, rc.parallel);
  const auto agg = aggregate(rc, results);
  {
    auto out = io::open_output(rc.out_dir / "replications.csv");
    write_replications_csv(out, results);
  }
  {
    auto out = io::open_output(rc.out_dir / "aggregate.csv");
    write_aggregate_csv(out, agg);
  }

  json reps = json::array();
  for (const auto& r : results) {
    json jr = {{"rep", r.replication}, {"lambda0", r.lambda0}, {"lambda_tgt", r.lambda_tgt}, {"N", r.N}};
    if (!r.error.empty()) jr["error"] = r.error;
    json ms = json::object();
    for (const auto& m : r.methods) {
      json jm = {{"ok", m.ok}, {"nnz", m.nnz}, {"iterations", m.iterations}, {"converged", m.converged}};
      if (m.beta.size() > 0) jm["metrics"] = metrics_json(m.metrics);
      if (m.method != Method::Oracle) jm["omega"] = m.omega;
      if (!m.error.empty()) jm["error"] = m.error;
      ms[to_string(m.method)] = jm;
    }
    jr["methods"] = ms;
    reps.push_back(jr);
  }
  write_json(rc.out_dir / "metrics.json", {{"replications", reps}, {"failed", failed_replications(results)}});

  if (!results.empty() && results.front().error.empty()) {
    for (const auto& m : results.front().methods) {
      if (m.method == Method::Oracle) continue;
      auto out = io::open_output(rc.out_dir / ("trace_rep0_" + to_string(m.method) + ".csv"));
      io::write_trace_csv(out, m.trace);
    }
  }

  std::printf("%-15s %5s %16s %16s %16s %8s\n", "method", "ok", "tps", "fps", "l2_error", "exact");
  for (const auto& a : agg) {
    auto cell = [](const Summary& s) {
      char buf[64];
      if (!s.count) return std::string("-");
      if (s.se) std::snprintf(buf, sizeof buf, "%.3f (%.3f)", s.mean, *s.se);
      else std::snprintf(buf, sizeof buf, "%.3f", s.mean);
      return std::string(buf);
    };
    std::printf("%-15s %5d %16s %16s %16s %8s\n", to_string(a.method).c_str(), a.ok, cell(a.tps).c_str(),
                cell(a.fps).c_str(), cell(a.l2_error).c_str(), cell(a.exact_support).c_str());
  }
  const int failed = failed_replications(results);
  if (failed > 0) std::fprintf(stderr, "%d of %d replications had failures\n", failed, rc.replications);
  return too_many_failures(results) ? kSolverFailure : kOk;
}

int cmd_gen(const Overrides& o) {
  const RunConfig rc = load(o);
  if (rc.data_file) throw ConfigError("gen needs a generator design, not a data file");
  for (int r = 0; r < rc.replications; ++r) {
    const Problem p = gen_problem(rc.design.for_replication(static_cast<std::uint64_t>(r)));
    const std::string suffix = rc.replications == 1 ? "" : "_r" + std::to_string(r);
    auto data = io::open_output(rc.out_dir / ("data" + suffix + ".csv"));
    io::write_design_csv(data, p.data);
    auto truth = io::open_output(rc.out_dir / ("truth" + suffix + ".csv"));
    io::write_truth_csv(truth, p.truth);
  }
  std::printf("wrote %d problem(s) to %s\n", rc.replications, rc.out_dir.string().c_str());
  return kOk;
}

/// Penalty regularity on a fixed grid, gradient vs central differences, and
/// the lambda0 certificate of the configured problem.
int cmd_check(const Overrides& o) {
  const RunConfig rc = load(o);
  bool all = true;
  auto report = [&](bool ok, const std::string& what) {
    std::printf("%s  %s\n", ok ? "PASS" : "FAIL", what.c_str());
    all = all && ok;
  };

  std::vector<double> lambdas{0.05, 0.5, 1.0, 2.0};
  std::vector<double> betas(10000);
  for (std::size_t i = 0; i < betas.size(); ++i) betas[i] = -10.0 + 20.0 * static_cast<double>(i) / 9999.0;
  const RegularityReport reg = check_regularity(rc.penalty, lambdas, betas);
  for (const auto& c : reg.conditions) {
    report(c.passed, std::string("regularity (") + c.label + ") " + c.description);
  }

  const LoadedProblem prob = load_problem(rc);
  const LossModel model = build_model(rc, prob.data);
  const double l0 = lambda_zero(model);
  const double lambda = rc.lambda_tgt_for(prob.data.n(), prob.data.d()) > 0.0
                            ? rc.lambda_tgt_for(prob.data.n(), prob.data.d())
                            : 0.1 * l0;
  std::mt19937_64 rng(rc.design.seed);
  std::normal_distribution<double> z(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 3; ++trial) {
    Vector beta(model.dimension());
    for (Eigen::Index j = 0; j < beta.size(); ++j) beta[j] = 0.5 * z(rng);
    const Vector g = surrogate_grad(model, rc.penalty, lambda, beta);
    const Eigen::Index probes = std::min<Eigen::Index>(beta.size(), 20);
    for (Eigen::Index k = 0; k < probes; ++k) {
      const Eigen::Index j = (k * beta.size()) / probes;
      const double h = 1e-6 * std::max(1.0, std::abs(beta[j]));
      Vector bp = beta, bm = beta;
      bp[j] += h;
      bm[j] -= h;
      const double fd = (surrogate_value(model, rc.penalty, lambda, bp) - surrogate_value(model, rc.penalty, lambda, bm)) /
                        (2.0 * h);
      worst = std::max(worst, std::abs(fd - g[j]) / std::max(1.0, std::abs(g[j])));
    }
  }
  char buf[128];
  std::snprintf(buf, sizeof buf, "surrogate gradient vs central differences (max rel. error %.2e)", worst);
  report(worst <= 1e-5, buf);

  const Vector zero = Vector::Zero(model.dimension());
  const bool stays = count_nonzeros(prox_step(model, rc.penalty, l0, 1.0, zero, rc.path.radius)) == 0;
  const bool leaves = count_nonzeros(prox_step(model, rc.penalty, 0.99 * l0, 1.0, zero, rc.path.radius)) > 0;
  report(stays && leaves, "lambda0 certificate (prox from 0 stays at 0 at lambda0, moves at 0.99 lambda0)");
  return all ? kOk : kSolverFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Approximate path following for sparse nonconvex penalized M-estimation"};
  app.require_subcommand(1);
  Overrides o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "key = value configuration file")->required();
    sub->add_option("--seed", o.seed, "override the base seed");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--reps", o.reps, "number of replications");
    sub->add_option("--parallel", o.parallel, "worker threads for replications");
  };
  auto* solve = app.add_subcommand("solve", "one proximal-gradient solve at a fixed lambda");
  auto* path = app.add_subcommand("path", "full regularization path down to lambda_tgt");
  auto* exper = app.add_subcommand("experiment", "Monte Carlo comparison against the l1 baseline and oracle");
  auto* gen = app.add_subcommand("gen", "write synthetic data and ground truth as CSV");
  auto* check = app.add_subcommand("check", "penalty regularity and gradient self-tests");
  for (auto* s : {solve, path, exper, gen, check}) add_common(s);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (*solve) return cmd_solve(o);
    if (*path) return cmd_path(o);
    if (*exper) return cmd_experiment(o);
    if (*gen) return cmd_gen(o);
    if (*check) return cmd_check(o);
  } catch (const std::invalid_argument& e) {  // ConfigError, DimensionError
    std::fprintf(stderr, "error: %s\n", e.what());
    return kConfigError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kSolverFailure;
  }
  return kOk;
}
