#pragma once

// Approximate regularization path: lambda_t = eta^t * lambda_0 down to
// lambda_tgt, each stage warm-started from the previous stage's solution and
// quadratic coefficient, solved to precision lambda_t/4 (eps_opt at the end).

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ncpath/error.hpp"
#include "ncpath/loss.hpp"
#include "ncpath/penalty.hpp"
#include "ncpath/prox_solver.hpp"

namespace ncpath {

struct PathConfig {
  double eta = 0.9;
  double lambda_tgt = 0.0;
  double eps_opt = 1e-6;
  double L_min = 1e-6;
  double radius = kInfiniteRadius;
  int max_iters = 10000;
  int max_doublings = 60;
  bool fast_path = true;

  SolverOptions solver_options() const { return {L_min, max_iters, max_doublings, fast_path}; }

  /// Throws ConfigError on invalid values; returns non-fatal warnings.
  std::vector<std::string> validate(LossKind loss) const {
    if (!(eta >= 0.9 && eta < 1.0)) throw ConfigError("path.eta must lie in [0.9, 1)");
    if (!(lambda_tgt > 0.0)) throw ConfigError("path.lambda_tgt must be positive");
    if (!(eps_opt > 0.0)) throw ConfigError("path.eps_opt must be positive");
    if (!(L_min > 0.0)) throw ConfigError("path.L_min must be positive");
    if (!(radius > 0.0)) throw ConfigError("path.radius must be positive");
    if (max_iters < 1) throw ConfigError("path.max_iters must be >= 1");
    if (loss == LossKind::Logistic && !std::isfinite(radius)) {
      throw ConfigError("logistic loss requires a finite path.radius");
    }
    std::vector<std::string> warnings;
    if (eps_opt > lambda_tgt / 40.0) {
      warnings.push_back("path.eps_opt is not much smaller than lambda_tgt/4 (threshold lambda_tgt/40)");
    }
    return warnings;
  }
};

struct PathSchedule {
  double lambda0 = 0.0;
  int N = 0;
  /// lambdas[t], t = 0..N; lambdas[N] == lambda_tgt exactly.
  std::vector<double> lambdas;
  /// eps[t], t = 1..N (eps[0] unused, set to 0).
  std::vector<double> eps;
};

inline PathSchedule build_schedule(double lambda0, const PathConfig& cfg) {
  if (!(cfg.eta >= 0.9 && cfg.eta < 1.0)) throw ConfigError("path.eta must lie in [0.9, 1)");
  if (!(cfg.lambda_tgt > 0.0)) throw ConfigError("path.lambda_tgt must be positive");
  if (cfg.lambda_tgt >= lambda0) {
    throw ConfigError("target exceeds lambda0: solution path is identically zero (lambda_tgt = " +
                      std::to_string(cfg.lambda_tgt) + ", lambda0 = " + std::to_string(lambda0) + ")");
  }
  const double stages = std::log(lambda0 / cfg.lambda_tgt) / std::log(1.0 / cfg.eta);
  // Absorb round-off when the ratio is an exact power of eta.
  const int N = std::max(1, static_cast<int>(std::ceil(stages - 1e-9)));

  PathSchedule s;
  s.lambda0 = lambda0;
  s.N = N;
  s.lambdas.resize(N + 1);
  s.eps.resize(N + 1);
  s.lambdas[0] = lambda0;
  s.eps[0] = 0.0;
  for (int t = 1; t < N; ++t) {
    s.lambdas[t] = std::pow(cfg.eta, t) * lambda0;
    s.eps[t] = s.lambdas[t] / 4.0;
  }
  s.lambdas[N] = cfg.lambda_tgt;
  s.eps[N] = cfg.eps_opt;
  return s;
}

inline PathSchedule build_schedule(const LossModel& model, const PathConfig& cfg) {
  return build_schedule(lambda_zero(model), cfg);
}

struct StageSolution {
  int t = 0;
  double lambda = 0.0;
  double eps = 0.0;
  StageResult result;
};

struct PathResult {
  PathSchedule schedule;
  std::vector<StageSolution> stages;

  bool all_converged() const {
    for (const auto& s : stages) {
      if (!s.result.converged) return false;
    }
    return true;
  }

  const Vector& final_beta() const { return stages.back().result.beta; }

  int total_iterations() const {
    int k = 0;
    for (const auto& s : stages) k += s.result.iters;
    return k;
  }

  /// All trace records across stages, in order.
  std::vector<TraceRecord> trace() const {
    std::vector<TraceRecord> out;
    for (const auto& s : stages) out.insert(out.end(), s.result.trace.begin(), s.result.trace.end());
    return out;
  }
};

/// Run every stage t = 1..N. Non-converged stages are flagged, not fatal.
inline PathResult run_path(const LossModel& model, const PenaltySpec& spec, const PathConfig& cfg,
                           const Vector* beta_star = nullptr) {
  cfg.validate(model.kind());
  if (beta_star != nullptr && beta_star->size() != model.dimension()) {
    throw DimensionError("run_path: ground truth has wrong length");
  }
  PathResult out;
  out.schedule = build_schedule(model, cfg);
  const SolverOptions opt = cfg.solver_options();

  Vector beta = Vector::Zero(model.dimension());
  double L = cfg.L_min;
  for (int t = 1; t <= out.schedule.N; ++t) {
    StageSolution st;
    st.t = t;
    st.lambda = out.schedule.lambdas[t];
    st.eps = out.schedule.eps[t];
    st.result = proximal_gradient(model, spec, st.lambda, st.eps, beta, L, cfg.radius, opt, {t, beta_star});
    beta = st.result.beta;
    L = st.result.L;
    out.stages.push_back(std::move(st));
  }
  return out;
}

/// lambda_tgt = C * sqrt(log d / n).
inline double lambda_target_rule(double C, Eigen::Index n, Eigen::Index d) {
  return C * std::sqrt(std::log(static_cast<double>(d)) / static_cast<double>(n));
}

/// Elliptical variant: C * ||beta||_1 * sqrt(log d / n), with a pilot estimate of ||beta||_1.
inline double lambda_target_rule_elliptical(double C, double beta_l1, Eigen::Index n, Eigen::Index d) {
  return C * beta_l1 * std::sqrt(std::log(static_cast<double>(d)) / static_cast<double>(n));
}

}  // namespace ncpath
