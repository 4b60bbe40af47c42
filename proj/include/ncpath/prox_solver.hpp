#pragma once

// One regularization stage: proximal-gradient iterations on
//   phi_lambda(beta) = L(beta) + Q_lambda(beta) + lambda*||beta||_1
// with the quadratic coefficient found by doubling line search and the loop
// stopped by the subgradient suboptimality certificate omega_lambda.

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ncpath/error.hpp"
#include "ncpath/loss.hpp"
#include "ncpath/penalty.hpp"

namespace ncpath {

inline constexpr double kInfiniteRadius = std::numeric_limits<double>::infinity();

/// Per-iteration record. iter == 0 is the stage's starting point.
struct TraceRecord {
  int stage = 0;
  int iter = 0;
  double lambda = 0.0;
  double L = 0.0;
  double phi = 0.0;
  double omega = 0.0;
  int nnz = 0;
  std::optional<double> l2_err;
  double phi_prev = 0.0;  ///< phi at the previous iterate (same lambda)
  double step_sq = 0.0;   ///< ||beta^k - beta^{k-1}||^2
  int doublings = 0;      ///< line-search doublings spent on this iterate
  bool boundary = false;
};

struct SolverOptions {
  double L_min = 1e-6;
  int max_iters = 10000;
  int max_doublings = 60;
  /// Return beta0 untouched when it already certifies omega <= eps.
  bool fast_path = true;
};

struct StageResult {
  Vector beta;
  double L = 0.0;
  int iters = 0;
  double omega = 0.0;
  bool converged = false;
  /// Some accepted iterate sat on the ball boundary, where omega uses the
  /// interior formula.
  bool boundary = false;
  std::vector<TraceRecord> trace;
};

inline int count_nonzeros(const Eigen::Ref<const Vector>& beta) {
  return static_cast<int>((beta.array() != 0.0).count());
}

inline bool on_boundary(const Eigen::Ref<const Vector>& beta, double radius) {
  return std::isfinite(radius) && beta.norm() >= radius * (1.0 - 1e-12);
}

/// psi_{L,lambda}(beta; beta_ref): linearized surrogate plus proximal term and l1.
inline double quad_approx(const LossModel& model, const PenaltySpec& spec, double lambda, double L,
                          const Eigen::Ref<const Vector>& beta_ref, const Eigen::Ref<const Vector>& beta) {
  const Vector g = surrogate_grad(model, spec, lambda, beta_ref);
  const Vector delta = beta - beta_ref;
  return surrogate_value(model, spec, lambda, beta_ref) + g.dot(delta) + 0.5 * L * delta.squaredNorm() +
         lambda * beta.lpNorm<1>();
}

/// Soft-threshold beta_ref - grad/L at lambda/L, then rescale into B_2(R).
/// Ties |beta_bar_j| == lambda/L go to zero.
inline Vector prox_from_gradient(const Eigen::Ref<const Vector>& beta_ref, const Eigen::Ref<const Vector>& grad,
                                 double lambda, double L, double radius) {
  if (!grad.allFinite()) throw SolverError("prox step: non-finite gradient");
  const double thr = lambda / L;
  Vector out(beta_ref.size());
  for (Eigen::Index j = 0; j < out.size(); ++j) {
    const double bar = beta_ref[j] - grad[j] / L;
    const double mag = std::abs(bar);
    out[j] = mag <= thr ? 0.0 : (bar > 0.0 ? mag - thr : thr - mag);
  }
  if (std::isfinite(radius)) {
    const double nrm = out.norm();
    if (nrm >= radius) out *= radius / nrm;
  }
  return out;
}

inline Vector prox_step(const LossModel& model, const PenaltySpec& spec, double lambda, double L,
                        const Eigen::Ref<const Vector>& beta_ref, double radius = kInfiniteRadius) {
  if (!(L > 0.0)) throw ConfigError("prox_step: L must be positive");
  return prox_from_gradient(beta_ref, surrogate_grad(model, spec, lambda, beta_ref), lambda, L, radius);
}

/// omega_lambda(beta) = min over subgradients xi of ||grad + lambda*xi||_inf,
/// given grad = surrogate gradient at beta.
inline double suboptimality_from_gradient(const Eigen::Ref<const Vector>& beta, const Eigen::Ref<const Vector>& grad,
                                          double lambda) {
  double worst = 0.0;
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    const double c = beta[j] != 0.0 ? std::abs(grad[j] + (beta[j] > 0.0 ? lambda : -lambda))
                                    : std::max(std::abs(grad[j]) - lambda, 0.0);
    worst = std::max(worst, c);
  }
  return worst;
}

struct Suboptimality {
  double omega = 0.0;
  bool boundary = false;
};

inline Suboptimality suboptimality(const LossModel& model, const PenaltySpec& spec, double lambda,
                                   const Eigen::Ref<const Vector>& beta, double radius = kInfiniteRadius) {
  const Vector g = surrogate_grad(model, spec, lambda, beta);
  return {suboptimality_from_gradient(beta, g, lambda), on_boundary(beta, radius)};
}

struct LineSearchResult {
  Vector beta;
  double L = 0.0;
  int doublings = 0;
  double surrogate = 0.0;  ///< L + Q at beta
};

namespace detail {

/// Line search with the gradient at beta_prev precomputed.
inline LineSearchResult line_search(const LossModel& model, const PenaltySpec& spec, double lambda,
                                    const Eigen::Ref<const Vector>& beta_prev, const Eigen::Ref<const Vector>& grad_prev,
                                    double L_init, double radius, int max_doublings) {
  double L = L_init;
  for (int doublings = 0; doublings <= max_doublings; ++doublings) {
    Vector cand = prox_from_gradient(beta_prev, grad_prev, lambda, L, radius);
    const Vector delta = cand - beta_prev;
    // phi(cand) <= psi(cand) is equivalent to Bregman(cand; prev) <= L/2 ||delta||^2.
    // Comparing function values directly cancels catastrophically once the
    // steps are tiny and lets too-small L through, which stalls omega.
    const double quad = 0.5 * L * delta.squaredNorm();
    const double breg = surrogate_bregman(model, spec, lambda, beta_prev, delta);
    if (std::isfinite(breg) && breg <= quad * (1.0 + 1e-12)) {
      const double sur = surrogate_value(model, spec, lambda, cand);
      if (std::isfinite(sur)) return {std::move(cand), L, doublings, sur};
    }
    L *= 2.0;
  }
  throw SolverError("line search diverged: no majorizing L after " + std::to_string(max_doublings) +
                    " doublings (non-finite data or broken gradient?)");
}

}  // namespace detail

/// Algorithm: double L from L_init until phi(beta+) <= psi_L(beta+; beta_prev).
inline LineSearchResult line_search(const LossModel& model, const PenaltySpec& spec, double lambda,
                                    const Eigen::Ref<const Vector>& beta_prev, double L_init,
                                    double radius = kInfiniteRadius, int max_doublings = 60) {
  if (!(L_init > 0.0)) throw ConfigError("line_search: L_init must be positive");
  const Vector g = surrogate_grad(model, spec, lambda, beta_prev);
  return detail::line_search(model, spec, lambda, beta_prev, g, L_init, radius, max_doublings);
}

/// Context attached to trace records; never affects the iterates.
struct TraceContext {
  int stage = 0;
  const Vector* beta_star = nullptr;
};

inline StageResult proximal_gradient(const LossModel& model, const PenaltySpec& spec, double lambda, double eps,
                                     const Eigen::Ref<const Vector>& beta0, double L0,
                                     double radius = kInfiniteRadius, const SolverOptions& opt = {},
                                     const TraceContext& ctx = {}) {
  if (!(lambda > 0.0)) throw ConfigError("proximal_gradient: lambda must be positive");
  if (!(eps > 0.0)) throw ConfigError("proximal_gradient: eps must be positive");
  if (!(L0 > 0.0)) throw ConfigError("proximal_gradient: L0 must be positive");
  if (!(radius > 0.0)) throw ConfigError("proximal_gradient: radius must be positive");
  if (beta0.size() != model.dimension()) throw DimensionError("proximal_gradient: beta0 has wrong length");

  StageResult res;
  res.beta = beta0;
  if (std::isfinite(radius) && res.beta.norm() > radius) res.beta *= radius / res.beta.norm();
  res.L = L0;

  auto make_record = [&](int iter, double L, double sur, double omega) {
    TraceRecord r;
    r.stage = ctx.stage;
    r.iter = iter;
    r.lambda = lambda;
    r.L = L;
    r.phi = sur + lambda * res.beta.lpNorm<1>();
    r.omega = omega;
    r.nnz = count_nonzeros(res.beta);
    if (ctx.beta_star != nullptr) r.l2_err = (res.beta - *ctx.beta_star).norm();
    r.boundary = on_boundary(res.beta, radius);
    return r;
  };

  Vector grad = surrogate_grad(model, spec, lambda, res.beta);
  double sur = surrogate_value(model, spec, lambda, res.beta);
  res.omega = suboptimality_from_gradient(res.beta, grad, lambda);
  res.trace.push_back(make_record(0, L0, sur, res.omega));

  if (opt.fast_path && res.omega <= eps) {
    res.converged = true;
    res.boundary = res.trace.back().boundary;
    return res;
  }

  for (int k = 1; k <= opt.max_iters; ++k) {
    const double L_init = std::max(opt.L_min, res.L / 2.0);
    const double phi_prev = res.trace.back().phi;
    LineSearchResult step = detail::line_search(model, spec, lambda, res.beta, grad, L_init, radius,
                                                opt.max_doublings);
    const double step_sq = (step.beta - res.beta).squaredNorm();
    res.beta = std::move(step.beta);
    res.L = step.L;
    sur = step.surrogate;
    grad = surrogate_grad(model, spec, lambda, res.beta);
    res.omega = suboptimality_from_gradient(res.beta, grad, lambda);
    res.iters = k;

    TraceRecord rec = make_record(k, step.L, sur, res.omega);
    rec.phi_prev = phi_prev;
    rec.step_sq = step_sq;
    rec.doublings = step.doublings;
    res.boundary = res.boundary || rec.boundary;
    res.trace.push_back(rec);

    if (res.omega <= eps) {
      res.converged = true;
      return res;
    }
  }
  return res;
}

}  // namespace ncpath
