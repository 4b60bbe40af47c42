#pragma once

// Evaluation tooling: oracle estimator on the true support, support-recovery
// metrics, sparse-eigenvalue probes of the loss Hessian, objective-gap traces
// along a computed path.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "ncpath/error.hpp"
#include "ncpath/ground_truth.hpp"
#include "ncpath/loss.hpp"
#include "ncpath/path.hpp"
#include "ncpath/penalty.hpp"

namespace ncpath {

// ---------------------------------------------------------------------------
// Oracle estimator: argmin L(beta) subject to supp(beta) in S.

namespace detail {

inline void check_support(std::span<const Eigen::Index> support, Eigen::Index d) {
  if (support.empty()) throw ConfigError("oracle_estimator: support must be non-empty");
  for (Eigen::Index j : support) {
    if (j < 0 || j >= d) throw DimensionError("oracle_estimator: support index out of range");
  }
}

inline Matrix select_columns(const Matrix& X, std::span<const Eigen::Index> support) {
  Matrix out(X.rows(), static_cast<Eigen::Index>(support.size()));
  for (std::size_t k = 0; k < support.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = X.col(support[k]);
  return out;
}

}  // namespace detail

inline Vector oracle_estimator(const LossModel& model, std::span<const Eigen::Index> support,
                               double radius = kInfiniteRadius) {
  const Eigen::Index d = model.dimension();
  detail::check_support(support, d);
  const auto s = static_cast<Eigen::Index>(support.size());
  Vector beta = Vector::Zero(d);

  switch (model.kind()) {
    case LossKind::LeastSquares: {
      const DesignData& data = *model.design();
      const Matrix XS = detail::select_columns(data.X, support);
      Eigen::ColPivHouseholderQR<Matrix> qr(XS);
      if (qr.rank() < s) {
        throw SolverError("oracle_estimator: restricted design has rank " + std::to_string(qr.rank()) + " < |S| = " +
                          std::to_string(s));
      }
      const Vector bS = qr.solve(data.y);
      for (Eigen::Index k = 0; k < s; ++k) beta[support[k]] = bS[k];
      return beta;
    }
    case LossKind::Elliptical: {
      // Restricted quadratic: K_SS b = K_XY,S, needs K_SS positive definite.
      const EllipticalCov& cov = *model.covariance();
      Matrix KS(s, s);
      Vector rhs(s);
      for (Eigen::Index a = 0; a < s; ++a) {
        rhs[a] = cov.K_XY[support[a]];
        for (Eigen::Index b = 0; b < s; ++b) KS(a, b) = cov.K_X(support[a], support[b]);
      }
      Eigen::LLT<Matrix> llt(KS);
      if (llt.info() != Eigen::Success) {
        throw SolverError("oracle_estimator: restricted covariance block is not positive definite");
      }
      const Vector bS = llt.solve(rhs);
      for (Eigen::Index k = 0; k < s; ++k) beta[support[k]] = bS[k];
      if (std::isfinite(radius) && beta.norm() > radius) {
        throw SolverError("oracle_estimator: unconstrained restricted minimizer lies outside the ball");
      }
      return beta;
    }
    case LossKind::Logistic: {
      if (!std::isfinite(radius)) throw ConfigError("oracle_estimator: logistic loss requires a finite radius");
      const DesignData& data = *model.design();
      const Matrix XS = detail::select_columns(data.X, support);
      const double n = static_cast<double>(data.n());
      // Projected gradient descent with step 1/Lip, Lip = lambda_max(X_S^T X_S)/(4n).
      Eigen::SelfAdjointEigenSolver<Matrix> es(XS.transpose() * XS, Eigen::EigenvaluesOnly);
      const double lip = std::max(es.eigenvalues().maxCoeff() / (4.0 * n), 1e-12);
      Vector b = Vector::Zero(s);
      for (int it = 0; it < 1000000; ++it) {
        Vector r = XS * b;
        for (Eigen::Index i = 0; i < r.size(); ++i) r[i] = detail::sigmoid(r[i]) - data.y[i];
        const Vector g = XS.transpose() * r / n;
        Vector next = b - g / lip;
        const double nrm = next.norm();
        if (nrm > radius) next *= radius / nrm;
        // Gradient mapping norm; equals ||g|| in the interior.
        const double gm = lip * (next - b).norm();
        b = std::move(next);
        if (gm <= 1e-8) break;
      }
      for (Eigen::Index k = 0; k < s; ++k) beta[support[k]] = b[k];
      return beta;
    }
  }
  return beta;
}

// ---------------------------------------------------------------------------
// Recovery metrics.

struct RecoveryMetrics {
  int tps = 0;
  int fps = 0;
  double l2_error = 0.0;
  bool exact_support = false;
};

inline RecoveryMetrics recovery_metrics(const Eigen::Ref<const Vector>& beta_hat, const GroundTruth& truth,
                                        double zero_tol = 1e-8) {
  if (beta_hat.size() != truth.beta_star.size()) throw DimensionError("recovery_metrics: length mismatch");
  RecoveryMetrics m;
  for (Eigen::Index j = 0; j < beta_hat.size(); ++j) {
    if (std::abs(beta_hat[j]) <= zero_tol) continue;
    if (truth.beta_star[j] != 0.0) ++m.tps;
    else ++m.fps;
  }
  m.l2_error = (beta_hat - truth.beta_star).norm();
  m.exact_support = m.tps == truth.s_star() && m.fps == 0;
  return m;
}

// ---------------------------------------------------------------------------
// Sparse eigenvalues of the Hessian.

enum class ProbeMethod { Exhaustive, Sampled };

struct ProbeEig {
  double rho_plus = 0.0;
  double rho_minus = 0.0;
};

struct SparseEigReport {
  int s = 0;
  double rho_plus_lb = 0.0;
  double rho_minus_ub = 0.0;
  std::optional<double> kappa_estimate;
  ProbeMethod method = ProbeMethod::Exhaustive;
  std::size_t supports_checked = 0;
  /// Extremes at each probe point, in probe order.
  std::vector<ProbeEig> per_probe;
};

/// Binomial coefficient as a double (saturates to +inf on overflow).
inline double binomial(Eigen::Index n, Eigen::Index k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double r = 1.0;
  for (Eigen::Index i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return std::round(r);
}

struct SparseEigOptions {
  std::size_t budget = 10000;
  /// Always probed in sampled mode when it has exactly s entries (or fewer,
  /// padded with random indices).
  std::vector<Eigen::Index> true_support;
  std::optional<PenaltySpec> penalty;
  std::uint64_t seed = 7;
  /// Sample supports even when enumeration fits in the budget.
  bool force_sampled = false;
};

inline SparseEigReport sparse_eig_probe(const LossModel& model, std::span<const Vector> probes, int s,
                                        const SparseEigOptions& opt = {}) {
  const Eigen::Index d = model.dimension();
  if (s < 1 || s > d) throw ConfigError("sparse_eig_probe: need 1 <= s <= d");
  if (probes.empty()) throw ConfigError("sparse_eig_probe: empty probe set");

  SparseEigReport rep;
  rep.s = s;
  const bool exhaustive = !opt.force_sampled && binomial(d, s) <= static_cast<double>(opt.budget);
  rep.method = exhaustive ? ProbeMethod::Exhaustive : ProbeMethod::Sampled;

  std::vector<std::vector<Eigen::Index>> supports;
  if (exhaustive) {
    std::vector<Eigen::Index> idx(s);
    std::iota(idx.begin(), idx.end(), 0);
    while (true) {
      supports.push_back(idx);
      int pos = s - 1;
      while (pos >= 0 && idx[pos] == d - s + pos) --pos;
      if (pos < 0) break;
      ++idx[pos];
      for (int q = pos + 1; q < s; ++q) idx[q] = idx[q - 1] + 1;
    }
  } else {
    std::mt19937_64 gen(opt.seed);
    std::vector<Eigen::Index> perm(d);
    std::iota(perm.begin(), perm.end(), 0);
    if (!opt.true_support.empty() && static_cast<int>(opt.true_support.size()) <= s) {
      std::vector<Eigen::Index> sup = opt.true_support;
      std::vector<char> used(d, 0);
      for (auto j : sup) used[j] = 1;
      while (static_cast<int>(sup.size()) < s) {
        const auto j = static_cast<Eigen::Index>(gen() % static_cast<std::uint64_t>(d));
        if (!used[j]) {
          used[j] = 1;
          sup.push_back(j);
        }
      }
      std::sort(sup.begin(), sup.end());
      supports.push_back(std::move(sup));
    }
    while (supports.size() < opt.budget) {
      for (int q = 0; q < s; ++q) {
        const auto span_len = static_cast<std::uint64_t>(d - q);
        std::swap(perm[q], perm[q + static_cast<Eigen::Index>(gen() % span_len)]);
      }
      std::vector<Eigen::Index> sup(perm.begin(), perm.begin() + s);
      std::sort(sup.begin(), sup.end());
      supports.push_back(std::move(sup));
    }
  }
  rep.supports_checked = supports.size();

  rep.rho_plus_lb = -std::numeric_limits<double>::infinity();
  rep.rho_minus_ub = std::numeric_limits<double>::infinity();
  Matrix sub(s, s);
  for (const Vector& beta : probes) {
    const Matrix H = hessian_matrix(model, beta);
    ProbeEig pe{-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    for (const auto& sup : supports) {
      for (int a = 0; a < s; ++a) {
        for (int b = 0; b < s; ++b) sub(a, b) = H(sup[a], sup[b]);
      }
      Eigen::SelfAdjointEigenSolver<Matrix> es(sub, Eigen::EigenvaluesOnly);
      pe.rho_plus = std::max(pe.rho_plus, es.eigenvalues()[s - 1]);
      pe.rho_minus = std::min(pe.rho_minus, es.eigenvalues()[0]);
    }
    rep.per_probe.push_back(pe);
    rep.rho_plus_lb = std::max(rep.rho_plus_lb, pe.rho_plus);
    rep.rho_minus_ub = std::min(rep.rho_minus_ub, pe.rho_minus);
  }

  if (opt.penalty) {
    const Concavity cv = opt.penalty->concavity();
    if (rep.rho_minus_ub > cv.zeta_minus) {
      rep.kappa_estimate = (rep.rho_plus_lb - cv.zeta_plus) / (rep.rho_minus_ub - cv.zeta_minus);
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Objective gaps along the path.

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::size_t points = 0;
};

/// Ordinary least-squares line through (x, y).
inline LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  LineFit f;
  f.points = x.size();
  if (x.size() != y.size() || x.size() < 2) return f;
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) return f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

/// Log-linear fit of positive values v[t] against t, restricted to t >= t_min.
inline LineFit fit_log_linear(std::span<const double> v, std::size_t t_min = 0) {
  std::vector<double> xs, ys;
  for (std::size_t t = t_min; t < v.size(); ++t) {
    if (v[t] > 0.0 && std::isfinite(v[t])) {
      xs.push_back(static_cast<double>(t));
      ys.push_back(std::log(v[t]));
    }
  }
  return fit_line(xs, ys);
}

struct GapTrace {
  /// gaps[t] = phi_tgt(beta_t) - phi_tgt(beta_N), t = 0..N-1 (beta_0 = 0).
  std::vector<double> gaps;
  LineFit fit;
};

inline GapTrace objective_gap_trace(const PathResult& path, const LossModel& model, const PenaltySpec& spec,
                                    double lambda_tgt) {
  GapTrace out;
  if (path.stages.empty()) return out;
  const double ref = objective(model, spec, lambda_tgt, path.final_beta());
  const int N = static_cast<int>(path.stages.size());
  out.gaps.reserve(N);
  out.gaps.push_back(objective(model, spec, lambda_tgt, Vector::Zero(model.dimension())) - ref);
  for (int t = 1; t < N; ++t) {
    out.gaps.push_back(objective(model, spec, lambda_tgt, path.stages[t - 1].result.beta) - ref);
  }
  if (N == 1) out.gaps.clear();
  out.fit = fit_log_linear(out.gaps);
  return out;
}

/// Within-stage gaps phi(beta^k) - phi* for k = 0..K-1 of one stage. phi* comes
/// from continuing the stage to omega <= ref_eps.
inline GapTrace stage_gap_trace(const LossModel& model, const PenaltySpec& spec, const StageSolution& stage,
                                double radius = kInfiniteRadius, double ref_eps = 1e-12) {
  GapTrace out;
  const auto& tr = stage.result.trace;
  if (tr.size() < 2) return out;
  SolverOptions opt;
  opt.max_iters = 100000;
  const StageResult ref = proximal_gradient(model, spec, stage.lambda, ref_eps, stage.result.beta, stage.result.L,
                                            radius, opt);
  double phi_star = objective(model, spec, stage.lambda, ref.beta);
  for (const auto& r : tr) phi_star = std::min(phi_star, r.phi);
  for (std::size_t k = 0; k + 1 < tr.size(); ++k) out.gaps.push_back(tr[k].phi - phi_star);
  out.fit = fit_log_linear(out.gaps);
  return out;
}

}  // namespace ncpath
