#pragma once

// Rank-based covariance estimation for elliptical data:
//   K_Z[j,k] = sin(pi/2 * tau_jk) * sigma_j * sigma_k
// with Kendall's tau for the correlation part and Catoni M-estimators for the
// marginal scales. The result is symmetric but not projected onto the PSD
// cone; the elliptical loss is allowed to be nonconvex.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ncpath/error.hpp"
#include "ncpath/loss.hpp"

namespace ncpath {

namespace detail {
inline int sgn(double x) { return (x > 0.0) - (x < 0.0); }
}  // namespace detail

/// Kendall's tau by the O(n^2) pair sum. Ties contribute 0.
inline double kendall_tau(std::span<const double> u, std::span<const double> w) {
  if (u.size() != w.size()) throw DimensionError("kendall_tau: vectors differ in length");
  const std::size_t n = u.size();
  if (n < 2) throw ConfigError("kendall_tau: need at least 2 samples");
  long long s = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = i + 1; k < n; ++k) s += detail::sgn(u[i] - u[k]) * detail::sgn(w[i] - w[k]);
  }
  return 2.0 * static_cast<double>(s) / (static_cast<double>(n) * static_cast<double>(n - 1));
}

/// Matrix of Kendall's tau between all column pairs of Z (n x m), unit
/// diagonal. Pair signs are packed into a float matrix so the m x m sums come
/// from one GEMM per block; entries are small integers, so the sums are exact.
inline Matrix kendall_tau_matrix(const Eigen::Ref<const Matrix>& Z) {
  const Eigen::Index n = Z.rows();
  const Eigen::Index m = Z.cols();
  if (n < 2) throw ConfigError("kendall_tau_matrix: need at least 2 samples");

  const Eigen::Index total_pairs = n * (n - 1) / 2;
  const Eigen::Index block = std::min<Eigen::Index>(total_pairs, 4096);
  Matrix counts = Matrix::Zero(m, m);
  Eigen::MatrixXf signs(block, m);

  Eigen::Index i = 0, k = 1;
  Eigen::Index done = 0;
  while (done < total_pairs) {
    const Eigen::Index len = std::min(block, total_pairs - done);
    // Enumerate pairs (i, k), i < k, in row-major order.
    std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs(len);
    for (Eigen::Index p = 0; p < len; ++p) {
      pairs[p] = {i, k};
      if (++k == n) {
        ++i;
        k = i + 1;
      }
    }
    for (Eigen::Index j = 0; j < m; ++j) {
      const double* col = Z.col(j).data();
      float* out = signs.col(j).data();
      for (Eigen::Index p = 0; p < len; ++p) {
        out[p] = static_cast<float>(detail::sgn(col[pairs[p].first] - col[pairs[p].second]));
      }
    }
    auto S = signs.topRows(len);
    counts += (S.transpose() * S).cast<double>();
    done += len;
  }
  Matrix tau = counts * (2.0 / (static_cast<double>(n) * static_cast<double>(n - 1)));
  tau.diagonal().setOnes();
  return tau;
}

/// R_hat[j,k] = sin(pi/2 * tau_jk), R_hat[j,j] = 1.
inline Matrix kendall_corr_matrix(const Eigen::Ref<const Matrix>& Z) {
  Matrix tau = kendall_tau_matrix(Z);
  Matrix r = (tau.array() * (std::numbers::pi / 2.0)).sin().matrix();
  r.diagonal().setOnes();
  return r;
}

// ---------------------------------------------------------------------------
// Catoni M-estimation.

struct CatoniConfig {
  double delta = 0.05;  ///< confidence level, in (0, 1)
  double v = 1.0;       ///< upper bound on the variance of the samples
  int max_newton_iters = 100;
  double newton_tol = 1e-12;
};

/// Catoni influence function.
inline double catoni_h(double x) {
  return x >= 0.0 ? std::log1p(x + 0.5 * x * x) : -std::log1p(-x + 0.5 * x * x);
}

inline double catoni_h_prime(double x) {
  return x >= 0.0 ? (1.0 + x) / (1.0 + x + 0.5 * x * x) : (1.0 - x) / (1.0 - x + 0.5 * x * x);
}

inline double catoni_alpha(const CatoniConfig& cfg, std::size_t n) {
  if (!(cfg.delta > 0.0 && cfg.delta < 1.0)) throw ConfigError("Catoni: delta must lie in (0, 1)");
  if (!(cfg.v > 0.0)) throw ConfigError("Catoni: variance bound v must be positive");
  const double nn = static_cast<double>(n);
  const double lg = std::log(1.0 / cfg.delta);
  if (!(nn > 2.0 * lg)) throw ConfigError("Catoni infeasible: n too small for delta");
  return std::sqrt(2.0 * lg / (nn * cfg.v + 2.0 * nn * cfg.v * lg / (nn - 2.0 * lg)));
}

enum class CatoniMethod { Newton, Bisection };

struct CatoniEstimate {
  double value = 0.0;
  CatoniMethod method = CatoniMethod::Newton;
  int iterations = 0;
};

/// Root of sum_i h(alpha*(z_i - mu)) = 0. Newton from the median; bisection
/// over [min z, max z] if Newton does not converge.
inline CatoniEstimate catoni_location(std::span<const double> samples, const CatoniConfig& cfg) {
  if (samples.empty()) throw ConfigError("catoni_location: no samples");
  const double alpha = catoni_alpha(cfg, samples.size());
  auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
  double lo = *lo_it, hi = *hi_it;
  if (lo == hi) return {lo, CatoniMethod::Newton, 0};

  auto score = [&](double mu) {
    double s = 0.0;
    for (double z : samples) s += catoni_h(alpha * (z - mu));
    return s;
  };
  auto slope = [&](double mu) {
    double s = 0.0;
    for (double z : samples) s += catoni_h_prime(alpha * (z - mu));
    return -alpha * s;
  };
  const double tol = cfg.newton_tol * std::max(1.0, std::max(std::abs(lo), std::abs(hi)));

  std::vector<double> sorted(samples.begin(), samples.end());
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  double mu = sorted[sorted.size() / 2];
  for (int it = 1; it <= cfg.max_newton_iters; ++it) {
    const double f = score(mu);
    const double df = slope(mu);
    if (!(df < 0.0) || !std::isfinite(f)) break;
    const double step = f / df;
    mu -= step;
    if (!(mu >= lo && mu <= hi)) break;
    if (std::abs(step) <= tol) return {mu, CatoniMethod::Newton, it};
  }

  // score is strictly decreasing: score(lo) >= 0 >= score(hi).
  int it = 0;
  while (hi - lo > tol && it < 2000) {
    const double mid = 0.5 * (lo + hi);
    if (score(mid) > 0.0) lo = mid;
    else hi = mid;
    ++it;
  }
  return {0.5 * (lo + hi), CatoniMethod::Bisection, it};
}

struct CatoniScale {
  double sigma = 0.0;
  double mean = 0.0;           ///< mu_hat from raw samples
  double second_moment = 0.0;  ///< m_hat from squared samples
  bool clipped = false;        ///< m_hat < mu_hat^2, sigma set to 0
};

/// sigma_hat = sqrt(m_hat - mu_hat^2); the two configs may carry different
/// variance bounds (raw samples vs squares).
inline CatoniScale catoni_scale(std::span<const double> column, const CatoniConfig& cfg_mean,
                                const CatoniConfig& cfg_second) {
  std::vector<double> sq(column.size());
  std::transform(column.begin(), column.end(), sq.begin(), [](double z) { return z * z; });
  CatoniScale out;
  out.mean = catoni_location(column, cfg_mean).value;
  out.second_moment = catoni_location(sq, cfg_second).value;
  const double var = out.second_moment - out.mean * out.mean;
  out.clipped = var < 0.0;
  out.sigma = std::sqrt(std::max(var, 0.0));
  return out;
}

inline CatoniScale catoni_scale(std::span<const double> column, const CatoniConfig& cfg) {
  return catoni_scale(column, cfg, cfg);
}

/// Unbiased sample variance.
inline double sample_variance(std::span<const double> z) {
  if (z.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : z) mean += x;
  mean /= static_cast<double>(z.size());
  double s = 0.0;
  for (double x : z) s += (x - mean) * (x - mean);
  return s / static_cast<double>(z.size() - 1);
}

/// How the variance bound v is derived from the data when not supplied.
enum class VarianceBound {
  TwiceMedian,  ///< 2 x median of per-column sample variances
  TwiceMax,     ///< 2 x max of per-column sample variances
  PerColumn,    ///< 2 x each column's own sample variance
};

struct EllipticalCovOptions {
  std::optional<double> delta;     ///< default: max((d+1)^-3, exp(-n/4))
  std::optional<double> v_mean;    ///< variance bound for raw columns
  std::optional<double> v_second;  ///< variance bound for squared columns
  VarianceBound bound = VarianceBound::TwiceMedian;
  int max_newton_iters = 100;
  double newton_tol = 1e-12;
};

/// Default confidence level for m columns and n samples.
inline double default_catoni_delta(Eigen::Index n, Eigen::Index m) {
  const double by_dim = std::pow(static_cast<double>(m), -3.0);
  return std::max(by_dim, std::exp(-static_cast<double>(n) / 4.0));
}

struct EllipticalCovResult {
  EllipticalCov cov;
  Matrix correlation;
  Vector sigma;
  int clipped_columns = 0;
  double delta = 0.0;
  /// Bounds actually used, per column (constant unless PerColumn).
  Vector v_mean;
  Vector v_second;
};

/// Assemble K_Z from samples Z (n x (d+1)) with the response in column 0.
inline EllipticalCovResult elliptical_cov(const Eigen::Ref<const Matrix>& Z, const EllipticalCovOptions& opt = {}) {
  const Eigen::Index n = Z.rows();
  const Eigen::Index m = Z.cols();
  if (m < 2) throw DimensionError("elliptical_cov: need the response plus at least one feature column");
  if (n < 2) throw ConfigError("elliptical_cov: need at least 2 samples");
  if (!Z.allFinite()) throw ConfigError("elliptical_cov: samples contain non-finite entries");

  std::vector<std::vector<double>> cols(m), sq(m);
  std::vector<double> var_raw(m), var_sq(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    cols[j].resize(n);
    sq[j].resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      cols[j][i] = Z(i, j);
      sq[j][i] = Z(i, j) * Z(i, j);
    }
    var_raw[j] = sample_variance(cols[j]);
    var_sq[j] = sample_variance(sq[j]);
  }
  auto summarize = [&](std::vector<double> v) {
    if (opt.bound == VarianceBound::TwiceMax) return 2.0 * *std::max_element(v.begin(), v.end());
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    return 2.0 * v[v.size() / 2];
  };
  // All-constant data gives a zero bound; any positive bound is then exact.
  auto positive = [](double v) { return v > 0.0 ? v : 1.0; };

  EllipticalCovResult res;
  res.delta = opt.delta.value_or(default_catoni_delta(n, m));
  res.v_mean.resize(m);
  res.v_second.resize(m);
  const bool per_column = opt.bound == VarianceBound::PerColumn;
  const double vm = per_column ? 0.0 : summarize(var_raw);
  const double vs = per_column ? 0.0 : summarize(var_sq);
  for (Eigen::Index j = 0; j < m; ++j) {
    res.v_mean[j] = positive(opt.v_mean.value_or(per_column ? 2.0 * var_raw[j] : vm));
    res.v_second[j] = positive(opt.v_second.value_or(per_column ? 2.0 * var_sq[j] : vs));
  }

  res.sigma.resize(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const CatoniConfig cfg_mean{res.delta, res.v_mean[j], opt.max_newton_iters, opt.newton_tol};
    const CatoniConfig cfg_second{res.delta, res.v_second[j], opt.max_newton_iters, opt.newton_tol};
    const double mu = catoni_location(cols[j], cfg_mean).value;
    const double m2 = catoni_location(sq[j], cfg_second).value;
    const double var = m2 - mu * mu;
    if (var < 0.0) ++res.clipped_columns;
    res.sigma[j] = std::sqrt(std::max(var, 0.0));
  }

  res.correlation = kendall_corr_matrix(Z);
  Matrix K = res.correlation.array() * (res.sigma * res.sigma.transpose()).array();
  K = 0.5 * (K + K.transpose());
  res.cov = EllipticalCov(std::move(K));
  return res;
}

}  // namespace ncpath
