#pragma once

// Seeded synthetic problems: AR(rho) or equicorrelated Gaussian designs,
// AR(rho) multivariate-t designs rescaled to unit marginal variance, sparse
// coefficients on the first s* coordinates, Gaussian or scaled-t noise (or
// Bernoulli responses for logistic regression).
//
// Randomness: each replication r draws from std::mt19937_64 seeded with
// splitmix64(seed, r), so any replication can be regenerated on its own.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include <Eigen/Core>

#include "ncpath/error.hpp"
#include "ncpath/ground_truth.hpp"
#include "ncpath/loss.hpp"

namespace ncpath {

/// SplitMix64 finalizer applied to seed + stream * golden-ratio increment.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + (stream + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double chi_squared(double dof) { return std::chi_squared_distribution<double>(dof)(engine_); }
  double student_t(double dof) { return normal() / std::sqrt(chi_squared(dof) / dof); }
  bool coin() { return (engine_() >> 63) != 0; }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

enum class DesignKind { ARGaussian, ART, EquicorrelatedGaussian };
enum class SignalKind { GaussianCoeffs, PlusMinus };
enum class NoiseKind { Gaussian, T };
/// Linear: y = X beta + noise. Logistic: y_i ~ Bernoulli(sigmoid(x_i^T beta)).
enum class ResponseKind { Linear, Logistic };

struct ExperimentDesign {
  Eigen::Index n = 100;
  Eigen::Index d = 50;
  Eigen::Index s_star = 5;
  DesignKind design = DesignKind::ARGaussian;
  double rho = 0.5;
  double design_dof = 5.0;  ///< ART only
  SignalKind signal = SignalKind::GaussianCoeffs;
  double magnitude = 2.0;  ///< PlusMinus only
  NoiseKind noise = NoiseKind::Gaussian;
  double noise_sd = 1.0;        ///< Gaussian noise
  double noise_dof = 5.0;       ///< t noise
  double noise_variance = 0.01; ///< t noise, prescribed variance
  ResponseKind response = ResponseKind::Linear;
  std::uint64_t seed = 1;

  void validate() const {
    if (n < 1 || d < 1) throw ConfigError("design: n and d must be positive");
    if (s_star < 0 || s_star > d) throw ConfigError("design: s_star must lie in [0, d]");
    if (!(rho >= 0.0 && rho < 1.0)) throw ConfigError("design: rho must lie in [0, 1)");
    if (design == DesignKind::ART && !(design_dof > 2.0)) throw ConfigError("design: t design needs dof > 2");
    if (noise == NoiseKind::T && !(noise_dof > 2.0)) throw ConfigError("design: t noise needs dof > 2");
    if (noise == NoiseKind::Gaussian && !(noise_sd >= 0.0)) throw ConfigError("design: noise_sd must be >= 0");
    if (noise == NoiseKind::T && !(noise_variance >= 0.0)) throw ConfigError("design: noise_variance must be >= 0");
  }

  /// Copy with the seed of replication r.
  ExperimentDesign for_replication(std::uint64_t r) const {
    ExperimentDesign c = *this;
    c.seed = derive_seed(seed, r);
    return c;
  }
};

struct Problem {
  DesignData data;
  GroundTruth truth;
};

namespace detail {

inline void fill_row(Rng& rng, const ExperimentDesign& des, Eigen::RowVectorXd& row) {
  const Eigen::Index d = row.size();
  switch (des.design) {
    case DesignKind::ARGaussian:
    case DesignKind::ART: {
      const double innov = std::sqrt(1.0 - des.rho * des.rho);
      row[0] = rng.normal();
      for (Eigen::Index j = 1; j < d; ++j) row[j] = des.rho * row[j - 1] + innov * rng.normal();
      if (des.design == DesignKind::ART) {
        const double nu = des.design_dof;
        // Shared chi-square mixing keeps the row elliptical; the factor
        // sqrt((nu-2)/nu) restores unit marginal variance.
        row *= std::sqrt((nu - 2.0) / nu) / std::sqrt(rng.chi_squared(nu) / nu);
      }
      break;
    }
    case DesignKind::EquicorrelatedGaussian: {
      const double common = std::sqrt(des.rho) * rng.normal();
      const double own = std::sqrt(1.0 - des.rho);
      for (Eigen::Index j = 0; j < d; ++j) row[j] = common + own * rng.normal();
      break;
    }
  }
}

}  // namespace detail

inline Problem gen_problem(const ExperimentDesign& des) {
  des.validate();
  Rng rng(des.seed);

  Vector beta = Vector::Zero(des.d);
  for (Eigen::Index j = 0; j < des.s_star; ++j) {
    if (des.signal == SignalKind::GaussianCoeffs) {
      double v = 0.0;
      while (v == 0.0) v = rng.normal();
      beta[j] = v;
    } else {
      beta[j] = rng.coin() ? des.magnitude : -des.magnitude;
    }
  }

  Matrix X(des.n, des.d);
  Eigen::RowVectorXd row(des.d);
  for (Eigen::Index i = 0; i < des.n; ++i) {
    detail::fill_row(rng, des, row);
    X.row(i) = row;
  }

  Vector y = X * beta;
  for (Eigen::Index i = 0; i < des.n; ++i) {
    if (des.response == ResponseKind::Logistic) {
      y[i] = rng.uniform() < detail::sigmoid(y[i]) ? 1.0 : 0.0;
    } else if (des.noise == NoiseKind::Gaussian) {
      y[i] += des.noise_sd * rng.normal();
    } else {
      const double nu = des.noise_dof;
      y[i] += std::sqrt(des.noise_variance * (nu - 2.0) / nu) * rng.student_t(nu);
    }
  }
  return {DesignData(std::move(X), std::move(y)), GroundTruth(std::move(beta))};
}

/// Joint samples Z = [y, X] (n x (d+1)) for the rank-based covariance pipeline.
inline Matrix stack_response(const DesignData& data) {
  Matrix Z(data.n(), data.d() + 1);
  Z.col(0) = data.y;
  Z.rightCols(data.d()) = data.X;
  return Z;
}

inline Matrix gen_elliptical_samples(const ExperimentDesign& des) { return stack_response(gen_problem(des).data); }

}  // namespace ncpath
