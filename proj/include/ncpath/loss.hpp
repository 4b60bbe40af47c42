#pragma once

// Loss functions L(beta): least squares, logistic, and the semiparametric
// elliptical design loss built from a (possibly indefinite) covariance
// estimate with the response in coordinate 0.

#include <cmath>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>

#include <Eigen/Core>

#include "ncpath/error.hpp"
#include "ncpath/penalty.hpp"

namespace ncpath {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Design matrix X (rows are samples) and response y.
struct DesignData {
  Matrix X;
  Vector y;

  DesignData() = default;
  DesignData(Matrix x, Vector resp) : X(std::move(x)), y(std::move(resp)) { validate(); }

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index d() const { return X.cols(); }

  void validate() const {
    if (X.rows() < 1 || X.cols() < 1) throw DimensionError("design matrix must be at least 1x1");
    if (y.size() != X.rows()) {
      throw DimensionError("response length " + std::to_string(y.size()) + " does not match n = " +
                           std::to_string(X.rows()));
    }
    if (!X.allFinite()) throw ConfigError("design matrix contains non-finite entries");
    if (!y.allFinite()) throw ConfigError("response contains non-finite entries");
  }
};

/// Block view of K_Z = [[K_Y, K_XY^T], [K_XY, K_X]].
struct EllipticalCov {
  Matrix K_full;
  Matrix K_X;
  Vector K_XY;
  double K_Y = 0.0;

  EllipticalCov() = default;

  explicit EllipticalCov(Matrix k_full) : K_full(std::move(k_full)) {
    const Eigen::Index m = K_full.rows();
    if (m < 2 || K_full.cols() != m) throw DimensionError("K_Z must be square with size d+1 >= 2");
    if (!K_full.allFinite()) throw ConfigError("K_Z contains non-finite entries");
    const double scale = std::max(1.0, K_full.cwiseAbs().maxCoeff());
    if ((K_full - K_full.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
      throw ConfigError("K_Z must be symmetric");
    }
    if ((K_full.diagonal().array() < 0.0).any()) throw ConfigError("K_Z diagonal must be nonnegative");
    K_Y = K_full(0, 0);
    K_XY = K_full.col(0).tail(m - 1);
    K_X = K_full.bottomRightCorner(m - 1, m - 1);
  }

  Eigen::Index d() const { return K_X.rows(); }
};

struct LeastSquaresLoss {
  DesignData data;
};

struct LogisticLoss {
  DesignData data;
};

struct EllipticalLoss {
  EllipticalCov cov;
};

enum class LossKind { LeastSquares, Logistic, Elliptical };

inline std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::LeastSquares: return "ls";
    case LossKind::Logistic: return "logistic";
    case LossKind::Elliptical: return "elliptical";
  }
  return "unknown";
}

namespace detail {

/// log(1 + exp(t)) without overflow.
inline double log1p_exp(double t) { return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

/// 1 / (1 + exp(-t)) with exact 0/1 limits.
inline double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

}  // namespace detail

/// Immutable loss model; one of the three variants above.
class LossModel {
 public:
  static LossModel least_squares(DesignData data) {
    data.validate();
    return LossModel(LeastSquaresLoss{std::move(data)});
  }

  static LossModel logistic(DesignData data) {
    data.validate();
    for (Eigen::Index i = 0; i < data.y.size(); ++i) {
      if (data.y[i] != 0.0 && data.y[i] != 1.0) throw ConfigError("logistic loss requires y in {0,1}");
    }
    return LossModel(LogisticLoss{std::move(data)});
  }

  static LossModel elliptical(EllipticalCov cov) { return LossModel(EllipticalLoss{std::move(cov)}); }

  LossKind kind() const {
    return std::visit(
        [](const auto& m) {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, LeastSquaresLoss>) return LossKind::LeastSquares;
          else if constexpr (std::is_same_v<T, LogisticLoss>) return LossKind::Logistic;
          else return LossKind::Elliptical;
        },
        variant_);
  }

  Eigen::Index dimension() const {
    return std::visit(
        [](const auto& m) -> Eigen::Index {
          if constexpr (std::is_same_v<std::decay_t<decltype(m)>, EllipticalLoss>) return m.cov.d();
          else return m.data.d();
        },
        variant_);
  }

  /// Design data for LS/logistic; nullptr for the elliptical loss.
  const DesignData* design() const {
    if (auto* ls = std::get_if<LeastSquaresLoss>(&variant_)) return &ls->data;
    if (auto* lg = std::get_if<LogisticLoss>(&variant_)) return &lg->data;
    return nullptr;
  }

  const EllipticalCov* covariance() const {
    if (auto* el = std::get_if<EllipticalLoss>(&variant_)) return &el->cov;
    return nullptr;
  }

  const auto& variant() const { return variant_; }

 private:
  using Variant = std::variant<LeastSquaresLoss, LogisticLoss, EllipticalLoss>;
  explicit LossModel(Variant v) : variant_(std::move(v)) {}
  Variant variant_;
};

namespace detail {
inline void check_dim(const LossModel& model, Eigen::Index len, const char* what) {
  if (len != model.dimension()) {
    throw DimensionError(std::string(what) + ": expected length " + std::to_string(model.dimension()) + ", got " +
                         std::to_string(len));
  }
}
}  // namespace detail

inline double loss_value(const LossModel& model, const Eigen::Ref<const Vector>& beta) {
  detail::check_dim(model, beta.size(), "loss_value");
  return std::visit(
      [&](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LeastSquaresLoss>) {
          const double n = static_cast<double>(m.data.n());
          return (m.data.X * beta - m.data.y).squaredNorm() / (2.0 * n);
        } else if constexpr (std::is_same_v<T, LogisticLoss>) {
          const Vector t = m.data.X * beta;
          double s = 0.0;
          for (Eigen::Index i = 0; i < t.size(); ++i) s += detail::log1p_exp(t[i]) - m.data.y[i] * t[i];
          return s / static_cast<double>(m.data.n());
        } else {
          return 0.5 * m.cov.K_Y - beta.dot(m.cov.K_XY) + 0.5 * beta.dot(m.cov.K_X * beta);
        }
      },
      model.variant());
}

inline Vector loss_grad(const LossModel& model, const Eigen::Ref<const Vector>& beta) {
  detail::check_dim(model, beta.size(), "loss_grad");
  return std::visit(
      [&](const auto& m) -> Vector {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LeastSquaresLoss>) {
          const double n = static_cast<double>(m.data.n());
          return m.data.X.transpose() * (m.data.X * beta - m.data.y) / n;
        } else if constexpr (std::is_same_v<T, LogisticLoss>) {
          Vector r = m.data.X * beta;
          for (Eigen::Index i = 0; i < r.size(); ++i) r[i] = detail::sigmoid(r[i]) - m.data.y[i];
          return m.data.X.transpose() * r / static_cast<double>(m.data.n());
        } else {
          return m.cov.K_X * beta - m.cov.K_XY;
        }
      },
      model.variant());
}

/// v^T Hess L(beta) v. Negative values are possible for the elliptical loss.
inline double hessian_quadform(const LossModel& model, const Eigen::Ref<const Vector>& beta,
                               const Eigen::Ref<const Vector>& v) {
  detail::check_dim(model, beta.size(), "hessian_quadform");
  detail::check_dim(model, v.size(), "hessian_quadform");
  return std::visit(
      [&](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LeastSquaresLoss>) {
          return (m.data.X * v).squaredNorm() / static_cast<double>(m.data.n());
        } else if constexpr (std::is_same_v<T, LogisticLoss>) {
          const Vector t = m.data.X * beta;
          const Vector xv = m.data.X * v;
          double s = 0.0;
          for (Eigen::Index i = 0; i < t.size(); ++i) {
            const double p = detail::sigmoid(t[i]);
            s += xv[i] * xv[i] * p * (1.0 - p);
          }
          return s / static_cast<double>(m.data.n());
        } else {
          return v.dot(m.cov.K_X * v);
        }
      },
      model.variant());
}

/// Full Hessian at beta (d x d); used by the sparse-eigenvalue diagnostics.
inline Matrix hessian_matrix(const LossModel& model, const Eigen::Ref<const Vector>& beta) {
  detail::check_dim(model, beta.size(), "hessian_matrix");
  return std::visit(
      [&](const auto& m) -> Matrix {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LeastSquaresLoss>) {
          return m.data.X.transpose() * m.data.X / static_cast<double>(m.data.n());
        } else if constexpr (std::is_same_v<T, LogisticLoss>) {
          const Vector t = m.data.X * beta;
          Vector w(t.size());
          for (Eigen::Index i = 0; i < t.size(); ++i) {
            const double p = detail::sigmoid(t[i]);
            w[i] = p * (1.0 - p);
          }
          return m.data.X.transpose() * w.asDiagonal() * m.data.X / static_cast<double>(m.data.n());
        } else {
          return m.cov.K_X;
        }
      },
      model.variant());
}

/// Gradient of the surrogate loss L + Q_lambda.
inline Vector surrogate_grad(const LossModel& model, const PenaltySpec& spec, double lambda,
                             const Eigen::Ref<const Vector>& beta) {
  Vector g = loss_grad(model, beta);
  if (spec.kind() != PenaltyKind::L1) g += concave_grad_vector(spec, lambda, beta);
  return g;
}

/// L + Q_lambda.
inline double surrogate_value(const LossModel& model, const PenaltySpec& spec, double lambda,
                              const Eigen::Ref<const Vector>& beta) {
  return loss_value(model, beta) + concave_sum(spec, lambda, beta);
}

/// L(beta + delta) - L(beta) - grad L(beta)^T delta, evaluated without
/// subtracting two nearly equal loss values.
inline double loss_bregman(const LossModel& model, const Eigen::Ref<const Vector>& beta,
                           const Eigen::Ref<const Vector>& delta) {
  detail::check_dim(model, beta.size(), "loss_bregman");
  detail::check_dim(model, delta.size(), "loss_bregman");
  return std::visit(
      [&](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LeastSquaresLoss>) {
          return 0.5 * (m.data.X * delta).squaredNorm() / static_cast<double>(m.data.n());
        } else if constexpr (std::is_same_v<T, LogisticLoss>) {
          const Vector t = m.data.X * beta;
          const Vector u = m.data.X * delta;
          double s = 0.0;
          for (Eigen::Index i = 0; i < t.size(); ++i) {
            const double p = detail::sigmoid(t[i]);
            if (std::abs(u[i]) < 1e-4) {
              // Taylor series in u; the direct difference loses every digit here.
              const double w = p * (1.0 - p);
              const double u2 = u[i] * u[i];
              s += w * u2 / 2.0 + w * (1.0 - 2.0 * p) * u2 * u[i] / 6.0 +
                   w * (1.0 - 6.0 * w) * u2 * u2 / 24.0;
            } else {
              s += detail::log1p_exp(t[i] + u[i]) - detail::log1p_exp(t[i]) - p * u[i];
            }
          }
          return s / static_cast<double>(m.data.n());
        } else {
          return 0.5 * delta.dot(m.cov.K_X * delta);
        }
      },
      model.variant());
}

/// Same for the surrogate L + Q_lambda.
inline double surrogate_bregman(const LossModel& model, const PenaltySpec& spec, double lambda,
                                const Eigen::Ref<const Vector>& beta, const Eigen::Ref<const Vector>& delta) {
  double s = loss_bregman(model, beta, delta);
  if (spec.kind() == PenaltyKind::L1) return s;
  for (Eigen::Index j = 0; j < beta.size(); ++j) s += concave_bregman(spec, lambda, beta[j], delta[j]);
  return s;
}

/// phi_lambda(beta) = L(beta) + Q_lambda(beta) + lambda*||beta||_1.
inline double objective(const LossModel& model, const PenaltySpec& spec, double lambda,
                        const Eigen::Ref<const Vector>& beta) {
  return surrogate_value(model, spec, lambda, beta) + lambda * beta.lpNorm<1>();
}

/// Same quantity through L + P_lambda; kept as an independent route.
inline double objective_via_penalty(const LossModel& model, const PenaltySpec& spec, double lambda,
                                    const Eigen::Ref<const Vector>& beta) {
  return loss_value(model, beta) + penalty_sum(spec, lambda, beta);
}

/// ||grad L(0)||_inf: the smallest lambda whose exact local solution is zero.
inline double lambda_zero(const LossModel& model) {
  const Vector g = loss_grad(model, Vector::Zero(model.dimension()));
  const double l0 = g.lpNorm<Eigen::Infinity>();
  if (!(l0 > 0.0)) {
    throw ConfigError("lambda_zero is 0: the response is uncorrelated with every feature (degenerate problem)");
  }
  return l0;
}

}  // namespace ncpath
