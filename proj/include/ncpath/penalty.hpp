#pragma once

// Folded-concave penalty family p_lambda(x) = lambda*|x| + q_lambda(x).
//
// SCAD, MCP and the plain l1 penalty are represented by PenaltySpec. Every
// nonconvex member is split into the l1 part and a smooth concave part q
// whose derivative q' is what the proximal solver adds to the loss gradient.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ncpath/error.hpp"

namespace ncpath {

enum class PenaltyKind { SCAD, MCP, L1 };

inline std::string to_string(PenaltyKind kind) {
  switch (kind) {
    case PenaltyKind::SCAD: return "scad";
    case PenaltyKind::MCP: return "mcp";
    case PenaltyKind::L1: return "l1";
  }
  return "unknown";
}

/// Concavity parameters (zeta_minus, zeta_plus): the slope of q' lies in
/// [-zeta_minus, -zeta_plus].
struct Concavity {
  double zeta_minus = 0.0;
  double zeta_plus = 0.0;
};

/// Validated penalty specification. Construct through the named factories.
class PenaltySpec {
 public:
  static PenaltySpec scad(double a) {
    if (!(a > 2.0) || !std::isfinite(a)) {
      throw ConfigError("SCAD requires a > 2 (got " + std::to_string(a) + ")");
    }
    return PenaltySpec(PenaltyKind::SCAD, a);
  }

  static PenaltySpec mcp(double b) {
    if (!(b > 0.0) || !std::isfinite(b)) {
      throw ConfigError("MCP requires b > 0 (got " + std::to_string(b) + ")");
    }
    return PenaltySpec(PenaltyKind::MCP, b);
  }

  static PenaltySpec l1() { return PenaltySpec(PenaltyKind::L1, 0.0); }

  PenaltyKind kind() const { return kind_; }

  /// SCAD parameter a (0 for other kinds).
  double a() const { return kind_ == PenaltyKind::SCAD ? param_ : 0.0; }

  /// MCP parameter b (0 for other kinds).
  double b() const { return kind_ == PenaltyKind::MCP ? param_ : 0.0; }

  Concavity concavity() const {
    switch (kind_) {
      case PenaltyKind::SCAD: return {1.0 / (param_ - 1.0), 0.0};
      case PenaltyKind::MCP: return {1.0 / param_, 0.0};
      case PenaltyKind::L1: return {0.0, 0.0};
    }
    return {};
  }

  std::string describe() const {
    switch (kind_) {
      case PenaltyKind::SCAD: return "scad(a=" + std::to_string(param_) + ")";
      case PenaltyKind::MCP: return "mcp(b=" + std::to_string(param_) + ")";
      case PenaltyKind::L1: return "l1";
    }
    return "unknown";
  }

 private:
  PenaltySpec(PenaltyKind kind, double param) : kind_(kind), param_(param) {}

  PenaltyKind kind_;
  double param_;
};

namespace detail {
inline double sign(double x) { return (x > 0.0) - (x < 0.0); }
}  // namespace detail

/// p_lambda(x), closed form.
inline double scalar_penalty(const PenaltySpec& spec, double lambda, double x) {
  const double ax = std::abs(x);
  switch (spec.kind()) {
    case PenaltyKind::SCAD: {
      const double a = spec.a();
      if (ax <= lambda) return lambda * ax;
      if (ax <= a * lambda) return -(ax * ax - 2.0 * a * lambda * ax + lambda * lambda) / (2.0 * (a - 1.0));
      return (a + 1.0) * lambda * lambda / 2.0;
    }
    case PenaltyKind::MCP: {
      const double b = spec.b();
      if (ax <= b * lambda) return lambda * ax - ax * ax / (2.0 * b);
      return b * lambda * lambda / 2.0;
    }
    case PenaltyKind::L1: return lambda * ax;
  }
  return 0.0;
}

/// q_lambda(x) = p_lambda(x) - lambda*|x|, written directly (not by
/// subtraction) so it is exact near zero.
inline double concave_value(const PenaltySpec& spec, double lambda, double x) {
  const double ax = std::abs(x);
  switch (spec.kind()) {
    case PenaltyKind::SCAD: {
      const double a = spec.a();
      if (ax <= lambda) return 0.0;
      if (ax <= a * lambda) return (2.0 * lambda * ax - ax * ax - lambda * lambda) / (2.0 * (a - 1.0));
      return ((a + 1.0) * lambda * lambda - 2.0 * lambda * ax) / 2.0;
    }
    case PenaltyKind::MCP: {
      const double b = spec.b();
      if (ax <= b * lambda) return -ax * ax / (2.0 * b);
      return b * lambda * lambda / 2.0 - lambda * ax;
    }
    case PenaltyKind::L1: return 0.0;
  }
  return 0.0;
}

/// q'_lambda(x). MCP uses the exact derivative -x/b of its closed form.
inline double concave_grad(const PenaltySpec& spec, double lambda, double x) {
  const double ax = std::abs(x);
  switch (spec.kind()) {
    case PenaltyKind::SCAD: {
      const double a = spec.a();
      if (ax <= lambda) return 0.0;
      if (ax <= a * lambda) return (lambda * detail::sign(x) - x) / (a - 1.0);
      return -lambda * detail::sign(x);
    }
    case PenaltyKind::MCP: {
      const double b = spec.b();
      if (ax <= b * lambda) return -x / b;
      return -lambda * detail::sign(x);
    }
    case PenaltyKind::L1: return 0.0;
  }
  return 0.0;
}

/// q(x + dx) - q(x) - q'(x) dx. q is piecewise quadratic, so when both points
/// share a piece the divergence is available in closed form.
inline double concave_bregman(const PenaltySpec& spec, double lambda, double x, double dx) {
  if (spec.kind() == PenaltyKind::L1 || dx == 0.0) return 0.0;
  const double y = x + dx;
  const double scale = spec.kind() == PenaltyKind::SCAD ? spec.a() : spec.b();
  // piece: 0 = inner, 1 = curved, 2 = flat; signed by the side of the origin
  auto piece = [&](double v) {
    const double av = std::abs(v);
    int k;
    if (spec.kind() == PenaltyKind::SCAD) k = av <= lambda ? 0 : (av <= scale * lambda ? 1 : 2);
    else k = av <= scale * lambda ? 1 : 2;
    return k == 0 || (k == 1 && spec.kind() == PenaltyKind::MCP) ? k : (v > 0.0 ? k : -k);
  };
  const int px = piece(x);
  if (px == piece(y)) {
    switch (std::abs(px)) {
      case 0: return 0.0;
      case 1: return -dx * dx / (2.0 * (spec.kind() == PenaltyKind::SCAD ? scale - 1.0 : scale));
      default: return 0.0;
    }
  }
  return concave_value(spec, lambda, y) - concave_value(spec, lambda, x) - concave_grad(spec, lambda, x) * dx;
}

inline Eigen::VectorXd concave_grad_vector(const PenaltySpec& spec, double lambda,
                                           const Eigen::Ref<const Eigen::VectorXd>& beta) {
  Eigen::VectorXd g(beta.size());
  for (Eigen::Index j = 0; j < beta.size(); ++j) g[j] = concave_grad(spec, lambda, beta[j]);
  return g;
}

/// Q_lambda(beta) = sum_j q_lambda(beta_j).
inline double concave_sum(const PenaltySpec& spec, double lambda,
                          const Eigen::Ref<const Eigen::VectorXd>& beta) {
  if (spec.kind() == PenaltyKind::L1) return 0.0;
  double s = 0.0;
  for (Eigen::Index j = 0; j < beta.size(); ++j) s += concave_value(spec, lambda, beta[j]);
  return s;
}

/// P_lambda(beta) = sum_j p_lambda(beta_j).
inline double penalty_sum(const PenaltySpec& spec, double lambda,
                          const Eigen::Ref<const Eigen::VectorXd>& beta) {
  double s = 0.0;
  for (Eigen::Index j = 0; j < beta.size(); ++j) s += scalar_penalty(spec, lambda, beta[j]);
  return s;
}

/// Smallest nu with p'_lambda(x) = 0 for all |x| >= nu; none for l1.
inline std::optional<double> flat_threshold(const PenaltySpec& spec, double lambda) {
  switch (spec.kind()) {
    case PenaltyKind::SCAD: return spec.a() * lambda;
    case PenaltyKind::MCP: return spec.b() * lambda;
    case PenaltyKind::L1: return std::nullopt;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Regularity conditions (a)-(e) checked on user grids.

struct ConditionResult {
  char label = '?';
  std::string description;
  bool passed = true;
  /// Largest violation amount found (<= 0 when passed).
  double worst_excess = -std::numeric_limits<double>::infinity();
  double witness_lambda = 0.0;
  double witness_lambda2 = 0.0;
  double witness_beta = 0.0;
};

struct RegularityReport {
  std::array<ConditionResult, 5> conditions;

  bool all_passed() const {
    return std::all_of(conditions.begin(), conditions.end(),
                       [](const ConditionResult& c) { return c.passed; });
  }
};

inline RegularityReport check_regularity(const PenaltySpec& spec, std::span<const double> lambda_grid,
                                         std::span<const double> beta_grid, double tol = 1e-9) {
  if (lambda_grid.empty() || beta_grid.empty()) {
    throw ConfigError("check_regularity: lambda and beta grids must be non-empty");
  }
  for (double l : lambda_grid) {
    if (!(l > 0.0)) throw ConfigError("check_regularity: lambda values must be positive");
  }

  RegularityReport rep;
  rep.conditions[0] = {'a', "q' monotone with slope in [-zeta_minus, -zeta_plus]"};
  rep.conditions[1] = {'b', "q symmetric"};
  rep.conditions[2] = {'c', "q(0) = q'(0) = 0"};
  rep.conditions[3] = {'d', "|q'| <= lambda"};
  rep.conditions[4] = {'e', "|q'_l1 - q'_l2| <= |l1 - l2|"};

  auto record = [tol](ConditionResult& c, double excess, double l1, double l2, double x) {
    if (excess > c.worst_excess) {
      c.worst_excess = excess;
      c.witness_lambda = l1;
      c.witness_lambda2 = l2;
      c.witness_beta = x;
    }
    if (excess > tol) c.passed = false;
  };

  std::vector<double> xs(beta_grid.begin(), beta_grid.end());
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  const Concavity cv = spec.concavity();

  for (double lam : lambda_grid) {
    std::vector<double> qp(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) qp[i] = concave_grad(spec, lam, xs[i]);

    // Adjacent quotients suffice: any wider quotient is a convex combination.
    for (std::size_t i = 1; i < xs.size(); ++i) {
      const double quot = (qp[i] - qp[i - 1]) / (xs[i] - xs[i - 1]);
      const double excess = std::max(-cv.zeta_minus - quot, quot + cv.zeta_plus);
      record(rep.conditions[0], excess, lam, lam, xs[i]);
    }
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double x = xs[i];
      record(rep.conditions[1], std::abs(concave_value(spec, lam, -x) - concave_value(spec, lam, x)), lam, lam, x);
      record(rep.conditions[3], std::abs(qp[i]) - lam, lam, lam, x);
    }
    const double origin = std::max(std::abs(concave_value(spec, lam, 0.0)), std::abs(concave_grad(spec, lam, 0.0)));
    record(rep.conditions[2], origin, lam, lam, 0.0);

    for (double lam2 : lambda_grid) {
      for (double x : xs) {
        const double diff = std::abs(concave_grad(spec, lam, x) - concave_grad(spec, lam2, x));
        record(rep.conditions[4], diff - std::abs(lam - lam2), lam, lam2, x);
      }
    }
  }
  return rep;
}

}  // namespace ncpath
