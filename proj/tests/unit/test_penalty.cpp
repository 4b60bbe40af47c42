#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "ncpath/penalty.hpp"
#include "oracles.hpp"

using namespace ncpath;

namespace {

std::vector<double> linspace(double lo, double hi, int m) {
  std::vector<double> v(m);
  for (int i = 0; i < m; ++i) v[i] = lo + (hi - lo) * i / (m - 1);
  return v;
}

}  // namespace

TEST(Penalty, ScadValuesAtBreakpoints) {
  const auto s = PenaltySpec::scad(3.7);
  EXPECT_DOUBLE_EQ(scalar_penalty(s, 1.0, 0.5), 0.5);
  EXPECT_DOUBLE_EQ(scalar_penalty(s, 1.0, 1.0), 1.0);
  EXPECT_NEAR(scalar_penalty(s, 1.0, 3.7), 4.7 / 2.0, 1e-14);
  EXPECT_NEAR(scalar_penalty(s, 1.0, 50.0), 2.35, 1e-14);
  EXPECT_NEAR(scalar_penalty(s, 1.0, -2.0), -(4.0 - 14.8 + 1.0) / 5.4, 1e-14);
}

TEST(Penalty, McpValues) {
  const auto m = PenaltySpec::mcp(2.0);
  EXPECT_DOUBLE_EQ(scalar_penalty(m, 1.0, 1.0), 0.75);
  EXPECT_DOUBLE_EQ(scalar_penalty(m, 1.0, 2.0), 1.0);
  EXPECT_DOUBLE_EQ(scalar_penalty(m, 1.0, 7.0), 1.0);
  EXPECT_DOUBLE_EQ(scalar_penalty(m, 0.5, -0.5), 0.25 - 0.0625);
}

TEST(Penalty, ConcavityParameters) {
  EXPECT_DOUBLE_EQ(PenaltySpec::scad(3.7).concavity().zeta_minus, 1.0 / 2.7);
  EXPECT_DOUBLE_EQ(PenaltySpec::mcp(2.0).concavity().zeta_minus, 0.5);
  EXPECT_DOUBLE_EQ(PenaltySpec::l1().concavity().zeta_minus, 0.0);
  EXPECT_DOUBLE_EQ(PenaltySpec::scad(3.7).concavity().zeta_plus, 0.0);
}

TEST(Penalty, FlatThreshold) {
  EXPECT_DOUBLE_EQ(*flat_threshold(PenaltySpec::scad(3.7), 0.5), 1.85);
  EXPECT_DOUBLE_EQ(*flat_threshold(PenaltySpec::mcp(1.1), 2.0), 2.2);
  EXPECT_FALSE(flat_threshold(PenaltySpec::l1(), 1.0).has_value());
}

TEST(Penalty, InvalidParametersRejected) {
  EXPECT_THROW(PenaltySpec::scad(2.0), ConfigError);
  EXPECT_THROW(PenaltySpec::scad(1.5), ConfigError);
  EXPECT_THROW(PenaltySpec::scad(std::nan("")), ConfigError);
  EXPECT_THROW(PenaltySpec::mcp(0.0), ConfigError);
  EXPECT_THROW(PenaltySpec::mcp(-1.0), ConfigError);
  EXPECT_NO_THROW(PenaltySpec::scad(2.0001));
}

// Penalty value from quadrature of the textbook derivative.
TEST(Penalty, ValueMatchesIntegratedDerivative) {
  for (double a : {2.1, 3.7, 6.0}) {
    const auto s = PenaltySpec::scad(a);
    for (double lam : {0.1, 1.0, 2.5}) {
      for (double x : linspace(-4.0 * a * lam, 4.0 * a * lam, 61)) {
        const double ref = oracle::integrate_penalty([&](double t) { return oracle::scad_deriv(lam, a, t); }, x,
                                                     {lam, a * lam});
        EXPECT_NEAR(scalar_penalty(s, lam, x), ref, 1e-10 * std::max(1.0, ref)) << a << ' ' << lam << ' ' << x;
      }
    }
  }
  for (double b : {1.1, 2.0, 5.0}) {
    const auto m = PenaltySpec::mcp(b);
    for (double lam : {0.1, 1.0, 2.5}) {
      for (double x : linspace(-3.0 * b * lam, 3.0 * b * lam, 61)) {
        const double ref =
            oracle::integrate_penalty([&](double t) { return oracle::mcp_deriv(lam, b, t); }, x, {b * lam});
        EXPECT_NEAR(scalar_penalty(m, lam, x), ref, 1e-10 * std::max(1.0, ref)) << b << ' ' << lam << ' ' << x;
      }
    }
  }
}

TEST(Penalty, DecompositionIdentity) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (const auto& spec : {PenaltySpec::scad(3.7), PenaltySpec::mcp(1.1), PenaltySpec::l1()}) {
    for (int i = 0; i < 2000; ++i) {
      const double x = u(rng), lam = 0.01 + std::abs(u(rng)) / 4.0;
      EXPECT_NEAR(scalar_penalty(spec, lam, x), lam * std::abs(x) + concave_value(spec, lam, x), 1e-12);
    }
  }
}

TEST(Penalty, ConcaveGradMatchesFiniteDifferences) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-8.0, 8.0);
  for (const auto& spec : {PenaltySpec::scad(2.1), PenaltySpec::scad(3.7), PenaltySpec::mcp(1.1),
                           PenaltySpec::mcp(2.0), PenaltySpec::mcp(5.0)}) {
    for (int i = 0; i < 2000; ++i) {
      const double lam = 0.05 + std::abs(u(rng)) / 4.0;
      const double x = u(rng);
      const double kinks[] = {lam, -lam, spec.a() * lam, -spec.a() * lam, spec.b() * lam, -spec.b() * lam};
      bool near_kink = false;
      for (double k : kinks) near_kink = near_kink || std::abs(x - k) < 1e-5;
      if (near_kink) continue;
      const double h = 1e-7;
      const double fd = (concave_value(spec, lam, x + h) - concave_value(spec, lam, x - h)) / (2.0 * h);
      EXPECT_NEAR(concave_grad(spec, lam, x), fd, 1e-6) << spec.describe() << " x=" << x << " lam=" << lam;
    }
  }
}

TEST(Penalty, McpGradientIsExactDerivative) {
  // q'(x) = -x/b inside the curved region, -lambda*sign(x) beyond b*lambda.
  const auto m = PenaltySpec::mcp(2.0);
  EXPECT_DOUBLE_EQ(concave_grad(m, 1.0, 1.0), -0.5);
  EXPECT_DOUBLE_EQ(concave_grad(m, 1.0, -1.0), 0.5);
  EXPECT_DOUBLE_EQ(concave_grad(m, 1.0, 3.0), -1.0);
  EXPECT_DOUBLE_EQ(concave_grad(m, 1.0, 2.0), -1.0);
}

TEST(Penalty, ConcaveBregmanMatchesDirectDifference) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-6.0, 6.0);
  for (const auto& spec : {PenaltySpec::scad(3.7), PenaltySpec::mcp(1.1), PenaltySpec::mcp(3.0), PenaltySpec::l1()}) {
    for (int i = 0; i < 5000; ++i) {
      const double lam = 0.2 + std::abs(u(rng)) / 6.0;
      const double x = u(rng), dx = u(rng) / (1 + i % 7);
      const double direct = concave_value(spec, lam, x + dx) - concave_value(spec, lam, x) -
                            concave_grad(spec, lam, x) * dx;
      EXPECT_NEAR(concave_bregman(spec, lam, x, dx), direct, 1e-11) << spec.describe();
      // q is concave, so the divergence is never positive.
      EXPECT_LE(concave_bregman(spec, lam, x, dx), 1e-12);
    }
  }
}

TEST(Penalty, ConcaveBregmanTinyStepStaysAccurate) {
  const auto m = PenaltySpec::mcp(2.0);
  // Same curved piece: exact value -dx^2/(2b) even when dx^2 is below the ulp of q.
  EXPECT_DOUBLE_EQ(concave_bregman(m, 1.0, 0.7, 1e-9), -1e-18 / 4.0);
  const auto s = PenaltySpec::scad(3.7);
  EXPECT_DOUBLE_EQ(concave_bregman(s, 1.0, 2.0, 1e-9), -1e-18 / (2.0 * 2.7));
  EXPECT_DOUBLE_EQ(concave_bregman(s, 1.0, 0.3, 1e-9), 0.0);
  EXPECT_DOUBLE_EQ(concave_bregman(s, 1.0, 9.0, 1e-9), 0.0);
}

TEST(Penalty, RegularityHoldsForSupportedFamilies) {
  const std::vector<double> lambdas{0.05, 0.5, 1.0, 2.0};
  const std::vector<double> betas = linspace(-10.0, 10.0, 10000);
  for (double a : {2.1, 3.7}) {
    const RegularityReport r = check_regularity(PenaltySpec::scad(a), lambdas, betas);
    EXPECT_TRUE(r.all_passed()) << "scad a=" << a;
  }
  for (double b : {1.1, 2.0, 5.0}) {
    const RegularityReport r = check_regularity(PenaltySpec::mcp(b), lambdas, betas);
    EXPECT_TRUE(r.all_passed()) << "mcp b=" << b;
    for (const auto& c : r.conditions) EXPECT_LE(c.worst_excess, 1e-9) << c.label;
  }
  EXPECT_TRUE(check_regularity(PenaltySpec::l1(), lambdas, betas).all_passed());
}

TEST(Penalty, RegularityLabelsInOrder) {
  const std::vector<double> lambdas{1.0};
  const std::vector<double> betas{-1.0, 0.0, 1.0};
  const auto r = check_regularity(PenaltySpec::mcp(2.0), lambdas, betas);
  const char expect[] = {'a', 'b', 'c', 'd', 'e'};
  for (int i = 0; i < 5; ++i) EXPECT_EQ(r.conditions[i].label, expect[i]);
}

TEST(Penalty, RegularityRejectsEmptyGrids) {
  const std::vector<double> none;
  const std::vector<double> one{1.0};
  EXPECT_THROW(check_regularity(PenaltySpec::mcp(2.0), none, one), ConfigError);
  EXPECT_THROW(check_regularity(PenaltySpec::mcp(2.0), one, none), ConfigError);
  const std::vector<double> neg{-1.0};
  EXPECT_THROW(check_regularity(PenaltySpec::mcp(2.0), neg, one), ConfigError);
}

// Slope bound (a) is tight: the adjacent quotients reach -zeta_minus exactly
// in the curved region, so a stricter zeta would fail.
TEST(Penalty, ConcavitySlopeIsAttained) {
  const auto m = PenaltySpec::mcp(2.0);
  const double q1 = concave_grad(m, 1.0, 0.5), q2 = concave_grad(m, 1.0, 1.0);
  EXPECT_NEAR((q2 - q1) / 0.5, -0.5, 1e-15);
}

TEST(Penalty, VectorHelpersAgreeWithScalar) {
  Eigen::VectorXd b(4);
  b << -3.0, 0.0, 0.4, 1.5;
  const auto s = PenaltySpec::scad(3.7);
  double pv = 0.0, qv = 0.0;
  for (int j = 0; j < 4; ++j) {
    pv += scalar_penalty(s, 0.5, b[j]);
    qv += concave_value(s, 0.5, b[j]);
    EXPECT_DOUBLE_EQ(concave_grad_vector(s, 0.5, b)[j], concave_grad(s, 0.5, b[j]));
  }
  EXPECT_DOUBLE_EQ(penalty_sum(s, 0.5, b), pv);
  EXPECT_DOUBLE_EQ(concave_sum(s, 0.5, b), qv);
}
