#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <string>

#include "golden.hpp"
#include "pgnniv/hydraulics.hpp"
#include "test_support.hpp"

using namespace pgnniv;
using namespace pgnniv::hydraulics;
using pgnniv::testing::rel_diff;

namespace {

TEST(Hydraulics, HydraulicDiameter) {
  EXPECT_NEAR(hydraulic_diameter(1.0), 2.0 / std::sqrt(std::numbers::pi), 1e-15);
  EXPECT_NEAR(hydraulic_diameter(1.0), 1.128379, 1e-6);
  EXPECT_NEAR(hydraulic_diameter(2.0), std::sqrt(8.0 / std::numbers::pi), 1e-15);
}

TEST(Hydraulics, HazenWilliamsUnitArguments) {
  // q = kappa and a unit diameter leave only the coefficient.
  EXPECT_DOUBLE_EQ(hazen_williams_slope(140.0, 140.0, 1.0), 10.67);
}

TEST(Hydraulics, HazenWilliamsDirectEvaluation) {
  const double phi = 2.0 / std::sqrt(std::numbers::pi);
  const double expected = 10.67 * std::pow(1.0 / 140.0, 1.8520) * std::pow(phi, -4.8704);
  EXPECT_LT(rel_diff(hazen_williams_slope(1.0, 140.0, hydraulic_diameter(1.0)), expected), 1e-14);
}

TEST(Hydraulics, DarcyWeisbachDirectEvaluation) {
  EXPECT_NEAR(darcy_weisbach_slope(2.0, 0.02, 1.0, 9.81), 0.02 * 4.0 / 19.62, 1e-16);
}

TEST(Hydraulics, LaminarDarcyWeisbachIsLinearInVelocity) {
  const double phi = hydraulic_diameter(1.0), nu = 5e-4, g = 9.81;
  auto slope = [&](double v) { return darcy_weisbach_slope(v, laminar_friction_factor(v, phi, nu), phi, g); };
  for (double v : {0.5, 1.0, 3.0}) {
    EXPECT_LT(rel_diff(slope(2.0 * v), 2.0 * slope(v)), 1e-14);
    EXPECT_LT(rel_diff(slope(v), 32.0 * nu * v / (g * phi * phi)), 1e-14);
  }
}

TEST(Hydraulics, BordaCarnotDirectEvaluation) {
  const double h = borda_carnot_head_loss(2.0, 1.0, 2.0, 1.0, 9.81);
  EXPECT_NEAR(h, 0.25 * 4.0 / 19.62, 1e-16);
  EXPECT_NEAR(h, 0.050968, 1e-6);
}

TEST(Hydraulics, LambdaCoefficientsForReferencePipe) {
  const auto c = lambda_coefficients(reference_pipe());
  EXPECT_DOUBLE_EQ(c.l1, -0.25);
  EXPECT_DOUBLE_EQ(c.l3, 1.8520);
  // gamma * lambda * sum_i Phi_i^beta kappa_i^-alpha delta_i with Phi_i = sqrt(4 Sigma_i / pi).
  const double phi1 = std::sqrt(4.0 / std::numbers::pi), phi2 = std::sqrt(8.0 / std::numbers::pi);
  const double l2 = 9.81 * 10.67 * std::pow(140.0, -1.8520) * 10.0 * (std::pow(phi1, -4.8704) + std::pow(phi2, -4.8704));
  EXPECT_LT(rel_diff(c.l2, l2), 1e-13);
  EXPECT_LT(rel_diff(c.l2, 0.07301432567662991), 1e-12);
}

TEST(Hydraulics, Lambda3EqualsAlphaForAnyPipe) {
  PipeParams p;
  p.kappa1 = 90.0;
  p.sigma2 = 3.5;
  p.hw_alpha = 1.9;
  EXPECT_EQ(lambda_coefficients(p).l3, 1.9);
}

TEST(HydraulicsProperty, TotalDropEqualsSegmentSum) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> uq(0.1, 10.0);
  const auto p = reference_pipe();
  for (int i = 0; i < 100; ++i) {
    const double q = uq(rng);
    EXPECT_LT(rel_diff(total_pressure_drop(q, p), segment_pressure_drops(q, p).total(), 1e-300), 1e-12) << q;
  }
}

TEST(HydraulicsProperty, TotalDropEqualsSegmentSumForRandomPipes) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.5, 3.0), uk(80.0, 140.0), uq(1.0, 5.0);
  for (int i = 0; i < 100; ++i) {
    PipeParams p;
    p.sigma1 = u(rng);
    p.sigma2 = p.sigma1 * u(rng);
    p.kappa1 = uk(rng);
    p.kappa2 = uk(rng);
    p.delta1 = 10.0 * u(rng);
    const double q = uq(rng);
    EXPECT_LT(rel_diff(total_pressure_drop(q, p), segment_pressure_drops(q, p).total(), 1e-300), 1e-12);
  }
}

TEST(HydraulicsProperty, DistributedDropsIncreaseWithFlow) {
  const auto p = reference_pipe();
  double prev1 = 0.0, prev2 = 0.0;
  for (double q = 0.1; q <= 10.0; q += 0.1) {
    const auto d = segment_pressure_drops(q, p);
    EXPECT_GT(d.dp1, prev1);
    EXPECT_GT(d.dp2, prev2);
    EXPECT_LT(rel_diff(d.dpe, 0.5 * p.rho * q * q * expansion_bracket(p), 1e-300), 1e-14);
    prev1 = d.dp1;
    prev2 = d.dp2;
  }
}

TEST(HydraulicsProperty, HeadTimesGammaIsPressure) {
  const auto p = reference_pipe();
  for (double q : {1.0, 2.5, 5.0}) {
    const auto d = segment_pressure_drops(q, p);
    const double dh1 = hazen_williams_slope(q, p.kappa1, hydraulic_diameter(p.sigma1), p) * p.delta1;
    const double dh2 = hazen_williams_slope(q, p.kappa2, hydraulic_diameter(p.sigma2), p) * p.delta2;
    EXPECT_LT(rel_diff(dh1 * p.gamma(), d.dp1), 1e-14);
    EXPECT_LT(rel_diff(dh2 * p.gamma(), d.dp2), 1e-14);
  }
}

TEST(HydraulicsProperty, ExpansionDropMatchesBordaCarnotPlusKineticRecovery) {
  const auto p = reference_pipe();
  const double q = 2.0, v1 = q / p.sigma1, v2 = q / p.sigma2;
  const double expected = p.gamma() * borda_carnot_head_loss(v1, p.sigma1, p.sigma2, p.xi, p.g) +
                          0.5 * p.rho * (v2 * v2 - v1 * v1);
  EXPECT_LT(rel_diff(segment_pressure_drops(q, p).dpe, expected), 1e-14);
}

TEST(Hydraulics, RoughnessRoundTrip) {
  PipeParams p = geometry_params();
  ASSERT_EQ(p.kappa1, 140.0);
  ASSERT_EQ(p.kappa2, 100.0);
  const double q = 3.0, p2 = 0.0;
  const auto d = segment_pressure_drops(q, p);
  const double p1 = p2 + d.dp2, p0 = p1 + d.dpe + d.dp1;
  const auto k = roughness_from_observation(q, p0, p1, p2, p);
  EXPECT_LT(rel_diff(k.kappa1, 140.0), 1e-9);
  EXPECT_LT(rel_diff(k.kappa2, 100.0), 1e-9);
}

TEST(Hydraulics, Kappa1DependsOnlyOnUpstreamPressures) {
  const PipeParams p = geometry_params();
  const auto a = roughness_from_observation(2.0, 10.0, 7.0, 5.0, p);
  const auto b = roughness_from_observation(2.0, 10.0, 7.0, 1.0, p);
  EXPECT_EQ(a.kappa1, b.kappa1);
  EXPECT_NE(a.kappa2, b.kappa2);
}

TEST(Hydraulics, SegmentCoefficientsReproduceDrops) {
  const auto p = reference_pipe();
  const double q = 2.0;
  const auto d = segment_pressure_drops(q, p);
  const double c1 = hazen_williams_segment_coefficient(p.sigma1, p.kappa1, p);
  EXPECT_LT(rel_diff(p.gamma() * c1 * std::pow(q, p.hw_alpha) * p.delta1, d.dp1), 1e-14);
}

TEST(HydraulicsErrors, DomainViolationsThrow) {
  EXPECT_THROW(hydraulic_diameter(0.0), DomainError);
  EXPECT_THROW(hazen_williams_slope(-1.0, 140.0, 1.0), DomainError);
  EXPECT_THROW(hazen_williams_slope(1.0, 0.0, 1.0), DomainError);
  EXPECT_THROW(borda_carnot_head_loss(1.0, 2.0, 1.0, 1.0, 9.81), DomainError);
  EXPECT_THROW(segment_pressure_drops(0.0, reference_pipe()), DomainError);
  EXPECT_THROW(roughness_from_observation(1.0, 1.0, 2.0, 0.0, geometry_params()), DomainError);
  PipeParams bad;
  bad.sigma1 = -1.0;
  EXPECT_THROW(bad.validate(), DomainError);
  bad = PipeParams{};
  bad.xi = -0.1;
  EXPECT_THROW(lambda_coefficients(bad), DomainError);
}

TEST(HydraulicsGolden, MatchesPinnedValues) {
  std::ifstream is(PGNNIV_GOLDEN_FILE);
  ASSERT_TRUE(is) << "missing golden file " << PGNNIV_GOLDEN_FILE;
  std::map<std::string, double> pinned;
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.rfind(" = ");
    ASSERT_NE(eq, std::string::npos) << line;
    pinned[line.substr(0, eq)] = std::stod(line.substr(eq + 3));
  }
  const auto cases = golden::hydraulics_cases();
  EXPECT_EQ(pinned.size(), cases.size());
  for (const auto& c : cases) {
    const auto it = pinned.find(golden::key(c));
    ASSERT_NE(it, pinned.end()) << "no golden record for " << golden::key(c);
    EXPECT_LT(rel_diff(c.eval(c.inputs), it->second, 1e-300), 1e-14) << golden::key(c);
  }
}

}  // namespace
