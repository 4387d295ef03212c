#pragma once

// Closed-form head-loss model of a two-segment pipe with a sudden expansion.
//
// Distributed losses follow Hazen-Williams (or laminar Darcy-Weisbach), the
// expansion loss follows Borda-Carnot. Every accuracy figure produced by the
// experiments is scored against these functions.

#include <cmath>
#include <numbers>
#include <string>

#include "pgnniv/errors.hpp"

namespace pgnniv::hydraulics {

struct PipeParams {
  double sigma1 = 1.0;  // m^2
  double sigma2 = 2.0;  // m^2
  double kappa1 = 140.0;
  double kappa2 = 140.0;
  double delta1 = 10.0;  // m
  double delta2 = 10.0;  // m
  double rho = 1.0;
  double g = 9.81;  // m/s^2
  double xi = 1.0;
  double hw_lambda = 10.67;
  double hw_alpha = 1.8520;
  double hw_beta = -4.8704;
  double nu = 5.0e-4;  // m^2/s, laminar Darcy-Weisbach only

  double gamma() const { return rho * g; }

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0)) throw DomainError(std::string(name) + " must be positive");
    };
    positive(sigma1, "sigma1");
    positive(sigma2, "sigma2");
    positive(kappa1, "kappa1");
    positive(kappa2, "kappa2");
    positive(delta1, "delta1");
    positive(delta2, "delta2");
    positive(g, "g");
    if (!(xi >= 0.0)) throw DomainError("xi must be non-negative");
  }
};

/// Fixed-geometry pipe used by the prediction studies.
inline PipeParams reference_pipe() { return PipeParams{}; }

/// Straight pipe, no expansion loss, kappa = (140, 100).
inline PipeParams geometry_params() {
  PipeParams p;
  p.sigma1 = 1.0;
  p.sigma2 = 1.0;
  p.xi = 0.0;
  p.kappa1 = 140.0;
  p.kappa2 = 100.0;
  return p;
}

struct SegmentDrops {
  double dp1 = 0.0;
  double dpe = 0.0;
  double dp2 = 0.0;

  double total() const { return dp1 + dpe + dp2; }
};

/// Reduced coefficients of dp = l1 q^2 + l2 q^l3.
struct LambdaCoefficients {
  double l1 = 0.0;
  double l2 = 0.0;
  double l3 = 0.0;
};

/// Diameter of the circle with area `sigma`.
inline double hydraulic_diameter(double sigma) {
  if (!(sigma > 0.0)) throw DomainError("hydraulic_diameter: area must be positive");
  return std::sqrt(4.0 * sigma / std::numbers::pi);
}

/// Head loss per unit length, Hazen-Williams form.
inline double hazen_williams_slope(double q, double kappa, double diameter,
                                   const PipeParams& c = PipeParams{}) {
  if (!(q > 0.0)) throw DomainError("hazen_williams_slope: flow must be positive");
  if (!(kappa > 0.0)) throw DomainError("hazen_williams_slope: roughness must be positive");
  if (!(diameter > 0.0)) throw DomainError("hazen_williams_slope: diameter must be positive");
  return c.hw_lambda * std::pow(q / kappa, c.hw_alpha) * std::pow(diameter, c.hw_beta);
}

/// Head loss per unit length, Darcy-Weisbach form.
inline double darcy_weisbach_slope(double v, double friction, double diameter, double g) {
  if (!(v >= 0.0)) throw DomainError("darcy_weisbach_slope: velocity must be non-negative");
  if (!(diameter > 0.0)) throw DomainError("darcy_weisbach_slope: diameter must be positive");
  return friction * v * v / (2.0 * g * diameter);
}

/// Laminar Darcy friction factor 64 nu / (v D).
inline double laminar_friction_factor(double v, double diameter, double nu) {
  if (!(v > 0.0)) throw DomainError("laminar_friction_factor: velocity must be positive");
  return 64.0 * nu / (v * diameter);
}

/// Localized head loss at a sudden expansion from sigma1 to sigma2.
inline double borda_carnot_head_loss(double v1, double sigma1, double sigma2, double xi, double g) {
  if (!(sigma1 > 0.0)) throw DomainError("borda_carnot_head_loss: sigma1 must be positive");
  if (sigma2 < sigma1) throw DomainError("borda_carnot_head_loss: only expansions are modelled");
  if (!(v1 >= 0.0)) throw DomainError("borda_carnot_head_loss: velocity must be non-negative");
  const double r = 1.0 - sigma1 / sigma2;
  return xi * r * r * v1 * v1 / (2.0 * g);
}

/// Expansion bracket (1/s2^2 - 1/s1^2) + xi (1/s1 - 1/s2)^2.
inline double expansion_bracket(const PipeParams& p) {
  const double inv1 = 1.0 / p.sigma1, inv2 = 1.0 / p.sigma2;
  return (inv2 * inv2 - inv1 * inv1) + p.xi * (inv1 - inv2) * (inv1 - inv2);
}

inline SegmentDrops segment_pressure_drops(double q, const PipeParams& p) {
  if (!(q > 0.0)) throw DomainError("segment_pressure_drops: flow must be positive");
  p.validate();
  const double gamma = p.gamma();
  SegmentDrops d;
  d.dp1 = gamma * hazen_williams_slope(q, p.kappa1, hydraulic_diameter(p.sigma1), p) * p.delta1;
  d.dpe = 0.5 * p.rho * q * q * expansion_bracket(p);
  d.dp2 = gamma * hazen_williams_slope(q, p.kappa2, hydraulic_diameter(p.sigma2), p) * p.delta2;
  return d;
}

/// Same drops with a laminar Darcy-Weisbach distributed loss.
inline SegmentDrops segment_pressure_drops_darcy(double q, const PipeParams& p) {
  if (!(q > 0.0)) throw DomainError("segment_pressure_drops_darcy: flow must be positive");
  p.validate();
  auto segment = [&](double sigma, double delta) {
    const double v = q / sigma;
    const double diameter = hydraulic_diameter(sigma);
    return p.gamma() * darcy_weisbach_slope(v, laminar_friction_factor(v, diameter, p.nu), diameter, p.g) *
           delta;
  };
  SegmentDrops d;
  d.dp1 = segment(p.sigma1, p.delta1);
  d.dpe = 0.5 * p.rho * q * q * expansion_bracket(p);
  d.dp2 = segment(p.sigma2, p.delta2);
  return d;
}

/// l2 uses the diameter power (2/sqrt(pi))^beta sigma^(beta/2) so that the
/// reduced form matches the per-segment drops exactly.
inline LambdaCoefficients lambda_coefficients(const PipeParams& p) {
  p.validate();
  LambdaCoefficients c;
  c.l1 = 0.5 * p.rho * expansion_bracket(p);
  const double prefactor = p.hw_lambda * p.gamma() * std::pow(2.0 / std::sqrt(std::numbers::pi), p.hw_beta);
  c.l2 = prefactor * (std::pow(p.sigma1, p.hw_beta / 2.0) * std::pow(p.kappa1, -p.hw_alpha) * p.delta1 +
                      std::pow(p.sigma2, p.hw_beta / 2.0) * std::pow(p.kappa2, -p.hw_alpha) * p.delta2);
  c.l3 = p.hw_alpha;
  return c;
}

inline double total_pressure_drop(double q, const PipeParams& p) {
  if (!(q > 0.0)) throw DomainError("total_pressure_drop: flow must be positive");
  const auto c = lambda_coefficients(p);
  return c.l1 * q * q + c.l2 * std::pow(q, c.l3);
}

struct Roughness {
  double kappa1 = 0.0;
  double kappa2 = 0.0;
};

/// Inverts the Hazen-Williams drop of each segment for its roughness.
/// Valid when p0 - p1 and p1 - p2 are purely distributed losses (no expansion).
inline Roughness roughness_from_observation(double q, double p0, double p1, double p2, const PipeParams& p) {
  if (!(q > 0.0)) throw DomainError("roughness_from_observation: flow must be positive");
  if (!(p0 - p1 > 0.0) || !(p1 - p2 > 0.0)) {
    throw DomainError("roughness_from_observation: pressure drops must be positive");
  }
  const double gamma = p.gamma();
  auto kappa = [&](double sigma, double delta, double drop) {
    const double k = gamma * p.hw_lambda * std::pow(hydraulic_diameter(sigma), p.hw_beta) * delta;
    return std::pow(k, 1.0 / p.hw_alpha) * q * std::pow(drop, -1.0 / p.hw_alpha);
  };
  return {kappa(p.sigma1, p.delta1, p0 - p1), kappa(p.sigma2, p.delta2, p1 - p2)};
}

/// Per-segment coefficients of the Hazen-Williams model layer:
/// hw_lambda * D_i^beta / kappa_i^alpha, one per segment.
inline double hazen_williams_segment_coefficient(double sigma, double kappa, const PipeParams& p) {
  return p.hw_lambda * std::pow(hydraulic_diameter(sigma), p.hw_beta) / std::pow(kappa, p.hw_alpha);
}

/// Per-segment coefficient of the laminar Darcy-Weisbach model layer: nu / D_i.
inline double darcy_segment_coefficient(double sigma, const PipeParams& p) {
  return p.nu / hydraulic_diameter(sigma);
}

}  // namespace pgnniv::hydraulics
