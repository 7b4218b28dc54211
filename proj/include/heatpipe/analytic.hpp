#pragma once

// Closed-form startup solutions of the decoupled plug and film equations, and
// the right-hand sides of two reference plug models from the literature
// (a linear viscous-damping model with time-growing stiffness, and a
// quadratic-friction model) used for comparison curves.

#include <cmath>
#include <numbers>

#include "heatpipe/errors.hpp"
#include "heatpipe/model.hpp"

namespace heatpipe {

inline constexpr double lncosh_switch = 20.0;

/// ln(cosh(z)) without overflow; beyond |z| = 20 uses |z| - ln 2 + log1p(e^{-2|z|}).
inline double log_cosh(double z) {
  const double az = std::abs(z);
  if (az <= lncosh_switch) {
    return std::log(std::cosh(az));
  }
  return az - std::numbers::ln2 + std::log1p(std::exp(-2.0 * az));
}

/// Plug position from rest under x'' = A - B x'^2: (1/B) ln cosh(sqrt(AB) t).
inline double plug_position_lncosh(double A, double B, double t) {
  detail::require_positive(A, "A");
  detail::require_positive(B, "B");
  detail::require_finite(t, "t");
  if (t < 0.0) {
    throw DomainError("t must be non-negative");
  }
  return log_cosh(std::sqrt(A * B) * t) / B;
}

/// Velocity of the same solution, sqrt(A/B) tanh(sqrt(AB) t).
inline double plug_velocity_lncosh(double A, double B, double t) {
  detail::require_positive(A, "A");
  detail::require_positive(B, "B");
  return std::sqrt(A / B) * std::tanh(std::sqrt(A * B) * t);
}

/// Film temperature during startup, Q1 (1 - e^{-Q2 t}).
inline double film_temperature(double Q1, double Q2, double t) {
  return Q1 * -std::expm1(-Q2 * t);
}

/// x'' for the damped model x'' + a x' + b (k + t) x = 0.
inline double wong_rhs(double a, double b, double k, double t, double x, double dx) {
  return -a * dx - b * (k + t) * x;
}

/// x'' for x'' + (2C/d_i) x'^2 + (2g/L) x = dp / (L rho_l). The friction
/// term is even in x', as in the original model.
inline double yuan_rhs(double C, double d_i, double g, double L, double dp, double rho_l, double x, double dx) {
  detail::require_positive(d_i, "d_i");
  detail::require_positive(L, "L");
  detail::require_positive(rho_l, "rho_l");
  return dp / (L * rho_l) - 2.0 * C / d_i * dx * dx - 2.0 * g / L * x;
}

/// Evaporator-side pressure after the bubble is heated at constant mass and
/// volume from T_v0 to the wall temperature.
inline double heated_vapor_pressure(const PhysicalParams& p) {
  return vapor_pressure(p.initial_vapor_mass(), p.T_w, p.bubble_volume(), p.R_v);
}

struct PlugConstants {
  double A = 0.0;
  double B = 0.0;
  double terminal_velocity = 0.0; ///< sqrt(A/B), also the friction reference speed
  DimensionlessCoeffs coeffs;     ///< full coefficient set at that speed
};

/// A and B of the decoupled plug equation. A does not depend on friction;
/// B = gamma/beta1 does through C_f, which is evaluated at the terminal speed
/// sqrt(A/B) it produces. Solved in closed form on each friction branch.
inline PlugConstants startup_plug_constants(const PhysicalParams& p, double p_v1, double p_v2) {
  constexpr double pi = std::numbers::pi;
  const double core = p.core_diameter();
  const double beta = pi * core * core * (p_v1 - p_v2) / 4.0 + p.g;
  const double beta1 = p.rho_l * p.plug_column_length() * pi * p.d_i * p.d_i / 4.0;
  const double A = beta / beta1;
  if (!(A > 0.0) || !std::isfinite(A)) {
    throw DomainError(fmt::format("plug is not driven forward (A = {})", A));
  }
  // B = k C_f with k = pi d_i L_p rho_l / (2 beta1)
  const double k = pi * p.d_i * p.shear_length() * p.rho_l / (2.0 * beta1);
  const double re_per_speed = p.rho_l * p.d_i / p.mu_l;

  // laminar: v^2 = A / (k 16 / (re_per_speed v))  ->  v = A re_per_speed / (16 k)
  double v = A * re_per_speed / (16.0 * k);
  if (v * re_per_speed > laminar_reynolds_limit) {
    // turbulent: v^2 = A / (k 0.078 (re_per_speed v)^-1/4)
    const double vt = std::pow(A * std::pow(re_per_speed, 0.25) / (0.078 * k), 4.0 / 7.0);
    // Inside the branch discontinuity neither law is self-consistent; sit on the boundary.
    v = vt * re_per_speed > laminar_reynolds_limit ? vt : laminar_reynolds_limit / re_per_speed;
  }

  State ref = initial_state(p);
  ref.v_p = v;
  PlugConstants out;
  out.coeffs = nondim_coeffs(p, ref, p_v1, p_v2);
  out.A = out.coeffs.A;
  out.B = out.coeffs.B;
  out.terminal_velocity = v;
  return out;
}

/// Constants for the startup configuration: evaporator bubble heated to T_w,
/// opposite bubble at the initial pressure.
inline PlugConstants startup_plug_constants(const PhysicalParams& p) {
  return startup_plug_constants(p, heated_vapor_pressure(p), p.p_v0);
}

} // namespace heatpipe
