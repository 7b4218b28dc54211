#pragma once

// Lumped two-phase model of a single liquid plug between two vapour bubbles in
// a capillary pulsating heat pipe: constitutive relations, the coupled
// right-hand side and the nondimensional coefficient set of the startup model.
//
// Temperatures are carried in degrees Celsius and converted to Kelvin inside
// every gas-law and interfacial-flux expression.

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>

#include <fmt/format.h>

#include "heatpipe/errors.hpp"

namespace heatpipe {

inline constexpr double kelvin_offset = 273.15;

namespace detail {

inline void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw DomainError(fmt::format("{} is not finite", what));
  }
}

inline void require_positive(double v, const char* what) {
  require_finite(v, what);
  if (!(v > 0.0)) {
    throw DomainError(fmt::format("{} must be positive (got {})", what, v));
  }
}

inline double to_kelvin(double celsius, const char* what) {
  require_finite(celsius, what);
  const double k = celsius + kelvin_offset;
  if (!(k > 0.0)) {
    throw DomainError(fmt::format("{} is at or below absolute zero ({} C)", what, celsius));
  }
  return k;
}

} // namespace detail

/// Fluid, geometric and thermal constants. Defaults are the typical values of
/// a water-charged capillary pipe; `sigma`, `mu_l` and `h_lfv` are not among
/// the published typical values and carry conventional water figures.
struct PhysicalParams {
  double L = 0.18;           ///< mean plug length (m)
  double d_i = 3.3e-3;       ///< inner diameter (m)
  double delta = 2.5e-5;     ///< liquid film thickness (m)
  double sigma = 0.0728;     ///< surface tension (N/m)
  double sigma0 = 1.0;       ///< accommodation coefficient, in (0, 2)
  double g = 9.8;            ///< gravity along the tube (m/s^2); may be <= 0
  double rho_l = 1000.0;     ///< liquid density (kg/m^3)
  double rho_v = 1.0;        ///< vapour density (kg/m^3)
  double h_lfv = 100.0;      ///< film-vapour heat transfer coefficient (W/m^2K)
  double h_lfw = 1000.0;     ///< film-wall heat transfer coefficient (W/m^2K)
  double h_v = 10.0;         ///< latent/vapour heat coefficient (W/m^2K)
  double c_vv = 1800.0;      ///< vapour specific heat (J/kg C)
  double c_vl = 1900.0;      ///< liquid specific heat (J/kg C)
  double R = 8.31;           ///< gas constant in the interfacial flux (J/mol K)
  double R_v = 461.0;        ///< specific gas constant of the vapour (J/kg K)
  double mu_l = 1.0e-3;      ///< liquid dynamic viscosity (Pa s)
  double L_v = 0.02;         ///< vapour bubble length (m)
  std::optional<double> L_0; ///< plug column length (m); unset means 25 d_i
  std::optional<double> L_p; ///< plug length in the shear term (m); unset means L
  double T_w = 40.0;         ///< wall temperature (C)
  double T_v0 = 20.0;        ///< initial vapour temperature (C)
  double p_v0 = 1.0e5;       ///< initial vapour pressure (Pa), seeds m_v0
  double p_l = 5.5816e4;     ///< liquid-side pressure in the interfacial flux (Pa)
  double m_f0_ratio = 0.1;   ///< film mass as a fraction of m_v0
  double r_v = 0.0;          ///< condensation rate used when T_w <= T_v (kg/m^2s)

  static constexpr double default_plug_column_ratio = 25.0;

  double plug_column_length() const { return L_0.value_or(default_plug_column_ratio * d_i); }
  double shear_length() const { return L_p.value_or(L); }
  double core_diameter() const { return d_i - 2.0 * delta; }
  double cross_section() const { return std::numbers::pi * d_i * d_i / 4.0; }

  /// Bubble volume (pi d_i^2 / 4)(L + L_v); held constant during a run.
  double bubble_volume() const { return cross_section() * (L + L_v); }

  double initial_vapor_mass() const {
    return p_v0 * bubble_volume() / (R_v * detail::to_kelvin(T_v0, "T_v0"));
  }

  double film_mass() const { return m_f0_ratio * initial_vapor_mass(); }

  /// Throws DomainError naming the first violated invariant.
  void validate() const {
    using detail::require_finite;
    using detail::require_positive;
    require_positive(L, "L");
    require_positive(d_i, "d_i");
    require_positive(delta, "delta");
    require_positive(sigma, "sigma");
    require_finite(g, "g");
    require_positive(rho_l, "rho_l");
    require_positive(rho_v, "rho_v");
    require_positive(h_lfv, "h_lfv");
    require_positive(h_lfw, "h_lfw");
    require_positive(h_v, "h_v");
    require_positive(c_vv, "c_vv");
    require_positive(c_vl, "c_vl");
    require_positive(R, "R");
    require_positive(R_v, "R_v");
    require_positive(mu_l, "mu_l");
    require_positive(L_v, "L_v");
    require_positive(plug_column_length(), "L_0");
    require_positive(shear_length(), "L_p");
    require_positive(p_v0, "p_v0");
    require_finite(p_l, "p_l");
    if (p_l < 0.0) {
      throw DomainError("p_l must be non-negative");
    }
    require_positive(m_f0_ratio, "m_f0_ratio");
    require_finite(r_v, "r_v");
    require_finite(sigma0, "sigma0");
    if (!(sigma0 > 0.0 && sigma0 < 2.0)) {
      throw DomainError(fmt::format("sigma0 must lie in (0, 2) (got {})", sigma0));
    }
    if (!(d_i > 2.0 * delta)) {
      throw DomainError("d_i must exceed twice the film thickness");
    }
    if (!(rho_l > rho_v)) {
      throw DomainError("rho_l must exceed rho_v");
    }
    detail::to_kelvin(T_w, "T_w");
    detail::to_kelvin(T_v0, "T_v0");
  }
};

/// Instantaneous dynamical variables.
struct State {
  double T_v = 20.0; ///< vapour temperature (C)
  double tau = 20.0; ///< liquid film temperature (C)
  double m_v = 0.0;  ///< vapour mass (kg)
  double x_p = 0.0;  ///< plug position (m)
  double v_p = 0.0;  ///< plug velocity (m/s)

  static constexpr std::size_t size = 5;

  std::array<double, size> to_array() const { return {T_v, tau, m_v, x_p, v_p}; }
  static State from_array(const std::array<double, size>& a) { return {a[0], a[1], a[2], a[3], a[4]}; }

  bool operator==(const State&) const = default;
};

/// Time derivatives of State, component for component.
struct Derivative {
  double dT_v = 0.0;
  double dtau = 0.0;
  double dm_v = 0.0;
  double dx_p = 0.0;
  double dv_p = 0.0;

  std::array<double, State::size> to_array() const { return {dT_v, dtau, dm_v, dx_p, dv_p}; }

  bool operator==(const Derivative&) const = default;
};

/// Startup state: vapour and film at T_v0, vapour mass from the gas law at
/// p_v0, plug at rest at the origin.
inline State initial_state(const PhysicalParams& p) {
  return State{p.T_v0, p.T_v0, p.initial_vapor_mass(), 0.0, 0.0};
}

/// Largest diameter sustaining capillary plugs: 2 sqrt(sigma / (g (rho_l - rho_v))).
inline double critical_diameter(double sigma, double g, double rho_l, double rho_v) {
  detail::require_finite(sigma, "sigma");
  detail::require_positive(g, "g");
  detail::require_finite(rho_l, "rho_l");
  detail::require_finite(rho_v, "rho_v");
  if (sigma < 0.0) {
    throw DomainError("sigma must be non-negative");
  }
  if (!(rho_l > rho_v)) {
    throw DomainError("critical diameter requires rho_l > rho_v");
  }
  return 2.0 * std::sqrt(sigma / (g * (rho_l - rho_v)));
}

/// Net interfacial mass flux r_m (kg/m^2 s). Positive when the vapour side
/// dominates, which removes mass from the bubble.
inline double interfacial_mass_flux(double p_v, double T_v, double p_l, double tau, double sigma0,
                                    double R) {
  detail::require_finite(p_v, "p_v");
  detail::require_finite(p_l, "p_l");
  detail::require_positive(R, "R");
  detail::require_finite(sigma0, "sigma0");
  if (!(sigma0 > 0.0 && sigma0 < 2.0)) {
    throw DomainError("sigma0 must lie in (0, 2)");
  }
  const double tv = detail::to_kelvin(T_v, "T_v");
  const double tl = detail::to_kelvin(tau, "tau");
  const double accommodation = 2.0 * sigma0 / (2.0 - sigma0);
  return accommodation / std::sqrt(2.0 * std::numbers::pi * R) * (p_v / std::sqrt(tv) - p_l / std::sqrt(tl));
}

/// Ideal-gas vapour pressure m_v R_v T / V.
inline double vapor_pressure(double m_v, double T_v, double V, double R_v) {
  detail::require_finite(m_v, "m_v");
  detail::require_positive(V, "V");
  detail::require_positive(R_v, "R_v");
  detail::require_finite(T_v, "T_v");
  if (m_v < 0.0) {
    throw DomainError("m_v must be non-negative");
  }
  const double kelvin = T_v + kelvin_offset;
  if (kelvin < 0.0) {
    throw DomainError("T_v is below absolute zero");
  }
  return m_v * R_v * kelvin / V;
}

/// Inverse of vapor_pressure for the mass.
inline double vapor_mass(double p_v, double T_v, double V, double R_v) {
  detail::require_positive(p_v, "p_v");
  detail::require_positive(V, "V");
  detail::require_positive(R_v, "R_v");
  return p_v * V / (R_v * detail::to_kelvin(T_v, "T_v"));
}

inline constexpr double laminar_reynolds_limit = 1180.0;

/// Wall friction coefficient: 16/Re up to Re = 1180 inclusive, 0.078 Re^-1/4 above.
inline double friction_factor(double Re) {
  detail::require_positive(Re, "Re");
  if (Re <= laminar_reynolds_limit) {
    return 16.0 / Re;
  }
  return 0.078 * std::pow(Re, -0.25);
}

inline double reynolds_number(double rho_l, double v_p, double d_i, double mu_l) {
  return rho_l * std::abs(v_p) * d_i / mu_l;
}

/// Shear magnitude C_f rho_l v_p^2 / 2. The momentum equation applies it against the motion.
inline double wall_shear(double c_f, double rho_l, double v_p) {
  detail::require_finite(c_f, "C_f");
  detail::require_finite(rho_l, "rho_l");
  detail::require_finite(v_p, "v_p");
  return 0.5 * c_f * rho_l * v_p * v_p;
}

/// Mass of the liquid column ahead of the plug, rho_l (pi d_i^2/4)(L_0 - x_p).
inline double plug_mass(double x_p, const PhysicalParams& p) {
  detail::require_finite(x_p, "x_p");
  const double column = p.plug_column_length();
  if (!(x_p < column)) {
    throw PlugExhaustedError(fmt::format("plug exhausted: x_p = {} >= L_0 = {}", x_p, column));
  }
  return p.rho_l * p.cross_section() * (column - x_p);
}

/// Condensation rate entering the bubble volume balance; zero while the wall is hotter than the vapour.
inline double condensation_rate(const PhysicalParams& p, double T_v) {
  return p.T_w > T_v ? 0.0 : p.r_v;
}

/// Right-hand side of the coupled vapour/film/plug system. p_v1 and p_v2 are
/// the pressures on the two sides of the plug.
inline Derivative rhs(const State& s, const PhysicalParams& p, double p_v1, double p_v2) {
  for (double v : s.to_array()) {
    detail::require_finite(v, "state component");
  }
  detail::require_finite(p_v1, "p_v1");
  detail::require_finite(p_v2, "p_v2");
  detail::require_positive(s.m_v, "m_v");

  constexpr double pi = std::numbers::pi;
  const double core = p.core_diameter();
  const double wetted = p.L * pi * core;
  const double V = p.bubble_volume();
  const double p_v = vapor_pressure(s.m_v, s.T_v, V, p.R_v);
  const double r_m = interfacial_mass_flux(p_v, s.T_v, p.p_l, s.tau, p.sigma0, p.R);
  const double r_v = condensation_rate(p, s.T_v);

  Derivative d;
  d.dT_v = (-p.h_lfv * (s.T_v - s.tau) * wetted - r_m * p.h_v * wetted -
            p_v * (pi / p.rho_v) * (core * r_m - p.d_i * p.L_v * r_v)) /
           (s.m_v * p.c_vv);
  d.dtau = (-p.h_lfw * (s.tau - p.T_w) * p.L * pi * p.d_i + p.h_lfv * (s.T_v - s.tau) * wetted +
            r_m * p.h_v * wetted) /
           (p.film_mass() * p.c_vl);
  d.dm_v = -pi * core * r_m;

  const double m_p = plug_mass(s.x_p, p);
  double friction = 0.0;
  if (s.v_p != 0.0) {
    const double c_f = friction_factor(reynolds_number(p.rho_l, s.v_p, p.d_i, p.mu_l));
    friction = std::copysign(pi * p.d_i * p.shear_length() * wall_shear(c_f, p.rho_l, s.v_p), s.v_p);
  }
  d.dx_p = s.v_p;
  d.dv_p = (pi / 4.0 * core * core * (p_v1 - p_v2) - friction + m_p * p.g) / m_p;
  return d;
}

/// Coefficients of the nondimensionalised system, evaluated exactly as the
/// model writes them (including the bare g in beta), plus the startup-model
/// constants A, B, Q1, Q2 derived from them.
struct DimensionlessCoeffs {
  double a = 0.0;
  double alpha1 = 0.0;
  double alpha2 = 0.0;
  double alpha3 = 0.0;
  double b = 0.0;
  double eps = 0.0;
  double Delta = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  double beta1 = 0.0;
  double beta2 = 0.0;
  double A = 0.0;
  double B = 0.0;
  double Q1 = 0.0;
  double Q2 = 0.0;
  double u = 0.0; ///< m_v / m_v0
};

/// The friction coefficient in gamma is evaluated at the state's plug speed,
/// so the state must be moving.
inline DimensionlessCoeffs nondim_coeffs(const PhysicalParams& p, const State& s, double p_v1, double p_v2) {
  detail::require_positive(s.m_v, "m_v");
  detail::require_finite(p_v1, "p_v1");
  detail::require_finite(p_v2, "p_v2");
  if (s.v_p == 0.0 || !std::isfinite(s.v_p)) {
    throw DomainError("friction coefficient is undefined for a plug at rest; supply a reference velocity");
  }
  constexpr double pi = std::numbers::pi;
  const double core = p.core_diameter();
  const double p_v = vapor_pressure(s.m_v, s.T_v, p.bubble_volume(), p.R_v);
  const double r_m = interfacial_mass_flux(p_v, s.T_v, p.p_l, s.tau, p.sigma0, p.R);
  const double r_v = condensation_rate(p, s.T_v);
  const double m_v0 = p.initial_vapor_mass();
  const double m_f = p.film_mass();
  const double c_f = friction_factor(reynolds_number(p.rho_l, s.v_p, p.d_i, p.mu_l));

  DimensionlessCoeffs c;
  c.a = -p.h_lfv * p.L * pi * core / p.c_vv;
  c.alpha1 = r_m * p.h_v * p.L * pi * core / p.c_vv;
  c.alpha2 = p_v * pi / (p.rho_v * p.c_vv) * (core * r_m - p.d_i * p.L_v * r_v);
  c.b = -p.h_lfv * p.L * pi * core / (m_f * p.c_vl);
  c.eps = p.h_lfw * p.L * pi * p.d_i / (m_f * p.c_vl);
  c.alpha3 = r_m * p.h_v * p.L * pi * core / (m_f * p.c_vl);
  c.Delta = pi * core * r_m / m_v0;
  c.beta = pi * core * core * (p_v1 - p_v2) / 4.0 + p.g;
  c.gamma = pi * p.d_i * p.shear_length() * c_f * p.rho_l / 2.0;
  c.beta1 = p.rho_l * p.plug_column_length() * pi * p.d_i * p.d_i / 4.0;
  c.beta2 = p.rho_l * pi * p.d_i * p.d_i / 4.0;
  if (c.beta1 == 0.0) {
    throw DomainError("beta1 vanishes");
  }
  c.A = c.beta / c.beta1;
  c.B = c.gamma / c.beta1;
  c.Q1 = c.b * s.T_v + c.alpha3;
  c.Q2 = c.b + c.eps;
  c.u = s.m_v / m_v0;
  return c;
}

/// Checks the State invariants (positive mass, absolute temperatures and
/// pressure, all finite). Returns an empty string when they hold.
inline std::string state_violation(const State& s, const PhysicalParams& p) {
  for (double v : s.to_array()) {
    if (!std::isfinite(v)) {
      return "non-finite state component";
    }
  }
  if (!(s.m_v > 0.0)) {
    return fmt::format("vapour mass non-positive (m_v = {})", s.m_v);
  }
  if (!(s.T_v + kelvin_offset > 0.0)) {
    return fmt::format("vapour temperature below absolute zero (T_v = {})", s.T_v);
  }
  if (!(s.tau + kelvin_offset > 0.0)) {
    return fmt::format("film temperature below absolute zero (tau = {})", s.tau);
  }
  const double p_v = s.m_v * p.R_v * (s.T_v + kelvin_offset) / p.bubble_volume();
  if (!(p_v > 0.0) || !std::isfinite(p_v)) {
    return "vapour pressure non-positive";
  }
  return {};
}

} // namespace heatpipe
