#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "heatpipe/errors.hpp"
#include "heatpipe/model.hpp"

namespace heatpipe {

template <std::size_t N>
using Vec = std::array<double, N>;

namespace detail {

template <std::size_t N>
Vec<N> axpy(const Vec<N>& y, double h, const Vec<N>& k) {
  Vec<N> out;
  for (std::size_t i = 0; i < N; ++i) {
    out[i] = y[i] + h * k[i];
  }
  return out;
}

} // namespace detail

/// One classical fourth-order Runge-Kutta step of y' = f(t, y).
template <std::size_t N, class F>
Vec<N> step_rk4(F&& f, double t, const Vec<N>& y, double dt) {
  const Vec<N> k1 = f(t, y);
  const Vec<N> k2 = f(t + 0.5 * dt, detail::axpy(y, 0.5 * dt, k1));
  const Vec<N> k3 = f(t + 0.5 * dt, detail::axpy(y, 0.5 * dt, k2));
  const Vec<N> k4 = f(t + dt, detail::axpy(y, dt, k3));
  Vec<N> out;
  for (std::size_t i = 0; i < N; ++i) {
    out[i] = y[i] + dt / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
  }
  return out;
}

/// Autonomous form, y' = f(y).
template <std::size_t N, class F>
Vec<N> step_rk4(F&& f, const Vec<N>& y, double dt) {
  return step_rk4<N>([&f](double, const Vec<N>& v) { return f(v); }, 0.0, y, dt);
}

/// One RK4 step of the coupled model.
inline State step_rk4(const State& s, const PhysicalParams& p, double p_v1, double p_v2, double dt) {
  if (!(dt > 0.0)) {
    throw DomainError("dt must be positive");
  }
  auto f = [&](const Vec<State::size>& y) { return rhs(State::from_array(y), p, p_v1, p_v2).to_array(); };
  return State::from_array(step_rk4<State::size>(f, s.to_array(), dt));
}

/// Number of uniform steps of size dt that fit in [0, t_end].
inline std::size_t step_count(double t_end, double dt) {
  if (!(t_end >= 0.0) || !std::isfinite(t_end)) {
    throw DomainError("t_end must be finite and non-negative");
  }
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw DomainError("dt must be finite and positive");
  }
  return static_cast<std::size_t>(std::floor(t_end / dt * (1.0 + 1e-12)));
}

/// Fixed-step integration of a generic system; returns the state at t = k dt
/// for k = 0 .. floor(t_end / dt).
template <std::size_t N, class F>
std::vector<Vec<N>> integrate_fixed(F&& f, const Vec<N>& y0, double t_end, double dt) {
  const std::size_t steps = step_count(t_end, dt);
  std::vector<Vec<N>> out;
  out.reserve(steps + 1);
  out.push_back(y0);
  for (std::size_t k = 0; k < steps; ++k) {
    out.push_back(step_rk4<N>(f, static_cast<double>(k) * dt, out.back(), dt));
  }
  return out;
}

enum class StopReason {
  completed,           ///< reached t_end
  plug_exhausted,      ///< x_p reached L_0
  invariant_violation, ///< a State invariant failed after a step
  domain_error,        ///< the right-hand side rejected an intermediate stage
};

inline const char* to_string(StopReason r) {
  switch (r) {
  case StopReason::completed: return "completed";
  case StopReason::plug_exhausted: return "plug_exhausted";
  case StopReason::invariant_violation: return "invariant_violation";
  case StopReason::domain_error: return "domain_error";
  }
  return "unknown";
}

struct IntegratorSettings {
  double t_end = 10.0;
  double dt = 1e-4;          ///< spacing of recorded states (s)
  std::size_t substeps = 1;  ///< RK4 steps per recorded interval; the coupled
                             ///< model at typical values needs dt / substeps <= 1e-7

  void validate() const {
    step_count(t_end, dt);
    if (substeps == 0) {
      throw DomainError("substeps must be at least 1");
    }
  }
};

struct Trajectory {
  std::vector<double> times;
  std::vector<State> states;
  PhysicalParams params;
  IntegratorSettings settings;
  double p_v1 = 0.0;
  double p_v2 = 0.0;
  StopReason status = StopReason::completed;
  std::size_t stop_step = 0; ///< index of the recorded interval that failed
  std::string message;

  bool completed() const { return status == StopReason::completed; }
};

/// Integrates the coupled model from `initial` with uniform output spacing.
/// Stops early, keeping every state recorded so far, when the plug reaches
/// the end of its column or a state invariant fails.
inline Trajectory simulate(const PhysicalParams& p, const State& initial, double p_v1, double p_v2,
                           const IntegratorSettings& settings) {
  p.validate();
  settings.validate();
  if (auto why = state_violation(initial, p); !why.empty()) {
    throw DomainError("initial state invalid: " + why);
  }
  if (!(initial.x_p < p.plug_column_length())) {
    throw DomainError("initial plug position beyond the plug column");
  }

  Trajectory tr;
  tr.params = p;
  tr.settings = settings;
  tr.p_v1 = p_v1;
  tr.p_v2 = p_v2;
  const std::size_t steps = step_count(settings.t_end, settings.dt);
  tr.times.reserve(steps + 1);
  tr.states.reserve(steps + 1);
  tr.times.push_back(0.0);
  tr.states.push_back(initial);

  const double h = settings.dt / static_cast<double>(settings.substeps);
  State s = initial;
  for (std::size_t k = 0; k < steps; ++k) {
    try {
      for (std::size_t j = 0; j < settings.substeps; ++j) {
        s = step_rk4(s, p, p_v1, p_v2, h);
        if (!(s.x_p < p.plug_column_length())) {
          tr.status = StopReason::plug_exhausted;
          tr.message = fmt::format("plug reached the end of its column (x_p = {})", s.x_p);
          break;
        }
        if (auto why = state_violation(s, p); !why.empty()) {
          tr.status = StopReason::invariant_violation;
          tr.message = why;
          break;
        }
      }
    } catch (const PlugExhaustedError& e) {
      tr.status = StopReason::plug_exhausted;
      tr.message = e.what();
    } catch (const DomainError& e) {
      tr.status = StopReason::domain_error;
      tr.message = e.what();
    }
    if (tr.status != StopReason::completed) {
      tr.stop_step = k + 1;
      tr.message = fmt::format("stopped in step {} (t = {}): {}", k + 1,
                               static_cast<double>(k + 1) * settings.dt, tr.message);
      return tr;
    }
    tr.times.push_back(static_cast<double>(k + 1) * settings.dt);
    tr.states.push_back(s);
  }
  return tr;
}

inline Trajectory simulate(const PhysicalParams& p, const State& initial, double p_v1, double p_v2, double t_end,
                           double dt) {
  return simulate(p, initial, p_v1, p_v2, IntegratorSettings{t_end, dt, 1});
}

} // namespace heatpipe
