// Acceptance checks. Prints one PASS/FAIL line per criterion, with detail
// lines underneath, and exits nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "heatpipe/analytic.hpp"
#include "heatpipe/estimation.hpp"
#include "heatpipe/firefly.hpp"
#include "heatpipe/integrator.hpp"
#include "heatpipe/model.hpp"

using namespace heatpipe;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = true;
  std::vector<std::string> details;

  void require(bool ok, std::string line) {
    pass = pass && ok;
    details.push_back(fmt::format("{} {}", ok ? "ok  " : "FAIL", line));
  }
};

int failures = 0;

void report(int number, const char* title, const std::function<Outcome()>& check) {
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o.require(false, fmt::format("exception: {}", e.what()));
  }
  failures += o.pass ? 0 : 1;
  fmt::print("{} criterion {}: {}\n", o.pass ? "PASS" : "FAIL", number, title);
  for (const auto& d : o.details) {
    fmt::print("    {}\n", d);
  }
  std::fflush(stdout);
}

// -- shared synthetic data set for criteria 4, 5 and 7 -----------------------

constexpr std::uint64_t data_seed = 1;
constexpr std::uint64_t fit_seed = 1;
constexpr std::size_t n_observations = 25;
constexpr double relative_noise = 0.02;
constexpr std::size_t ensemble_runs = 40;

PhysicalParams truth() {
  PhysicalParams p;
  p.L = 0.18;
  p.d_i = 0.0033;
  p.T_v0 = 20.0;
  p.T_w = 40.0;
  p.p_v0 = 100e3;
  return p;
}

const ObservationSet& observations() {
  static const ObservationSet obs =
      generate_synthetic(truth(), ForwardConfig{}, n_observations, NoiseModel{0.0, relative_noise}, data_seed);
  return obs;
}

EstimationProblem problem(ObjectiveMode mode) {
  EstimationProblem pr;
  for (Parameter p : all_parameters) {
    pr.free.push_back(mode == ObjectiveMode::penalized ? constrained_box(p) : loose_box(p));
  }
  pr.fixed = truth();
  pr.observations = observations();
  pr.mode = mode;
  return pr;
}

/// Standard deviations reported for the constrained fit of the real data.
double reference_std(Parameter p) {
  switch (p) {
  case Parameter::L: return 0.01;
  case Parameter::d_i: return 0.0004;
  case Parameter::T_v: return 0.9;
  case Parameter::T_w: return 1.1;
  case Parameter::p_v: return 8.8;
  }
  return 0.0;
}

const EnsembleResult& constrained_fit() {
  static const EnsembleResult r = fit_constrained(problem(ObjectiveMode::penalized), firefly::Config{},
                                                  ensemble_runs, fit_seed);
  return r;
}

// -- criteria -----------------------------------------------------------------

Outcome analytic_numeric_equivalence() {
  Outcome o;
  const PlugConstants startup = startup_plug_constants(PhysicalParams{});
  for (auto [A, B] : {std::pair{startup.A, startup.B}, std::pair{1.0, 1.0}, std::pair{90.0, 5.0}}) {
    const auto start = Clock::now();
    const double dt = 1e-4;
    const auto field = [A, B](const Vec<2>& y) { return Vec<2>{y[1], A - B * y[1] * y[1]}; };
    const auto ys = integrate_fixed<2>([&](double, const Vec<2>& y) { return field(y); }, Vec<2>{0.0, 0.0}, 2.0, dt);
    double worst = 0.0;
    for (std::size_t k = 1; k < ys.size(); ++k) {
      const double exact = plug_position_lncosh(A, B, static_cast<double>(k) * dt);
      worst = std::max(worst, std::abs(ys[k][0] - exact) / std::abs(exact));
    }
    const double elapsed = seconds_since(start);
    o.require(worst < 1e-6 && elapsed < 1.0,
              fmt::format("A = {:.6g}, B = {:.6g}: max relative error {:.3e} (< 1e-6), {:.3f} s (< 1 s)", A, B, worst,
                          elapsed));
  }
  return o;
}

Outcome film_temperature_equivalence() {
  Outcome o;
  const PlugConstants startup = startup_plug_constants(PhysicalParams{});
  for (auto [Q1, Q2] : {std::pair{startup.coeffs.Q1, startup.coeffs.Q2}, std::pair{1.0, 1.0}}) {
    const auto start = Clock::now();
    const double dt = 1e-3 / Q2;
    const auto ys = integrate_fixed<1>([Q1, Q2](double, const Vec<1>& y) { return Vec<1>{Q1 * Q2 - Q2 * y[0]}; },
                                       Vec<1>{0.0}, 5.0 / Q2, dt);
    double worst = 0.0;
    for (std::size_t k = 0; k < ys.size(); ++k) {
      worst = std::max(worst, std::abs(ys[k][0] - film_temperature(Q1, Q2, static_cast<double>(k) * dt)));
    }
    const double elapsed = seconds_since(start);
    o.require(worst < 1e-8 && elapsed < 1.0,
              fmt::format("Q1 = {:.6g}, Q2 = {:.6g}: max abs error {:.3e} (< 1e-8) over 5/Q2, {:.3f} s (< 1 s)", Q1,
                          Q2, worst, elapsed));
  }
  return o;
}

Outcome firefly_sphere_benchmark() {
  Outcome o;
  const auto start = Clock::now();
  const firefly::Bounds box{std::vector<double>(5, -5.0), std::vector<double>(5, 5.0)};
  const auto sphere = [](std::span<const double> x) { return std::inner_product(x.begin(), x.end(), x.begin(), 0.0); };
  int solved = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    firefly::Config cfg;
    cfg.population = 20;
    cfg.gamma = 1.0;
    cfg.beta0 = 1.0;
    cfg.iterations = 5000;
    cfg.seed = seed;
    const double best = firefly::optimize(sphere, box, cfg).best_value;
    solved += best < 1e-4;
    worst = std::max(worst, best);
  }
  const double elapsed = seconds_since(start);
  o.require(solved >= 38, fmt::format("{}/40 runs below 1e-4 (need >= 38); worst {:.3e}", solved, worst));
  o.require(elapsed < 120.0, fmt::format("{:.1f} s (< 120 s)", elapsed));
  return o;
}

Outcome constrained_reproduction() {
  Outcome o;
  const auto start = Clock::now();
  const EnsembleResult& r = constrained_fit();
  const double elapsed = seconds_since(start);
  o.require(r.stats.runs == ensemble_runs, fmt::format("{} of {} runs converged", r.stats.runs, ensemble_runs));
  const PhysicalParams t = truth();
  for (const ParameterSummary& s : r.stats.parameters) {
    const double ref = reference_std(s.parameter);
    const double deviation = std::abs(s.mean - get_parameter(t, s.parameter));
    o.require(deviation < ref, fmt::format("{:<4} |mean - truth| = {:.4g} (< {:.4g} {})", to_string(s.parameter),
                                           deviation, ref, unit_of(s.parameter)));
    const double ratio = s.stddev / ref;
    o.require(ratio >= 1.0 / 3.0 && ratio <= 3.0,
              fmt::format("{:<4} std = {:.4g}, {:.3g}x the reference {:.4g} (within [1/3, 3])", to_string(s.parameter),
                          s.stddev, ratio, ref));
  }
  o.require(elapsed < 900.0, fmt::format("{:.1f} s (< 900 s)", elapsed));
  return o;
}

Outcome unconstrained_contrast() {
  Outcome o;
  const auto start = Clock::now();
  const EnsembleResult lsq = fit_lsq(problem(ObjectiveMode::lsq), firefly::Config{}, ensemble_runs, fit_seed);
  const double elapsed = seconds_since(start);
  const EnsembleResult& constrained = constrained_fit();
  int wider = 0;
  for (std::size_t k = 0; k < lsq.stats.parameters.size(); ++k) {
    const ParameterSummary& u = lsq.stats.parameters[k];
    const ParameterSummary& c = constrained.stats.parameters[k];
    const double range = u.max - u.min;
    const double band = 4.0 * c.stddev;
    const bool ok = range >= 3.0 * band;
    wider += ok;
    o.details.push_back(fmt::format("{} {:<4} lsq range {:.4g} vs constrained +-2 std band {:.4g} (ratio {:.3g})",
                                    ok ? "wide" : "    ", to_string(u.parameter), range, band, range / band));
  }
  o.require(wider >= 3, fmt::format("{} of 5 parameters at least 3x wider (need >= 3)", wider));
  o.require(elapsed < 900.0, fmt::format("{:.1f} s (< 900 s)", elapsed));
  return o;
}

Outcome invariant_suites() {
  Outcome o;
  const auto start = Clock::now();
  constexpr int cases = 1000;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto between = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  int mass_ok = 0;
  for (int i = 0; i < cases; ++i) {
    PhysicalParams p;
    p.d_i = between(5e-4, 5e-3);
    p.delta = p.d_i * between(0.001, 0.1);
    p.rho_l = between(500.0, 2000.0);
    const double column = p.plug_column_length();
    double a = between(0.0, column), b = between(0.0, column);
    if (a > b) {
      std::swap(a, b);
    }
    mass_ok += a < b && plug_mass(a, p) > plug_mass(b, p) && plug_mass(b, p) > 0.0;
    mass_ok += a == b; // measure-zero tie counts as vacuous
  }
  o.require(mass_ok == cases, fmt::format("plug mass strictly decreasing: {}/{}", mass_ok, cases));

  int gas_ok = 0;
  for (int i = 0; i < cases; ++i) {
    const double m = between(1e-9, 1e-3), t = between(-200.0, 500.0), v = between(1e-9, 1e-2), rv = between(100, 5000);
    const double pv = vapor_pressure(m, t, v, rv);
    gas_ok += std::abs(vapor_pressure(vapor_mass(pv, t, v, rv), t, v, rv) - pv) <= 1e-12 * pv;
  }
  o.require(gas_ok == cases, fmt::format("gas-law round trip within 1e-12: {}/{}", gas_ok, cases));

  int friction_ok = 0;
  for (int i = 0; i < cases; ++i) {
    const double re = std::pow(10.0, between(-2.0, 7.0));
    const double expected = re <= 1180.0 ? 16.0 / re : 0.078 * std::pow(re, -0.25);
    friction_ok += friction_factor(re) == expected && friction_factor(re) > 0.0;
  }
  o.require(friction_ok == cases, fmt::format("friction branch values: {}/{}", friction_ok, cases));

  int history_ok = 0, bounds_ok = 0, seed_ok = 0;
  for (int i = 0; i < cases; ++i) {
    const std::size_t dim = 1 + i % 5;
    firefly::Bounds box{std::vector<double>(dim), std::vector<double>(dim)};
    std::vector<double> shift(dim);
    for (std::size_t d = 0; d < dim; ++d) {
      box.lower[d] = between(-10.0, 0.0);
      box.upper[d] = box.lower[d] + between(0.0, 10.0);
      shift[d] = between(-10.0, 10.0);
    }
    firefly::Config cfg;
    cfg.population = 6;
    cfg.iterations = 15;
    cfg.alpha = between(0.0, 2.0);
    cfg.randomization = static_cast<firefly::Randomization>(i % 3);
    cfg.seed = rng();
    const auto objective = [&shift](std::span<const double> x) {
      double s = 0.0;
      for (std::size_t d = 0; d < x.size(); ++d) {
        s += std::abs(x[d] - shift[d]) + std::sin(3.0 * x[d]);
      }
      return s;
    };
    bool inside = true;
    const firefly::Result a = firefly::optimize(objective, box, cfg, [&](std::size_t, const firefly::Swarm& s) {
      for (const auto& x : s.positions) {
        inside = inside && box.contains(x);
      }
    });
    const firefly::Result b = firefly::optimize(objective, box, cfg);
    history_ok += std::is_sorted(a.history.rbegin(), a.history.rend());
    bounds_ok += inside && box.contains(a.best_position);
    seed_ok += a.history == b.history && a.best_position == b.best_position;
  }
  o.require(history_ok == cases, fmt::format("best-history non-increasing: {}/{}", history_ok, cases));
  o.require(bounds_ok == cases, fmt::format("swarm inside bounds: {}/{}", bounds_ok, cases));
  o.require(seed_ok == cases, fmt::format("fixed seed reproduces the run: {}/{}", seed_ok, cases));

  int synth_ok = 0;
  for (int i = 0; i < cases; ++i) {
    const std::uint64_t seed = rng();
    const auto x = generate_synthetic(truth(), ForwardConfig{}, 5, NoiseModel{1e-4, 0.02}, seed);
    const auto y = generate_synthetic(truth(), ForwardConfig{}, 5, NoiseModel{1e-4, 0.02}, seed);
    bool same = true;
    for (std::size_t k = 0; k < x.samples.size(); ++k) {
      same = same && x.samples[k].t == y.samples[k].t && x.samples[k].x == y.samples[k].x;
    }
    synth_ok += same;
  }
  o.require(synth_ok == cases, fmt::format("fixed seed reproduces synthetic data: {}/{}", synth_ok, cases));

  const double elapsed = seconds_since(start);
  o.require(elapsed < 60.0, fmt::format("{:.1f} s (< 60 s)", elapsed));
  return o;
}

Outcome grid_oracle() {
  Outcome o;
  const auto start = Clock::now();
  EstimationProblem pr = problem(ObjectiveMode::lsq);
  pr.free = {constrained_box(Parameter::L), constrained_box(Parameter::d_i)};
  const auto objective = [&pr](double x, double y) {
    const std::vector<double> c{x, y};
    return residual_ss(c, pr);
  };
  double grid_min = std::numeric_limits<double>::infinity();
  const std::size_t n = 200;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double x = pr.free[0].lower + (pr.free[0].upper - pr.free[0].lower) * static_cast<double>(i) / (n - 1);
      const double y = pr.free[1].lower + (pr.free[1].upper - pr.free[1].lower) * static_cast<double>(j) / (n - 1);
      grid_min = std::min(grid_min, objective(x, y));
    }
  }
  firefly::Config cfg;
  cfg.seed = fit_seed;
  const firefly::Bounds box{{pr.free[0].lower, pr.free[1].lower}, {pr.free[0].upper, pr.free[1].upper}};
  const double best =
      firefly::optimize([&](std::span<const double> x) { return objective(x[0], x[1]); }, box, cfg).best_value;
  const double elapsed = seconds_since(start);
  o.require(best <= grid_min + 1e-9,
            fmt::format("L x d_i: firefly best {:.6e} vs 200x200 grid minimum {:.6e}", best, grid_min));
  o.require(elapsed < 120.0, fmt::format("{:.1f} s (< 120 s)", elapsed));
  return o;
}

} // namespace

int main() {
  report(1, "ln cosh closed form vs RK4 on the plug equation", analytic_numeric_equivalence);
  report(2, "film temperature closed form vs RK4", film_temperature_equivalence);
  report(3, "firefly on the 5-D sphere", firefly_sphere_benchmark);
  report(4, "constrained ensemble vs reference means and spreads", constrained_reproduction);
  report(5, "unconstrained restart ranges vs constrained band", unconstrained_contrast);
  report(6, "invariant suites", invariant_suites);
  report(7, "firefly vs brute-force grid on two parameters", grid_oracle);
  fmt::print("{} of 7 criteria passed\n", 7 - failures);
  return failures == 0 ? 0 : 1;
}
