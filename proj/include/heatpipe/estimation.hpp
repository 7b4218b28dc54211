#pragma once

// Inverse problem: recover plug length, diameter, temperatures and vapour
// pressure from a sparse record of plug positions.
//
// The forward map evaluates the startup plug constants (A, B) from the
// nondimensional coefficients and returns the ln-cosh position curve; the full
// ODE model can be selected instead. Optimisation runs the firefly algorithm
// on the parameter box; parameter spreads are measured in bound-normalised
// coordinates.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "heatpipe/analytic.hpp"
#include "heatpipe/errors.hpp"
#include "heatpipe/firefly.hpp"
#include "heatpipe/integrator.hpp"
#include "heatpipe/model.hpp"

namespace heatpipe {

// ---------------------------------------------------------------------------
// Linear baseline

/// Least-squares solution of K q = u, (K^T K)^{-1} K^T u, via column-pivoted
/// QR. Throws RankDeficientError when K lacks full column rank.
inline Eigen::VectorXd linear_lsq_estimate(const Eigen::MatrixXd& K, const Eigen::VectorXd& u) {
  if (K.rows() != u.size()) {
    throw DomainError("design matrix and observation vector disagree in length");
  }
  if (K.rows() < K.cols() || K.cols() == 0) {
    throw RankDeficientError("underdetermined system: regularization needed");
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(K);
  if (qr.rank() < K.cols()) {
    throw RankDeficientError(fmt::format("K^T K is singular (rank {} < {}): regularization needed", qr.rank(),
                                         K.cols()));
  }
  return qr.solve(u);
}

// ---------------------------------------------------------------------------
// Parameters under estimation

enum class Parameter { L, d_i, T_v, T_w, p_v };

inline constexpr std::array<Parameter, 5> all_parameters{Parameter::L, Parameter::d_i, Parameter::T_v,
                                                         Parameter::T_w, Parameter::p_v};

inline const char* to_string(Parameter p) {
  switch (p) {
  case Parameter::L: return "L";
  case Parameter::d_i: return "d_i";
  case Parameter::T_v: return "T_v";
  case Parameter::T_w: return "T_w";
  case Parameter::p_v: return "p_v";
  }
  return "?";
}

inline const char* unit_of(Parameter p) {
  switch (p) {
  case Parameter::L:
  case Parameter::d_i: return "m";
  case Parameter::T_v:
  case Parameter::T_w: return "C";
  case Parameter::p_v: return "kPa";
  }
  return "";
}

inline Parameter parse_parameter(std::string_view name) {
  for (Parameter p : all_parameters) {
    if (name == to_string(p)) {
      return p;
    }
  }
  throw ConfigError(fmt::format("unknown parameter '{}' (expected L, d_i, T_v, T_w or p_v)", name));
}

/// Value in fitting units (p_v in kPa, temperatures in C, lengths in m).
inline double get_parameter(const PhysicalParams& params, Parameter p) {
  switch (p) {
  case Parameter::L: return params.L;
  case Parameter::d_i: return params.d_i;
  case Parameter::T_v: return params.T_v0;
  case Parameter::T_w: return params.T_w;
  case Parameter::p_v: return params.p_v0 / 1000.0;
  }
  return 0.0;
}

inline void set_parameter(PhysicalParams& params, Parameter p, double value) {
  switch (p) {
  case Parameter::L: params.L = value; break;
  case Parameter::d_i: params.d_i = value; break;
  case Parameter::T_v: params.T_v0 = value; break;
  case Parameter::T_w: params.T_w = value; break;
  case Parameter::p_v: params.p_v0 = value * 1000.0; break;
  }
}

struct ParameterBound {
  Parameter parameter;
  double lower = 0.0;
  double upper = 0.0;
};

/// Realistic working ranges used for the constrained fit.
inline ParameterBound constrained_box(Parameter p) {
  switch (p) {
  case Parameter::L: return {p, 0.15, 0.22};
  case Parameter::d_i: return {p, 0.002, 0.004};
  case Parameter::T_v: return {p, 15.0, 25.0};
  case Parameter::T_w: return {p, 35.0, 45.0};
  case Parameter::p_v: return {p, 80.0, 120.0};
  }
  return {p, 0.0, 0.0};
}

/// Physical-plausibility limits only, used for the unconstrained fit.
inline ParameterBound loose_box(Parameter p) {
  switch (p) {
  case Parameter::L: return {p, 0.01, 1.0};
  case Parameter::d_i: return {p, 5.0e-4, 1.0e-2};
  case Parameter::T_v: return {p, 1.0, 99.0};
  case Parameter::T_w: return {p, 1.0, 99.0};
  case Parameter::p_v: return {p, 1.0, 1000.0};
  }
  return {p, 0.0, 0.0};
}

// ---------------------------------------------------------------------------
// Observations and forward model

enum class ForwardModel { analytic, ode };

inline const char* to_string(ForwardModel m) { return m == ForwardModel::analytic ? "analytic" : "ode"; }

struct ForwardConfig {
  ForwardModel model = ForwardModel::analytic;
  double t_obs = 0.0;        ///< observation window (s); <= 0 picks 4 / sqrt(AB) of the generating parameters
  double dt = 1e-5;          ///< ODE model only: output spacing (s)
  std::size_t substeps = 100; ///< ODE model only: RK4 steps per output interval
};

enum class ObservationSource { synthetic, file };

struct Sample {
  double t = 0.0;
  double x = 0.0;
};

struct ObservationSet {
  std::vector<Sample> samples;
  double noise_sigma = 0.0;    ///< absolute noise scale (m)
  double noise_relative = 0.0; ///< noise scale as a fraction of the clean position
  ObservationSource source = ObservationSource::file;
  std::optional<PhysicalParams> truth;

  std::vector<double> times() const {
    std::vector<double> t;
    t.reserve(samples.size());
    for (const auto& s : samples) {
      t.push_back(s.t);
    }
    return t;
  }

  void validate() const {
    if (samples.size() < 2) {
      throw ConfigError("an observation set needs at least 2 samples");
    }
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (!std::isfinite(samples[i].t) || !std::isfinite(samples[i].x)) {
        throw ConfigError(fmt::format("observation {} is not finite", i));
      }
      if (i > 0 && !(samples[i].t > samples[i - 1].t)) {
        throw ConfigError(fmt::format("observation times must be strictly increasing (row {})", i));
      }
    }
  }
};

/// Plug positions predicted at `times` by the selected forward model.
inline std::vector<double> predict_positions(const PhysicalParams& params, std::span<const double> times,
                                             const ForwardConfig& forward) {
  std::vector<double> out;
  out.reserve(times.size());
  if (forward.model == ForwardModel::analytic) {
    const PlugConstants c = startup_plug_constants(params);
    for (double t : times) {
      out.push_back(plug_position_lncosh(c.A, c.B, t));
    }
    return out;
  }

  params.validate();
  const double t_last = times.empty() ? 0.0 : times.back();
  const IntegratorSettings settings{t_last + forward.dt, forward.dt, forward.substeps};
  const Trajectory tr = simulate(params, initial_state(params), heated_vapor_pressure(params), params.p_v0, settings);
  for (double t : times) {
    const double pos = t / forward.dt;
    const auto k = static_cast<std::size_t>(std::floor(pos));
    if (k + 1 >= tr.states.size()) {
      throw DomainError(fmt::format("forward simulation ended before t = {}: {}", t, tr.message));
    }
    const double w = pos - static_cast<double>(k);
    out.push_back((1.0 - w) * tr.states[k].x_p + w * tr.states[k + 1].x_p);
  }
  return out;
}

/// Default observation window for a parameter set: four startup time constants.
inline double default_observation_window(const PhysicalParams& params) {
  const PlugConstants c = startup_plug_constants(params);
  return 4.0 / std::sqrt(c.A * c.B);
}

struct NoiseModel {
  double absolute = 0.0; ///< standard deviation (m)
  double relative = 0.0; ///< standard deviation as a fraction of the clean value
};

/// Samples the forward curve at n_points uniform times t_i = i t_obs / n
/// (i = 1..n) and adds independent Gaussian noise.
inline ObservationSet generate_synthetic(const PhysicalParams& truth, const ForwardConfig& forward,
                                         std::size_t n_points, const NoiseModel& noise, std::uint64_t seed) {
  if (n_points < 2) {
    throw ConfigError("n_points must be at least 2");
  }
  if (!(noise.absolute >= 0.0) || !(noise.relative >= 0.0)) {
    throw ConfigError("noise scales must be non-negative");
  }
  truth.validate();
  const double window = forward.t_obs > 0.0 ? forward.t_obs : default_observation_window(truth);
  std::vector<double> times(n_points);
  for (std::size_t i = 0; i < n_points; ++i) {
    times[i] = window * static_cast<double>(i + 1) / static_cast<double>(n_points);
  }
  const std::vector<double> clean = predict_positions(truth, times, forward);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  ObservationSet obs;
  obs.source = ObservationSource::synthetic;
  obs.truth = truth;
  obs.noise_sigma = noise.absolute;
  obs.noise_relative = noise.relative;
  obs.samples.reserve(n_points);
  for (std::size_t i = 0; i < n_points; ++i) {
    const double sd = noise.absolute + noise.relative * std::abs(clean[i]);
    const double z = gauss(rng);
    obs.samples.push_back({times[i], clean[i] + sd * z});
  }
  return obs;
}

// ---------------------------------------------------------------------------
// Objectives

enum class ObjectiveMode { lsq, penalized };
enum class PenaltyScope { swarm, ensemble };

inline const char* to_string(ObjectiveMode m) { return m == ObjectiveMode::lsq ? "lsq" : "penalized"; }
inline const char* to_string(PenaltyScope s) { return s == PenaltyScope::swarm ? "swarm" : "ensemble"; }

/// Value returned for candidates the forward model cannot evaluate.
inline constexpr double failed_evaluation_penalty = 1e12;

struct EstimationProblem {
  std::vector<ParameterBound> free;
  PhysicalParams fixed;
  ObservationSet observations;
  ObjectiveMode mode = ObjectiveMode::penalized;
  PenaltyScope scope = PenaltyScope::swarm;
  ForwardConfig forward;

  std::size_t dimension() const { return free.size(); }

  void validate() const {
    if (free.empty()) {
      throw ConfigError("at least one free parameter is required");
    }
    for (std::size_t i = 0; i < free.size(); ++i) {
      const auto& b = free[i];
      if (!std::isfinite(b.lower) || !std::isfinite(b.upper) || b.lower > b.upper) {
        throw ConfigError(fmt::format("bad bounds for {}: [{}, {}]", to_string(b.parameter), b.lower, b.upper));
      }
      for (std::size_t j = 0; j < i; ++j) {
        if (free[j].parameter == b.parameter) {
          throw ConfigError(fmt::format("parameter {} listed twice", to_string(b.parameter)));
        }
      }
    }
    observations.validate();
  }

  firefly::Bounds bounds() const {
    firefly::Bounds b;
    for (const auto& f : free) {
      b.lower.push_back(f.lower);
      b.upper.push_back(f.upper);
    }
    return b;
  }

  PhysicalParams apply(std::span<const double> values) const {
    PhysicalParams p = fixed;
    for (std::size_t i = 0; i < free.size(); ++i) {
      set_parameter(p, free[i].parameter, values[i]);
    }
    return p;
  }

  /// Coordinate of value i inside its box, in [0, 1]; 0 for a collapsed box.
  double normalized(std::size_t i, double value) const {
    const double w = free[i].upper - free[i].lower;
    return w > 0.0 ? (value - free[i].lower) / w : 0.0;
  }
};

/// Sum of squared differences between observed and predicted plug positions.
/// Returns failed_evaluation_penalty if the forward model fails.
inline double residual_ss(std::span<const double> candidate, const EstimationProblem& problem) {
  if (candidate.size() != problem.dimension()) {
    throw DomainError("candidate dimension does not match the problem");
  }
  const auto& samples = problem.observations.samples;
  std::vector<double> times;
  times.reserve(samples.size());
  for (const auto& s : samples) {
    times.push_back(s.t);
  }
  double ss = 0.0;
  try {
    const std::vector<double> pred = predict_positions(problem.apply(candidate), times, problem.forward);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const double r = samples[i].x - pred[i];
      ss += r * r;
    }
  } catch (const std::exception&) {
    return failed_evaluation_penalty;
  }
  return std::isfinite(ss) ? ss : failed_evaluation_penalty;
}

/// Sum over parameters of the sample variance (n - 1 denominator) of the
/// bound-normalised coordinates of `points`.
inline double normalized_variance_sum(const std::vector<firefly::Position>& points, const EstimationProblem& problem) {
  const std::size_t n = points.size();
  if (n < 2) {
    return 0.0;
  }
  double total = 0.0;
  for (std::size_t k = 0; k < problem.dimension(); ++k) {
    double mean = 0.0;
    for (const auto& x : points) {
      mean += problem.normalized(k, x[k]);
    }
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (const auto& x : points) {
      const double z = problem.normalized(k, x[k]) - mean;
      ss += z * z;
    }
    total += ss / static_cast<double>(n - 1);
  }
  return total;
}

/// residual_ss of each candidate plus the summed parameter variance across
/// the population.
inline std::vector<double> penalized_objective(const std::vector<firefly::Position>& population,
                                               const EstimationProblem& problem) {
  if (population.empty()) {
    throw DomainError("population is empty");
  }
  const double penalty = normalized_variance_sum(population, problem);
  std::vector<double> out;
  out.reserve(population.size());
  for (const auto& x : population) {
    out.push_back(residual_ss(x, problem) + penalty);
  }
  return out;
}

/// Ensemble reading of the penalty: each candidate is charged the variance of
/// the estimates of earlier runs together with itself.
inline std::vector<double> ensemble_penalized_objective(const std::vector<firefly::Position>& population,
                                                        const EstimationProblem& problem,
                                                        const std::vector<firefly::Position>& earlier) {
  std::vector<double> out;
  out.reserve(population.size());
  std::vector<firefly::Position> pool = earlier;
  pool.emplace_back();
  for (const auto& x : population) {
    pool.back() = x;
    out.push_back(residual_ss(x, problem) + normalized_variance_sum(pool, problem));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fitting

struct FitResult {
  std::vector<double> estimates;
  double objective_value = 0.0;
  double residual = 0.0;
  std::uint64_t seed = 0;
  std::size_t iterations_used = 0;
  std::vector<double> history;
  bool ok = true;
  std::string error;
};

struct ParameterSummary {
  Parameter parameter = Parameter::L;
  double mean = 0.0;
  double stddev = 0.0; ///< unbiased (n - 1)
  double min = 0.0;
  double max = 0.0;
};

struct EnsembleStats {
  std::vector<ParameterSummary> parameters;
  std::size_t runs = 0;
  std::size_t failed = 0;

  const ParameterSummary& of(Parameter p) const {
    for (const auto& s : parameters) {
      if (s.parameter == p) {
        return s;
      }
    }
    throw DomainError(fmt::format("parameter {} was not estimated", to_string(p)));
  }
};

struct EnsembleResult {
  std::vector<FitResult> runs;
  EnsembleStats stats;
};

/// Per-parameter mean, unbiased standard deviation and range over the
/// successful runs, folded in run order.
inline EnsembleStats summarize(const std::vector<FitResult>& runs, const EstimationProblem& problem) {
  EnsembleStats stats;
  std::vector<const FitResult*> good;
  for (const auto& r : runs) {
    if (r.ok) {
      good.push_back(&r);
    } else {
      ++stats.failed;
    }
  }
  if (good.size() < 2) {
    throw std::runtime_error(fmt::format("only {} of {} runs succeeded; at least 2 are required", good.size(),
                                         runs.size()));
  }
  stats.runs = good.size();
  const auto n = static_cast<double>(good.size());
  for (std::size_t k = 0; k < problem.dimension(); ++k) {
    ParameterSummary s;
    s.parameter = problem.free[k].parameter;
    s.min = s.max = good.front()->estimates[k];
    double sum = 0.0;
    for (const auto* r : good) {
      const double v = r->estimates[k];
      sum += v;
      s.min = std::min(s.min, v);
      s.max = std::max(s.max, v);
    }
    s.mean = sum / n;
    double ss = 0.0;
    for (const auto* r : good) {
      const double z = r->estimates[k] - s.mean;
      ss += z * z;
    }
    s.stddev = std::sqrt(ss / (n - 1.0));
    stats.parameters.push_back(s);
  }
  return stats;
}

/// Seed of run `index` in an ensemble with master seed `seed`.
inline std::uint64_t run_seed(std::uint64_t seed, std::size_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(std::uint64_t(index) >> 32)};
  std::array<std::uint32_t, 2> words{};
  seq.generate(words.begin(), words.end());
  return (std::uint64_t(words[0]) << 32) | words[1];
}

namespace detail {

template <class Batch>
FitResult run_one(const EstimationProblem& problem, const firefly::Config& fa, std::uint64_t seed, Batch&& batch) {
  FitResult r;
  r.seed = seed;
  try {
    firefly::Config cfg = fa;
    cfg.seed = seed;
    const firefly::Result res = firefly::optimize_population(batch, problem.bounds(), cfg);
    r.estimates = res.best_position;
    r.objective_value = res.best_value;
    r.residual = residual_ss(res.best_position, problem);
    r.iterations_used = res.history.size();
    r.history = res.history;
  } catch (const std::exception& e) {
    r.ok = false;
    r.error = e.what();
  }
  return r;
}

/// Runs job(i) for i in [0, count) on up to `threads` workers; results are
/// stored by index so the outcome does not depend on scheduling.
template <class Job>
std::vector<FitResult> run_indexed(std::size_t count, unsigned threads, Job&& job) {
  std::vector<FitResult> out(count);
  if (threads == 0) {
    threads = std::max(1u, std::thread::hardware_concurrency());
  }
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) {
      out[i] = job(i);
    }
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        out[i] = job(i);
      }
    });
  }
  pool.clear();
  return out;
}

inline void require_runs(std::size_t n, const char* what) {
  if (n == 0) {
    throw ConfigError(fmt::format("{} must be positive", what));
  }
  if (n < 2) {
    throw ConfigError(fmt::format("{} must be at least 2 to form ensemble statistics", what));
  }
}

} // namespace detail

/// Multi-start minimisation of residual_ss alone. Each restart is an
/// independent firefly run with its own seed; failed restarts are recorded.
inline EnsembleResult fit_lsq(const EstimationProblem& problem, const firefly::Config& fa, std::size_t n_restarts,
                              std::uint64_t seed, unsigned threads = 0) {
  detail::require_runs(n_restarts, "n_restarts");
  if (problem.mode != ObjectiveMode::lsq) {
    throw ConfigError("fit_lsq requires objective mode lsq");
  }
  problem.validate();
  auto batch = [&problem](const std::vector<firefly::Position>& xs) {
    std::vector<double> out;
    out.reserve(xs.size());
    for (const auto& x : xs) {
      out.push_back(residual_ss(x, problem));
    }
    return out;
  };
  EnsembleResult result;
  result.runs = detail::run_indexed(n_restarts, threads, [&](std::size_t i) {
    return detail::run_one(problem, fa, run_seed(seed, i), batch);
  });
  result.stats = summarize(result.runs, problem);
  return result;
}

/// n_runs independent firefly minimisations of the variance-penalised
/// objective inside the parameter box.
inline EnsembleResult fit_constrained(const EstimationProblem& problem, const firefly::Config& fa,
                                      std::size_t n_runs, std::uint64_t seed, unsigned threads = 0) {
  detail::require_runs(n_runs, "n_runs");
  if (problem.mode != ObjectiveMode::penalized) {
    throw ConfigError("fit_constrained requires objective mode penalized");
  }
  problem.validate();
  EnsembleResult result;
  if (problem.scope == PenaltyScope::swarm) {
    auto batch = [&problem](const std::vector<firefly::Position>& xs) { return penalized_objective(xs, problem); };
    result.runs = detail::run_indexed(n_runs, threads, [&](std::size_t i) {
      return detail::run_one(problem, fa, run_seed(seed, i), batch);
    });
  } else {
    // Each run depends on the estimates of the runs before it.
    std::vector<firefly::Position> earlier;
    for (std::size_t i = 0; i < n_runs; ++i) {
      auto batch = [&](const std::vector<firefly::Position>& xs) {
        return ensemble_penalized_objective(xs, problem, earlier);
      };
      result.runs.push_back(detail::run_one(problem, fa, run_seed(seed, i), batch));
      if (result.runs.back().ok) {
        earlier.push_back(result.runs.back().estimates);
      }
    }
  }
  result.stats = summarize(result.runs, problem);
  return result;
}

} // namespace heatpipe
