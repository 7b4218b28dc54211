#pragma once

// Firefly algorithm for box-bounded minimisation.
//
// Lower objective means brighter. Each iteration every firefly is compared
// with every other one in index order and moves, in place, towards each
// brighter one:
//
//   x_i <- x_i + beta0 exp(-gamma r_ij^2) (x_j - x_i) + alpha eps
//
// A firefly with no brighter neighbour takes the random term only. Distances
// are measured in bound-normalised coordinates and eps is scaled by each
// dimension's bound width, so the same settings behave alike on any box.
// Positions leaving the box are clamped back onto it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "heatpipe/errors.hpp"

namespace heatpipe::firefly {

using Rng = std::mt19937_64;

enum class Randomization { uniform, gaussian, levy };

inline const char* to_string(Randomization r) {
  switch (r) {
  case Randomization::uniform: return "uniform";
  case Randomization::gaussian: return "gaussian";
  case Randomization::levy: return "levy";
  }
  return "unknown";
}

struct Config {
  std::size_t population = 20;
  std::size_t iterations = 5000;
  double beta0 = 1.0;       ///< attractiveness at r = 0
  double gamma = 1.0;       ///< light absorption coefficient
  double alpha = 0.2;       ///< randomisation scale, in bound widths
  double alpha_decay = 0.998; ///< alpha multiplier per iteration, in (0, 1]; 1 keeps alpha constant
  Randomization randomization = Randomization::uniform;
  double levy_lambda = 1.5; ///< tail exponent for Levy steps, in (1, 3]
  std::uint64_t seed = 0;

  void validate() const {
    if (population < 2) {
      throw ConfigError("firefly population must be at least 2");
    }
    if (iterations < 1) {
      throw ConfigError("firefly iterations must be at least 1");
    }
    if (!(beta0 >= 0.0) || !(gamma >= 0.0) || !(alpha >= 0.0)) {
      throw ConfigError("beta0, gamma and alpha must be non-negative");
    }
    if (!(alpha_decay > 0.0 && alpha_decay <= 1.0)) {
      throw ConfigError("alpha_decay must lie in (0, 1]");
    }
    if (randomization == Randomization::levy && !(levy_lambda > 1.0 && levy_lambda <= 3.0)) {
      throw ConfigError("levy_lambda must lie in (1, 3]");
    }
  }
};

/// Per-dimension box. A dimension with lower == upper is frozen at that value.
struct Bounds {
  std::vector<double> lower;
  std::vector<double> upper;

  std::size_t dimension() const { return lower.size(); }
  double width(std::size_t d) const { return upper[d] - lower[d]; }

  void validate() const {
    if (lower.empty() || lower.size() != upper.size()) {
      throw ConfigError("bounds must be non-empty with matching lower/upper sizes");
    }
    for (std::size_t d = 0; d < lower.size(); ++d) {
      if (!std::isfinite(lower[d]) || !std::isfinite(upper[d]) || lower[d] > upper[d]) {
        throw ConfigError(fmt::format("bad bounds in dimension {}: [{}, {}]", d, lower[d], upper[d]));
      }
    }
  }

  bool contains(std::span<const double> x) const {
    for (std::size_t d = 0; d < x.size(); ++d) {
      if (x[d] < lower[d] || x[d] > upper[d]) {
        return false;
      }
    }
    return true;
  }

  void clamp(std::span<double> x) const {
    for (std::size_t d = 0; d < x.size(); ++d) {
      x[d] = std::clamp(x[d], lower[d], upper[d]);
    }
  }
};

using Position = std::vector<double>;

struct Swarm {
  std::vector<Position> positions;
  std::vector<double> fitness;
  Position best_position;
  double best_value = std::numeric_limits<double>::infinity();
};

struct Result {
  Position best_position;
  double best_value = std::numeric_limits<double>::infinity();
  std::vector<double> history; ///< best-so-far after each iteration
  std::size_t evaluations = 0;
};

/// beta0 exp(-gamma r^2).
inline double attractiveness(double beta0, double gamma, double r) {
  return beta0 * std::exp(-gamma * r * r);
}

inline constexpr double levy_min_step = 1e-3;

/// Heavy-tailed step with P(|s| > x) = (x / s_min)^-(lambda - 1) for x >= s_min,
/// by inverse transform of u ~ U(0, 1], with a random sign.
inline double levy_step(double lambda, Rng& rng, double s_min = levy_min_step) {
  if (!(lambda > 1.0 && lambda <= 3.0)) {
    throw DomainError(fmt::format("Levy exponent must lie in (1, 3] (got {})", lambda));
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = 1.0 - unit(rng); // (0, 1]
  const double s = s_min * std::pow(u, -1.0 / (lambda - 1.0));
  return unit(rng) < 0.5 ? -s : s;
}

/// One component of the randomisation vector, in units of bound width.
inline double draw_epsilon(const Config& cfg, Rng& rng) {
  switch (cfg.randomization) {
  case Randomization::uniform: return std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
  case Randomization::gaussian: return std::normal_distribution<double>(0.0, 1.0)(rng);
  case Randomization::levy: return levy_step(cfg.levy_lambda, rng);
  }
  return 0.0;
}

/// Squared distance in bound-normalised coordinates; frozen dimensions are ignored.
inline double normalized_distance_sq(std::span<const double> a, std::span<const double> b, const Bounds& bounds) {
  double r2 = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double w = bounds.width(d);
    if (w > 0.0) {
      const double z = (a[d] - b[d]) / w;
      r2 += z * z;
    }
  }
  return r2;
}

/// x + alpha eps, clamped.
inline Position random_step(std::span<const double> x, const Bounds& bounds, const Config& cfg, double alpha,
                            Rng& rng) {
  Position out(x.begin(), x.end());
  for (std::size_t d = 0; d < out.size(); ++d) {
    out[d] += alpha * draw_epsilon(cfg, rng) * bounds.width(d);
  }
  bounds.clamp(out);
  return out;
}

/// Moves x_i towards x_j when j is brighter (f_j < f_i); otherwise returns x_i
/// unchanged without consuming random numbers.
inline Position move_firefly(std::span<const double> x_i, std::span<const double> x_j, double f_i, double f_j,
                             const Bounds& bounds, const Config& cfg, Rng& rng, double alpha) {
  Position out(x_i.begin(), x_i.end());
  if (!(f_j < f_i)) {
    return out;
  }
  const double beta = attractiveness(cfg.beta0, cfg.gamma, std::sqrt(normalized_distance_sq(x_i, x_j, bounds)));
  for (std::size_t d = 0; d < out.size(); ++d) {
    // (1 - beta) x_i + beta x_j lands exactly on x_j when beta = 1
    out[d] = (1.0 - beta) * x_i[d] + beta * x_j[d] + alpha * draw_epsilon(cfg, rng) * bounds.width(d);
  }
  bounds.clamp(out);
  return out;
}

inline Position move_firefly(std::span<const double> x_i, std::span<const double> x_j, double f_i, double f_j,
                             const Bounds& bounds, const Config& cfg, Rng& rng) {
  return move_firefly(x_i, x_j, f_i, f_j, bounds, cfg, rng, cfg.alpha);
}

using Observer = std::function<void(std::size_t iteration, const Swarm&)>;

namespace detail {

inline void check_values(const std::vector<Position>& xs, const std::vector<double>& f) {
  if (f.size() != xs.size()) {
    throw EvaluationError("objective returned the wrong number of values", {});
  }
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (std::isnan(f[i])) {
      throw EvaluationError("objective returned NaN", xs[i]);
    }
  }
}

inline void update_best(Swarm& swarm) {
  for (std::size_t i = 0; i < swarm.fitness.size(); ++i) {
    if (swarm.fitness[i] < swarm.best_value) {
      swarm.best_value = swarm.fitness[i];
      swarm.best_position = swarm.positions[i];
    }
  }
}

} // namespace detail

/// Minimises a population objective: `batch` receives every position of the
/// swarm and returns one value per position. Used directly when a candidate's
/// value depends on the rest of the swarm.
template <class Batch>
Result optimize_population(Batch&& batch, const Bounds& bounds, const Config& cfg, const Observer& observer = {}) {
  cfg.validate();
  bounds.validate();
  Rng rng(cfg.seed);
  const std::size_t dim = bounds.dimension();

  Swarm swarm;
  swarm.positions.resize(cfg.population, Position(dim));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (auto& x : swarm.positions) {
    for (std::size_t d = 0; d < dim; ++d) {
      x[d] = bounds.lower[d] + unit(rng) * bounds.width(d);
    }
  }

  Result result;
  auto evaluate = [&] {
    swarm.fitness = batch(std::as_const(swarm.positions));
    detail::check_values(swarm.positions, swarm.fitness);
    result.evaluations += swarm.positions.size();
    detail::update_best(swarm);
  };
  evaluate();

  result.history.reserve(cfg.iterations);
  double alpha = cfg.alpha;
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    for (std::size_t i = 0; i < cfg.population; ++i) {
      bool moved = false;
      for (std::size_t j = 0; j < cfg.population; ++j) {
        if (swarm.fitness[j] < swarm.fitness[i]) {
          swarm.positions[i] = move_firefly(swarm.positions[i], swarm.positions[j], swarm.fitness[i],
                                            swarm.fitness[j], bounds, cfg, rng, alpha);
          moved = true;
        }
      }
      if (!moved) {
        swarm.positions[i] = random_step(swarm.positions[i], bounds, cfg, alpha, rng);
      }
    }
    evaluate();
    result.history.push_back(swarm.best_value);
    if (observer) {
      observer(it, swarm);
    }
    alpha *= cfg.alpha_decay;
  }
  result.best_position = swarm.best_position;
  result.best_value = swarm.best_value;
  return result;
}

/// Minimises a pointwise objective f(x). Exceptions thrown by f are rethrown
/// as EvaluationError carrying the offending position.
template <class Objective>
Result optimize(Objective&& f, const Bounds& bounds, const Config& cfg, const Observer& observer = {}) {
  auto batch = [&f](const std::vector<Position>& xs) {
    std::vector<double> out;
    out.reserve(xs.size());
    for (const auto& x : xs) {
      try {
        out.push_back(f(std::span<const double>(x)));
      } catch (const EvaluationError&) {
        throw;
      } catch (const std::exception& e) {
        throw EvaluationError(fmt::format("objective failed: {}", e.what()), x);
      }
    }
    return out;
  };
  return optimize_population(batch, bounds, cfg, observer);
}

} // namespace heatpipe::firefly
