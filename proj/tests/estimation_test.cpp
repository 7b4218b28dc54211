#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "heatpipe/estimation.hpp"
#include "support.hpp"

using namespace heatpipe;
using heatpipe::testing::rel_err;

namespace {

std::vector<ParameterBound> boxes(ParameterBound (*make)(Parameter)) {
  std::vector<ParameterBound> out;
  for (Parameter p : all_parameters) {
    out.push_back(make(p));
  }
  return out;
}

EstimationProblem problem_for(const ObservationSet& obs, ObjectiveMode mode, std::vector<ParameterBound> free) {
  EstimationProblem pr;
  pr.free = std::move(free);
  pr.observations = obs;
  pr.mode = mode;
  return pr;
}

ObservationSet clean_observations(std::size_t n = 25) {
  return generate_synthetic(PhysicalParams{}, ForwardConfig{}, n, NoiseModel{}, 1);
}

firefly::Config short_fa(std::size_t iterations) {
  firefly::Config fa;
  fa.iterations = iterations;
  return fa;
}

std::vector<double> truth_vector(const EstimationProblem& pr) {
  std::vector<double> v;
  for (const auto& b : pr.free) {
    v.push_back(get_parameter(PhysicalParams{}, b.parameter));
  }
  return v;
}

} // namespace

TEST(LinearLsq, IdentityReturnsObservations) {
  const Eigen::VectorXd u = Eigen::VectorXd::LinSpaced(4, -1.0, 2.0);
  EXPECT_TRUE(linear_lsq_estimate(Eigen::MatrixXd::Identity(4, 4), u).isApprox(u, 1e-15));
}

TEST(LinearLsq, RecoversLineExactly) {
  Eigen::MatrixXd K(5, 2);
  Eigen::VectorXd u(5);
  for (int i = 0; i < 5; ++i) {
    K(i, 0) = i;
    K(i, 1) = 1.0;
    u(i) = 2.0 * i + 1.0;
  }
  const Eigen::VectorXd q = linear_lsq_estimate(K, u);
  EXPECT_NEAR(q(0), 2.0, 1e-14);
  EXPECT_NEAR(q(1), 1.0, 1e-14);
}

TEST(LinearLsq, RankDeficiencyIsReported) {
  Eigen::MatrixXd K(4, 2);
  K << 1, 1, 2, 2, 3, 3, 4, 4;
  EXPECT_THROW(linear_lsq_estimate(K, Eigen::VectorXd::Ones(4)), RankDeficientError);
  EXPECT_THROW(linear_lsq_estimate(Eigen::MatrixXd::Ones(1, 2), Eigen::VectorXd::Ones(1)), RankDeficientError);
}

TEST(Parameters, RoundTripInFittingUnits) {
  PhysicalParams p;
  for (Parameter k : all_parameters) {
    EXPECT_EQ(parse_parameter(to_string(k)), k);
  }
  set_parameter(p, Parameter::p_v, 95.5);
  EXPECT_DOUBLE_EQ(p.p_v0, 95500.0);
  EXPECT_DOUBLE_EQ(get_parameter(p, Parameter::p_v), 95.5);
  set_parameter(p, Parameter::T_v, 17.0);
  EXPECT_EQ(p.T_v0, 17.0);
  EXPECT_THROW(parse_parameter("sigma"), ConfigError);
}

TEST(Synthetic, NoiselessSamplesLieOnForwardCurve) {
  const ObservationSet obs = clean_observations();
  ASSERT_EQ(obs.samples.size(), 25u);
  const PlugConstants c = startup_plug_constants(PhysicalParams{});
  for (const auto& s : obs.samples) {
    EXPECT_EQ(s.x, plug_position_lncosh(c.A, c.B, s.t));
  }
  EXPECT_DOUBLE_EQ(obs.samples.back().t, default_observation_window(PhysicalParams{}));
  EXPECT_NO_THROW(obs.validate());
  EXPECT_TRUE(obs.truth.has_value());
}

TEST(Synthetic, SeedDeterminesNoise) {
  const NoiseModel noise{0.0, 0.02};
  const auto a = generate_synthetic(PhysicalParams{}, ForwardConfig{}, 25, noise, 5);
  const auto b = generate_synthetic(PhysicalParams{}, ForwardConfig{}, 25, noise, 5);
  const auto c = generate_synthetic(PhysicalParams{}, ForwardConfig{}, 25, noise, 6);
  for (std::size_t i = 0; i < 25; ++i) {
    EXPECT_EQ(a.samples[i].x, b.samples[i].x);
  }
  EXPECT_NE(a.samples[3].x, c.samples[3].x);
}

TEST(Synthetic, RejectsTooFewPoints) {
  EXPECT_THROW(generate_synthetic(PhysicalParams{}, ForwardConfig{}, 1, NoiseModel{}, 1), ConfigError);
  EXPECT_THROW(generate_synthetic(PhysicalParams{}, ForwardConfig{}, 5, NoiseModel{-1.0, 0.0}, 1), ConfigError);
}

TEST(Synthetic, OdeForwardModelIsSelectable) {
  ForwardConfig fwd;
  fwd.model = ForwardModel::ode;
  fwd.t_obs = 0.01;
  const ObservationSet obs = generate_synthetic(PhysicalParams{}, fwd, 10, NoiseModel{}, 1);
  for (std::size_t i = 1; i < obs.samples.size(); ++i) {
    EXPECT_GT(obs.samples[i].x, obs.samples[i - 1].x);
  }
}

TEST(ResidualSS, ZeroAtNoiselessTruth) {
  const auto pr = problem_for(clean_observations(), ObjectiveMode::lsq, boxes(constrained_box));
  EXPECT_LE(residual_ss(truth_vector(pr), pr), 1e-18);
}

TEST(ResidualSS, ChiSquareExpectationAtTruth) {
  const double sigma = 1e-3;
  const std::size_t n = 25;
  double mean = 0.0;
  const int seeds = 100;
  for (int seed = 0; seed < seeds; ++seed) {
    const auto obs = generate_synthetic(PhysicalParams{}, ForwardConfig{}, n, NoiseModel{sigma, 0.0}, seed);
    const auto pr = problem_for(obs, ObjectiveMode::lsq, boxes(constrained_box));
    mean += residual_ss(truth_vector(pr), pr) / seeds;
  }
  EXPECT_NEAR(mean / (n * sigma * sigma), 1.0, 0.3);
}

TEST(ResidualSS, InvariantUnderObservationOrder) {
  auto obs = generate_synthetic(PhysicalParams{}, ForwardConfig{}, 25, NoiseModel{0.0, 0.02}, 3);
  const auto pr = problem_for(obs, ObjectiveMode::lsq, boxes(constrained_box));
  const std::vector<double> candidate{0.2, 0.0031, 22.0, 38.0, 90.0};
  const double forward = residual_ss(candidate, pr);
  auto reversed = pr;
  std::reverse(reversed.observations.samples.begin(), reversed.observations.samples.end());
  EXPECT_LT(rel_err(residual_ss(candidate, reversed), forward), 1e-13);
}

TEST(ResidualSS, FailedForwardModelIsLargeAndFinite) {
  auto pr = problem_for(clean_observations(), ObjectiveMode::lsq, boxes(constrained_box));
  pr.fixed.g = -1e6; // plug driven backwards: no startup solution
  EXPECT_EQ(residual_ss(truth_vector(pr), pr), failed_evaluation_penalty);
}

TEST(PenalizedObjective, IdenticalCandidatesCarryNoPenalty) {
  const auto pr = problem_for(clean_observations(), ObjectiveMode::penalized, boxes(constrained_box));
  const std::vector<double> x{0.19, 0.003, 21.0, 41.0, 99.0};
  const auto f = penalized_objective({x, x, x}, pr);
  for (double v : f) {
    EXPECT_EQ(v, residual_ss(x, pr));
  }
}

TEST(PenalizedObjective, TwoCandidateVarianceIsHalfSquaredGap) {
  const auto pr = problem_for(clean_observations(), ObjectiveMode::penalized, boxes(constrained_box));
  std::vector<double> a{0.19, 0.003, 21.0, 41.0, 99.0};
  std::vector<double> b = a;
  const double w = 0.25;
  b[3] += w * (45.0 - 35.0);
  const auto f = penalized_objective({a, b}, pr);
  EXPECT_NEAR(f[0] - residual_ss(a, pr), w * w / 2.0, 1e-14);
  EXPECT_NEAR(f[1] - residual_ss(b, pr), w * w / 2.0, 1e-14);
}

TEST(PenalizedObjective, SymmetricAndNeverBelowResidual) {
  const auto pr = problem_for(clean_observations(), ObjectiveMode::penalized, boxes(constrained_box));
  const auto bounds = pr.bounds();
  firefly::Rng rng(12);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<firefly::Position> pop(6, firefly::Position(5));
    for (auto& x : pop) {
      for (std::size_t d = 0; d < 5; ++d) {
        x[d] = bounds.lower[d] + unit(rng) * bounds.width(d);
      }
    }
    const auto f = penalized_objective(pop, pr);
    auto shuffled = pop;
    std::rotate(shuffled.begin(), shuffled.begin() + 2, shuffled.end());
    const auto g = penalized_objective(shuffled, pr);
    for (std::size_t i = 0; i < pop.size(); ++i) {
      ASSERT_GE(f[i], residual_ss(pop[i], pr));
      ASSERT_NEAR(g[(i + pop.size() - 2) % pop.size()], f[i], 1e-15 * std::max(1.0, f[i]));
    }
  }
}

TEST(FitLsq, RequiresRestartsAndMode) {
  const auto pr = problem_for(clean_observations(), ObjectiveMode::lsq, boxes(loose_box));
  EXPECT_THROW(fit_lsq(pr, short_fa(10), 0, 1), ConfigError);
  EXPECT_THROW(fit_lsq(pr, short_fa(10), 1, 1), ConfigError);
  auto penalized = pr;
  penalized.mode = ObjectiveMode::penalized;
  EXPECT_THROW(fit_lsq(penalized, short_fa(10), 2, 1), ConfigError);
}

TEST(FitLsq, RecoversSingleIdentifiableParameter) {
  auto pr = problem_for(clean_observations(), ObjectiveMode::lsq, {loose_box(Parameter::d_i)});
  // Grid oracle for the location of the minimum.
  double grid_best = 0.0, grid_value = INFINITY;
  for (int i = 0; i <= 20000; ++i) {
    const double d = pr.free[0].lower + (pr.free[0].upper - pr.free[0].lower) * i / 20000.0;
    const double v = residual_ss(std::vector<double>{d}, pr);
    if (v < grid_value) {
      grid_value = v;
      grid_best = d;
    }
  }
  EXPECT_LT(rel_err(grid_best, 3.3e-3), 1e-3);
  const EnsembleResult r = fit_lsq(pr, short_fa(2000), 3, 5, 1);
  for (const auto& run : r.runs) {
    ASSERT_TRUE(run.ok);
    EXPECT_LT(rel_err(run.estimates[0], 3.3e-3), 1e-3);
    EXPECT_LE(run.objective_value, grid_value + 1e-12) << run.estimates[0] - grid_best;
  }
}

TEST(FitConstrained, CollapsedBoxReturnsThePoint) {
  std::vector<ParameterBound> free;
  for (Parameter p : all_parameters) {
    const double v = get_parameter(PhysicalParams{}, p) * 1.01;
    free.push_back({p, v, v});
  }
  const auto pr = problem_for(clean_observations(), ObjectiveMode::penalized, free);
  const EnsembleResult r = fit_constrained(pr, short_fa(5), 2, 3, 1);
  for (std::size_t k = 0; k < free.size(); ++k) {
    EXPECT_EQ(r.stats.parameters[k].mean, free[k].lower);
    EXPECT_EQ(r.stats.parameters[k].stddev, 0.0);
  }
}

TEST(FitConstrained, EstimatesStayInBoxAndStatsAreUnbiased) {
  const auto obs = generate_synthetic(PhysicalParams{}, ForwardConfig{}, 25, NoiseModel{0.0, 0.02}, 2);
  const auto pr = problem_for(obs, ObjectiveMode::penalized, boxes(constrained_box));
  const EnsembleResult r = fit_constrained(pr, short_fa(100), 3, 8, 1);
  ASSERT_EQ(r.stats.runs, 3u);
  for (const auto& run : r.runs) {
    ASSERT_TRUE(run.ok);
    ASSERT_TRUE(pr.bounds().contains(run.estimates));
    EXPECT_EQ(run.history.size(), 100u);
  }
  for (std::size_t k = 0; k < pr.dimension(); ++k) {
    const double a = r.runs[0].estimates[k], b = r.runs[1].estimates[k], c = r.runs[2].estimates[k];
    const double mean = (a + b + c) / 3.0;
    const double var = ((a - mean) * (a - mean) + (b - mean) * (b - mean) + (c - mean) * (c - mean)) / 2.0;
    EXPECT_NEAR(r.stats.parameters[k].mean, mean, 1e-12 * std::abs(mean));
    EXPECT_NEAR(r.stats.parameters[k].stddev, std::sqrt(var), 1e-9 * std::sqrt(var) + 1e-300);
    EXPECT_EQ(r.stats.parameters[k].min, std::min({a, b, c}));
    EXPECT_EQ(r.stats.parameters[k].max, std::max({a, b, c}));
  }
}

TEST(FitConstrained, DeterministicAcrossRepeatsAndThreadCounts) {
  const auto obs = generate_synthetic(PhysicalParams{}, ForwardConfig{}, 25, NoiseModel{0.0, 0.02}, 2);
  const auto pr = problem_for(obs, ObjectiveMode::penalized, boxes(constrained_box));
  const EnsembleResult a = fit_constrained(pr, short_fa(40), 4, 77, 1);
  const EnsembleResult b = fit_constrained(pr, short_fa(40), 4, 77, 3);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(a.runs[i].estimates, b.runs[i].estimates);
    EXPECT_EQ(a.runs[i].seed, run_seed(77, i));
  }
  for (std::size_t k = 0; k < 5; ++k) {
    EXPECT_EQ(a.stats.parameters[k].mean, b.stats.parameters[k].mean);
    EXPECT_EQ(a.stats.parameters[k].stddev, b.stats.parameters[k].stddev);
  }
}

TEST(FitConstrained, EnsembleScopeRuns) {
  const auto obs = generate_synthetic(PhysicalParams{}, ForwardConfig{}, 25, NoiseModel{0.0, 0.02}, 2);
  auto pr = problem_for(obs, ObjectiveMode::penalized, boxes(constrained_box));
  pr.scope = PenaltyScope::ensemble;
  const EnsembleResult r = fit_constrained(pr, short_fa(30), 3, 1, 1);
  EXPECT_EQ(r.stats.runs, 3u);
  for (const auto& run : r.runs) {
    EXPECT_TRUE(pr.bounds().contains(run.estimates));
  }
}

TEST(FitConstrained, ShrinkingBoxesNeverWidenTheEnsemble) {
  const auto obs = generate_synthetic(PhysicalParams{}, ForwardConfig{}, 25, NoiseModel{0.0, 0.02}, 4);
  std::vector<double> previous(5, INFINITY);
  for (double scale : {1.0, 0.5, 0.25}) {
    std::vector<ParameterBound> free;
    for (Parameter p : all_parameters) {
      const ParameterBound outer = constrained_box(p);
      const double centre = get_parameter(PhysicalParams{}, p);
      const double half = 0.5 * (outer.upper - outer.lower) * scale;
      free.push_back({p, centre - half, centre + half});
    }
    const auto pr = problem_for(obs, ObjectiveMode::penalized, free);
    const EnsembleResult r = fit_constrained(pr, short_fa(150), 8, 21, 1);
    for (std::size_t k = 0; k < 5; ++k) {
      EXPECT_LE(r.stats.parameters[k].stddev, previous[k])
          << to_string(free[k].parameter) << " at scale " << scale;
      previous[k] = r.stats.parameters[k].stddev;
    }
  }
}

TEST(FitConstrained, RunFailuresAreRecorded) {
  auto pr = problem_for(clean_observations(), ObjectiveMode::penalized, boxes(constrained_box));
  EXPECT_THROW(fit_constrained(pr, short_fa(10), 1, 1), ConfigError);
  firefly::Config bad = short_fa(10);
  bad.population = 0;
  EXPECT_THROW(fit_constrained(pr, bad, 2, 1, 1), std::runtime_error);
}

TEST(Summarize, RequiresTwoSuccessfulRuns) {
  const auto pr = problem_for(clean_observations(), ObjectiveMode::lsq, {loose_box(Parameter::L)});
  std::vector<FitResult> runs(3);
  runs[0].estimates = {0.1};
  runs[1].ok = false;
  runs[2].ok = false;
  EXPECT_THROW(summarize(runs, pr), std::runtime_error);
  runs[1].ok = true;
  runs[1].estimates = {0.3};
  const EnsembleStats s = summarize(runs, pr);
  EXPECT_EQ(s.runs, 2u);
  EXPECT_EQ(s.failed, 1u);
  EXPECT_DOUBLE_EQ(s.of(Parameter::L).mean, 0.2);
  EXPECT_DOUBLE_EQ(s.of(Parameter::L).stddev, std::sqrt(0.02));
  EXPECT_THROW(s.of(Parameter::T_w), DomainError);
}
