#pragma once

// Subcommands of the command-line tool. Each takes a validated RunConfig and
// an output directory, writes its artifacts plus report.json there and
// returns the process exit code. Configuration problems are thrown as
// ConfigError; the caller maps them to exit code 2.

#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <fmt/ostream.h>
#include <json.hpp>

#include "heatpipe/analytic.hpp"
#include "heatpipe/config.hpp"
#include "heatpipe/estimation.hpp"
#include "heatpipe/integrator.hpp"
#include "heatpipe/io.hpp"

namespace heatpipe::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr int exit_ok = 0;
inline constexpr int exit_failure = 1;
inline constexpr int exit_usage = 2;

/// Collects artifacts for one command and writes them with the report.
class Output {
public:
  Output(fs::path dir, std::string command, const RunConfig& cfg)
      : dir_(std::move(dir)), hash_(config_hash(cfg)) {
    report_.command = std::move(command);
    report_.config = cfg;
    fs::create_directories(dir_);
  }

  const std::string& hash() const { return hash_; }
  const fs::path& dir() const { return dir_; }
  json& results() { return report_.results; }

  void write(const std::string& name, std::string_view content) {
    io::write_file(dir_ / name, content);
    report_.artifacts.push_back(name);
  }

  void write_json(const std::string& name, json j) {
    j["config_hash"] = hash_;
    write(name, j.dump(2) + "\n");
  }

  void input(const fs::path& path) { report_.inputs.push_back(path); }

  void finish() const { io::write_file(dir_ / io::report_name, report_.to_json(dir_).dump(2) + "\n"); }

private:
  fs::path dir_;
  std::string hash_;
  io::RunReport report_;
};

namespace detail {

inline std::vector<double> uniform_grid(double t_end, std::size_t points) {
  std::vector<double> t(points);
  for (std::size_t i = 0; i < points; ++i) {
    t[i] = t_end * static_cast<double>(i) / static_cast<double>(points - 1);
  }
  return t;
}

/// Positions of a second-order ODE x'' = f(t, x, x') on `times`, RK4 with
/// `substeps` steps per interval.
template <class F>
std::vector<double> integrate_second_order(F&& f, double x0, double v0, const std::vector<double>& times,
                                           std::size_t substeps) {
  auto field = [&f](double t, const Vec<2>& y) { return Vec<2>{y[1], f(t, y[0], y[1])}; };
  std::vector<double> out{x0};
  Vec<2> y{x0, v0};
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double h = (times[i] - times[i - 1]) / static_cast<double>(substeps);
    for (std::size_t k = 0; k < substeps; ++k) {
      y = step_rk4<2>(field, times[i - 1] + static_cast<double>(k) * h, y, h);
    }
    out.push_back(y[0]);
  }
  return out;
}

inline json state_json(const State& s) {
  return {{"T_v", s.T_v}, {"tau", s.tau}, {"m_v", s.m_v}, {"x_p", s.x_p}, {"v_p", s.v_p}};
}

inline std::optional<PlugConstants> try_plug_constants(const PhysicalParams& p, double p_v1, double p_v2) {
  try {
    return startup_plug_constants(p, p_v1, p_v2);
  } catch (const DomainError&) {
    return std::nullopt;
  }
}

inline double pressure_or_nan(const State& s, const PhysicalParams& p) {
  try {
    return vapor_pressure(s.m_v, s.T_v, p.bubble_volume(), p.R_v);
  } catch (const DomainError&) {
    return std::nan("");
  }
}

inline json estimates_json(const std::vector<double>& values, const EstimationProblem& problem) {
  json out = json::object();
  for (std::size_t k = 0; k < values.size(); ++k) {
    out[to_string(problem.free[k].parameter)] = values[k];
  }
  return out;
}

} // namespace detail

// ---------------------------------------------------------------------------

inline int cmd_simulate(const RunConfig& cfg, const fs::path& out_dir, std::ostream& log) {
  cfg.validate();
  const PhysicalParams& p = cfg.params;
  const double p_v1 = cfg.drive_p_v1(), p_v2 = cfg.drive_p_v2();
  const Trajectory tr = simulate(p, initial_state(p), p_v1, p_v2, cfg.integrator);

  Output out(out_dir, "simulate", cfg);
  io::Table table{{"t", "T_v", "tau", "m_v", "x_p", "v_p", "p_v"}, {}};
  for (std::size_t i = 0; i < tr.states.size(); ++i) {
    const State& s = tr.states[i];
    table.rows.push_back({tr.times[i], s.T_v, s.tau, s.m_v, s.x_p, s.v_p, detail::pressure_or_nan(s, p)});
  }
  out.write("trajectory.csv", io::to_csv(table, out.hash()));

  const auto plug = detail::try_plug_constants(p, p_v1, p_v2);
  if (cfg.plot) {
    io::Plot plot{"Plug position", "t (s)", "x_p (m)", {}};
    io::Series numeric{"RK4", tr.times, {}};
    for (const State& s : tr.states) {
      numeric.y.push_back(s.x_p);
    }
    plot.series.push_back(std::move(numeric));
    if (plug) {
      io::Series overlay{"ln cosh", tr.times, {}, "#d62728", true};
      overlay.fit_axes = false;
      for (double t : tr.times) {
        overlay.y.push_back(plug_position_lncosh(plug->A, plug->B, t));
      }
      plot.series.push_back(std::move(overlay));
    }
    out.write("trajectory.svg", io::render_svg(plot, out.hash()));
  }

  json& r = out.results();
  r["status"] = to_string(tr.status);
  r["message"] = tr.message;
  r["rows"] = tr.states.size();
  r["t_final"] = tr.times.back();
  r["final_state"] = detail::state_json(tr.states.back());
  r["p_v1"] = p_v1;
  r["p_v2"] = p_v2;
  r["lncosh"] = plug ? json{{"A", plug->A}, {"B", plug->B}, {"terminal_velocity", plug->terminal_velocity}} : json();
  if (tr.status == StopReason::invariant_violation || tr.status == StopReason::domain_error) {
    r["stop_step"] = tr.stop_step;
  }
  out.finish();

  fmt::print(log, "simulate: {} after {} rows (t = {:.6g} s)\n", to_string(tr.status), tr.states.size(),
             tr.times.back());
  if (tr.status == StopReason::invariant_violation || tr.status == StopReason::domain_error) {
    fmt::print(log, "error: integration failed at step {}: {}\n", tr.stop_step, tr.message);
    return exit_failure;
  }
  return exit_ok;
}

inline int cmd_analytic(const RunConfig& cfg, const fs::path& out_dir, std::ostream& log) {
  cfg.validate();
  const PhysicalParams& p = cfg.params;
  const AnalyticSettings& a = cfg.analytic;
  const double p_v1 = cfg.drive_p_v1(), p_v2 = cfg.drive_p_v2();
  const PlugConstants plug = startup_plug_constants(p, p_v1, p_v2);
  const double t_end = a.t_end.value_or(4.0 / std::sqrt(plug.A * plug.B));
  const std::vector<double> times = detail::uniform_grid(t_end, a.points);

  const double yuan_C = a.yuan_C.value_or(
      friction_factor(reynolds_number(p.rho_l, plug.terminal_velocity, p.d_i, p.mu_l)));
  const double yuan_dp = a.yuan_dp.value_or(p_v1 - p_v2);
  const std::vector<double> wong = detail::integrate_second_order(
      [&](double t, double x, double dx) { return wong_rhs(a.wong_a, a.wong_b, a.wong_k, t, x, dx); }, a.wong_x0,
      a.wong_v0, times, a.substeps);
  const std::vector<double> yuan = detail::integrate_second_order(
      [&](double, double x, double dx) { return yuan_rhs(yuan_C, p.d_i, p.g, p.L, yuan_dp, p.rho_l, x, dx); }, 0.0,
      0.0, times, a.substeps);

  Output out(out_dir, "analytic", cfg);
  io::Table table{{"t", "x_lncosh", "v_lncosh", "tau_film", "x_wong", "x_yuan"}, {}};
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double t = times[i];
    table.rows.push_back({t, plug_position_lncosh(plug.A, plug.B, t), plug_velocity_lncosh(plug.A, plug.B, t),
                          film_temperature(plug.coeffs.Q1, plug.coeffs.Q2, t), wong[i], yuan[i]});
  }
  out.write("analytic.csv", io::to_csv(table, out.hash()));

  if (cfg.plot) {
    io::Plot plot{"Startup plug models", "t (s)", "x (m)", {}};
    plot.series.push_back({"ln cosh", times, {}, "#1f77b4"});
    for (const auto& row : table.rows) {
      plot.series.back().y.push_back(row[1]);
    }
    plot.series.push_back({"Yuan et al.", times, yuan, "#2ca02c", true});
    plot.series.push_back({"Wong et al.", times, wong, "#ff7f0e", true});
    out.write("analytic.svg", io::render_svg(plot, out.hash()));
  }

  json& r = out.results();
  r["A"] = plug.A;
  r["B"] = plug.B;
  r["Q1"] = plug.coeffs.Q1;
  r["Q2"] = plug.coeffs.Q2;
  r["terminal_velocity"] = plug.terminal_velocity;
  r["t_end"] = t_end;
  r["p_v1"] = p_v1;
  r["p_v2"] = p_v2;
  r["yuan"] = {{"C", yuan_C}, {"dp", yuan_dp}};
  r["wong"] = {{"a", a.wong_a}, {"b", a.wong_b}, {"k", a.wong_k}, {"x0", a.wong_x0}, {"v0", a.wong_v0}};
  out.finish();
  fmt::print(log, "analytic: A = {:.6g}, B = {:.6g}, {} points to t = {:.6g} s\n", plug.A, plug.B, times.size(),
             t_end);
  return exit_ok;
}

inline ObservationSet synthesize(const RunConfig& cfg) {
  const EstimationSettings& e = cfg.estimation;
  return generate_synthetic(cfg.params, e.forward, e.n_points, NoiseModel{e.noise_sigma, e.noise_relative}, cfg.seed);
}

inline json truth_json(const ObservationSet& obs, const RunConfig& cfg) {
  return {{"params", io::params_json(*obs.truth)},
          {"noise_sigma", obs.noise_sigma},
          {"noise_relative", obs.noise_relative},
          {"seed", cfg.seed},
          {"forward", to_string(cfg.estimation.forward.model)}};
}

inline int cmd_synth(const RunConfig& cfg, const fs::path& out_dir, std::ostream& log) {
  cfg.validate();
  const ObservationSet obs = synthesize(cfg);
  Output out(out_dir, "synth", cfg);
  out.write("observations.csv", io::observations_csv(obs, out.hash()));
  out.write_json("observations.truth.json", truth_json(obs, cfg));
  json& r = out.results();
  r["n_points"] = obs.samples.size();
  r["t_first"] = obs.samples.front().t;
  r["t_last"] = obs.samples.back().t;
  r["noise_sigma"] = obs.noise_sigma;
  r["noise_relative"] = obs.noise_relative;
  out.finish();
  fmt::print(log, "synth: {} observations on [{:.6g}, {:.6g}] s\n", obs.samples.size(), obs.samples.front().t,
             obs.samples.back().t);
  return exit_ok;
}

inline int cmd_fit(const RunConfig& cfg, const fs::path& out_dir, std::ostream& log) {
  cfg.validate();
  const EstimationSettings& e = cfg.estimation;
  Output out(out_dir, "fit", cfg);

  ObservationSet obs;
  if (e.observations.empty()) {
    obs = synthesize(cfg);
    out.write("observations.csv", io::observations_csv(obs, out.hash()));
    out.write_json("observations.truth.json", truth_json(obs, cfg));
  } else {
    const fs::path path = e.observations;
    obs = io::read_observations(path);
    out.input(path);
    const fs::path sidecar = io::truth_sidecar(path);
    if (fs::exists(sidecar)) {
      try {
        obs.truth = io::params_from_json(json::parse(io::read_file(sidecar)).at("params"));
      } catch (const std::exception& err) {
        throw ConfigError(fmt::format("{}: {}", sidecar.string(), err.what()));
      }
      out.input(sidecar);
    }
  }

  const EstimationProblem problem = make_problem(cfg, obs);
  const bool constrained = e.mode == FitMode::constrained;
  const EnsembleResult fit = constrained ? fit_constrained(problem, cfg.firefly, e.runs, cfg.seed, e.threads)
                                         : fit_lsq(problem, cfg.firefly, e.restarts, cfg.seed, e.threads);

  io::Table convergence{{"iteration"}, {}};
  std::vector<const FitResult*> converged;
  for (std::size_t i = 0; i < fit.runs.size(); ++i) {
    if (fit.runs[i].ok) {
      convergence.header.push_back(fmt::format("run_{}", i));
      converged.push_back(&fit.runs[i]);
    }
  }
  const std::size_t iterations = converged.empty() ? 0 : converged.front()->history.size();
  for (std::size_t it = 0; it < iterations; ++it) {
    std::vector<double> row{static_cast<double>(it + 1)};
    for (const FitResult* run : converged) {
      row.push_back(run->history[it]);
    }
    convergence.rows.push_back(std::move(row));
  }
  out.write("convergence.csv", io::to_csv(convergence, out.hash()));

  if (cfg.plot && iterations > 0) {
    io::Plot plot{"Best objective per run", "iteration", "log10 objective", {}};
    std::vector<double> x(iterations);
    for (std::size_t it = 0; it < iterations; ++it) {
      x[it] = static_cast<double>(it + 1);
    }
    for (const FitResult* run : converged) {
      io::Series s{"", x, {}, "#1f77b4"};
      s.in_legend = false;
      for (double h : run->history) {
        s.y.push_back(std::log10(std::max(h, 1e-300)));
      }
      plot.series.push_back(std::move(s));
    }
    out.write("convergence.svg", io::render_svg(plot, out.hash()));
  }

  json& r = out.results();
  r["mode"] = to_string(e.mode);
  r["objective"] = to_string(problem.mode);
  r["scope"] = to_string(problem.scope);
  r["forward"] = to_string(problem.forward.model);
  r["n_observations"] = obs.samples.size();
  r["units"] = {{"L", "m"}, {"d_i", "m"}, {"T_v", "C"}, {"T_w", "C"}, {"p_v", "kPa"}};
  r["runs"] = json::array();
  for (std::size_t i = 0; i < fit.runs.size(); ++i) {
    const FitResult& run = fit.runs[i];
    json j{{"index", i}, {"seed", run.seed}, {"ok", run.ok}};
    if (run.ok) {
      j["estimates"] = detail::estimates_json(run.estimates, problem);
      j["objective"] = run.objective_value;
      j["residual"] = run.residual;
      j["iterations"] = run.iterations_used;
    } else {
      j["error"] = run.error;
    }
    r["runs"].push_back(std::move(j));
  }
  json stats = json::array();
  for (const ParameterSummary& s : fit.stats.parameters) {
    stats.push_back({{"parameter", to_string(s.parameter)},
                     {"unit", unit_of(s.parameter)},
                     {"mean", s.mean},
                     {"std", s.stddev},
                     {"min", s.min},
                     {"max", s.max}});
  }
  r["ensemble"] = {{"runs", fit.stats.runs}, {"failed", fit.stats.failed}, {"parameters", stats}};
  if (obs.truth) {
    json table = json::array();
    for (const ParameterSummary& s : fit.stats.parameters) {
      const double truth = get_parameter(*obs.truth, s.parameter);
      table.push_back({{"parameter", to_string(s.parameter)},
                       {"unit", unit_of(s.parameter)},
                       {"true", truth},
                       {"estimated", s.mean},
                       {"std", s.stddev},
                       {"min", s.min},
                       {"max", s.max},
                       {"deviation", s.mean - truth}});
    }
    r["truth_table"] = std::move(table);
  }
  out.finish();

  fmt::print(log, "fit ({}): {} of {} runs converged\n", to_string(e.mode), fit.stats.runs, fit.runs.size());
  for (const ParameterSummary& s : fit.stats.parameters) {
    fmt::print(log, "  {:<4} mean {:<12.6g} std {:<12.6g} range [{:.6g}, {:.6g}] {}\n", to_string(s.parameter), s.mean,
               s.stddev, s.min, s.max, unit_of(s.parameter));
  }
  if (fit.stats.runs == 0) {
    fmt::print(log, "error: every run failed\n");
    return exit_failure;
  }
  return exit_ok;
}

inline int run_command(const std::string& command, const RunConfig& cfg, const fs::path& out_dir,
                       std::ostream& log) {
  if (command == "simulate") {
    return cmd_simulate(cfg, out_dir, log);
  }
  if (command == "analytic") {
    return cmd_analytic(cfg, out_dir, log);
  }
  if (command == "synth") {
    return cmd_synth(cfg, out_dir, log);
  }
  if (command == "fit") {
    return cmd_fit(cfg, out_dir, log);
  }
  throw ConfigError(fmt::format("unknown command '{}'", command));
}

// ---------------------------------------------------------------------------

/// Outcome of checking one output directory.
struct Verification {
  std::vector<std::string> failures;
  std::size_t checks = 0;

  void check(bool ok, std::string what) {
    ++checks;
    if (!ok) {
      failures.push_back(std::move(what));
    }
  }
  bool ok() const { return failures.empty(); }
};

/// Checks that report.json in `dir` matches its embedded configuration and
/// that every artifact and input still has the recorded digest and hash.
inline Verification verify_directory(const fs::path& dir) {
  const fs::path report_path = dir / io::report_name;
  json report;
  try {
    report = json::parse(io::read_file(report_path));
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("{}: {}", report_path.string(), e.what()));
  }
  const RunConfig cfg = io::config_from_report(report);
  const std::string hash = config_hash(cfg);
  Verification v;
  v.check(report.at("config_hash").get<std::string>() == hash, "config_hash does not match the embedded config");
  for (const auto& a : report.at("artifacts")) {
    const std::string name = a.at("file").get<std::string>();
    const fs::path path = dir / name;
    if (!fs::exists(path)) {
      v.check(false, name + ": missing");
      continue;
    }
    const std::string content = io::read_file(path);
    v.check(sha256_hex(content) == a.at("sha256").get<std::string>(), name + ": digest mismatch");
    std::string embedded;
    if (path.extension() == ".json") {
      embedded = json::parse(content).value("config_hash", std::string());
    } else {
      embedded = io::embedded_hash(content);
    }
    v.check(embedded == hash, name + ": embedded config hash mismatch");
  }
  for (const auto& in : report.at("inputs")) {
    const std::string name = in.at("file").get<std::string>();
    v.check(fs::exists(name) && io::file_sha256(name) == in.at("sha256").get<std::string>(),
            name + ": input missing or changed");
  }
  return v;
}

/// Re-executes the recorded command into `scratch` and compares artifact digests.
inline Verification rerun_directory(const fs::path& dir, const fs::path& scratch) {
  const json report = json::parse(io::read_file(dir / io::report_name));
  const RunConfig cfg = io::config_from_report(report);
  std::ostringstream quiet;
  run_command(report.at("command").get<std::string>(), cfg, scratch, quiet);
  Verification v;
  for (const auto& a : report.at("artifacts")) {
    const std::string name = a.at("file").get<std::string>();
    v.check(fs::exists(scratch / name) && io::file_sha256(scratch / name) == a.at("sha256").get<std::string>(),
            name + ": rerun output differs");
  }
  return v;
}

inline int cmd_report(const fs::path& dir, bool rerun, std::ostream& log) {
  if (!fs::exists(dir / io::report_name)) {
    throw InputFileError((dir / io::report_name).string(), "report not found");
  }
  Verification v = verify_directory(dir);
  if (rerun) {
    const fs::path scratch =
        fs::temp_directory_path() / fmt::format("heatpipe-rerun-{:016x}", std::random_device{}() * 0x9e3779b97f4a7c15ULL);
    try {
      Verification again = rerun_directory(dir, scratch);
      v.checks += again.checks;
      v.failures.insert(v.failures.end(), again.failures.begin(), again.failures.end());
    } catch (...) {
      fs::remove_all(scratch);
      throw;
    }
    fs::remove_all(scratch);
  }
  for (const auto& f : v.failures) {
    fmt::print(log, "FAIL {}\n", f);
  }
  fmt::print(log, "report: {} checks, {} failed\n", v.checks, v.failures.size());
  return v.ok() ? exit_ok : exit_failure;
}

} // namespace heatpipe::cli
