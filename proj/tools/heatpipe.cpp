// heatpipe: simulate the plug/bubble model, export the startup closed forms,
// synthesise observations and estimate parameters with the firefly algorithm.
//
//   heatpipe simulate --out run1
//   heatpipe fit --mode lsq --config table1.ini --set firefly.iterations=2000
//   heatpipe report run1 --rerun

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "heatpipe/commands.hpp"

namespace {

namespace fs = std::filesystem;
using namespace heatpipe;

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  bool no_plot = false;
  std::string obs;
  std::string mode;
};

void add_common(CLI::App* sub, CommonOptions& o) {
  sub->add_option("-c,--config", o.config_path, "configuration file (key = value with [sections])");
  sub->add_option("-s,--set", o.overrides, "override a configuration key, section.key=value (repeatable)");
  sub->add_option("-o,--out", o.out, "output directory")->capture_default_str();
  sub->add_option("--seed", o.seed, "master seed (run.seed)");
  sub->add_flag("--no-plot", o.no_plot, "do not write SVG plots");
}

RunConfig build_config(const CommonOptions& o) {
  RunConfig cfg;
  if (!o.config_path.empty()) {
    cfg = load_config_file(o.config_path);
  }
  for (const auto& assignment : o.overrides) {
    apply_override(cfg, assignment);
  }
  if (o.seed) {
    cfg.seed = *o.seed;
  }
  if (o.no_plot) {
    cfg.plot = false;
  }
  if (!o.obs.empty()) {
    set_config_value(cfg, "estimation.observations", o.obs);
  }
  if (!o.mode.empty()) {
    set_config_value(cfg, "estimation.mode", o.mode);
  }
  cfg.validate();
  return cfg;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pulsating heat pipe startup model and firefly parameter estimation", "heatpipe"};
  app.set_version_flag("--version", std::string(io::tool_version));
  app.require_subcommand(1);

  CommonOptions opts;
  auto* simulate = app.add_subcommand("simulate", "integrate the coupled model; writes trajectory.csv");
  auto* analytic = app.add_subcommand("analytic", "startup closed forms and reference models; writes analytic.csv");
  auto* synth = app.add_subcommand("synth", "synthetic plug observations; writes observations.csv");
  auto* fit = app.add_subcommand("fit", "firefly parameter estimation; writes convergence.csv");
  for (auto* sub : {simulate, analytic, synth, fit}) {
    add_common(sub, opts);
  }
  fit->add_option("--mode", opts.mode, "lsq or constrained (estimation.mode)")
      ->check(CLI::IsMember({"lsq", "constrained"}));
  fit->add_option("--obs", opts.obs, "observations CSV (t,x_obs); omitted: synthesise from [params]");

  std::string report_dir;
  bool rerun = false;
  auto* report = app.add_subcommand("report", "verify an output directory against its report.json");
  report->add_option("dir", report_dir, "output directory")->required();
  report->add_flag("--rerun", rerun, "also re-execute the recorded run and compare artifacts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::exit_usage;
  }

  try {
    if (report->parsed()) {
      return cli::cmd_report(report_dir, rerun, std::cout);
    }
    const RunConfig cfg = build_config(opts);
    CLI::App* chosen = app.get_subcommands().front();
    return cli::run_command(chosen->get_name(), cfg, opts.out, std::cout);
  } catch (const ConfigError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return cli::exit_usage;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return cli::exit_failure;
  }
}
