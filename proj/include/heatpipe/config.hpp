#pragma once

// Run configuration: a flat `key = value` text format with [sections], every
// key of which can also be set from the command line as `section.key=value`.
//
//   seed = 7
//   [params]
//   L = 0.18
//   [firefly]
//   iterations = 5000
//
// Keys before the first section belong to [run]. Unknown keys, repeated keys
// and malformed values are rejected. The canonical text (every key, sorted,
// floats with 17 significant digits) and its SHA-256 identify a run.

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "heatpipe/analytic.hpp"
#include "heatpipe/errors.hpp"
#include "heatpipe/estimation.hpp"
#include "heatpipe/firefly.hpp"
#include "heatpipe/integrator.hpp"
#include "heatpipe/model.hpp"

namespace heatpipe {

enum class FitMode { lsq, constrained };

inline const char* to_string(FitMode m) { return m == FitMode::lsq ? "lsq" : "constrained"; }

struct AnalyticSettings {
  std::optional<double> t_end; ///< unset: four startup time constants
  std::size_t points = 201;
  std::size_t substeps = 20; ///< RK4 steps per output interval for the reference models
  double wong_a = 20.0;
  double wong_b = 4.0e5;
  double wong_k = 1.0;
  double wong_x0 = 0.01;
  double wong_v0 = 0.0;
  std::optional<double> yuan_C;  ///< unset: the friction factor at the terminal speed
  std::optional<double> yuan_dp; ///< unset: the simulation drive p_v1 - p_v2
};

struct EstimationSettings {
  FitMode mode = FitMode::constrained;
  std::vector<Parameter> free{all_parameters.begin(), all_parameters.end()};
  std::array<ParameterBound, 5> box{constrained_box(Parameter::L), constrained_box(Parameter::d_i),
                                    constrained_box(Parameter::T_v), constrained_box(Parameter::T_w),
                                    constrained_box(Parameter::p_v)};
  std::array<ParameterBound, 5> loose{loose_box(Parameter::L), loose_box(Parameter::d_i), loose_box(Parameter::T_v),
                                      loose_box(Parameter::T_w), loose_box(Parameter::p_v)};
  std::size_t n_points = 25;
  double noise_sigma = 0.0;
  double noise_relative = 0.02;
  std::size_t runs = 40;
  std::size_t restarts = 40;
  PenaltyScope scope = PenaltyScope::swarm;
  ForwardConfig forward;
  std::string observations; ///< CSV path; empty means synthesize from [params]
  unsigned threads = 0;     ///< worker threads, 0 = hardware; does not affect results
};

struct RunConfig {
  PhysicalParams params;
  IntegratorSettings integrator{10.0, 1e-4, 1000};
  std::optional<double> p_v1; ///< unset: bubble heated to T_w at constant volume
  std::optional<double> p_v2; ///< unset: p_v0
  AnalyticSettings analytic;
  firefly::Config firefly;
  EstimationSettings estimation;
  bool plot = true;
  std::uint64_t seed = 1;

  double drive_p_v1() const { return p_v1 ? *p_v1 : heated_vapor_pressure(params); }
  double drive_p_v2() const { return p_v2 ? *p_v2 : params.p_v0; }

  /// Checks every value against the invariants of the type it feeds.
  /// Throws ConfigError.
  void validate() const {
    try {
      params.validate();
      integrator.validate();
      firefly.validate();
    } catch (const DomainError& e) {
      throw ConfigError(e.what());
    }
    if (analytic.points < 2) {
      throw ConfigError("analytic.points must be at least 2");
    }
    if (analytic.substeps < 1) {
      throw ConfigError("analytic.substeps must be at least 1");
    }
    if (analytic.t_end && !(*analytic.t_end > 0.0)) {
      throw ConfigError("analytic.t_end must be positive");
    }
    const auto& e = estimation;
    if (e.free.empty()) {
      throw ConfigError("estimation.free must name at least one parameter");
    }
    for (const auto* set : {&e.box, &e.loose}) {
      for (const auto& b : *set) {
        if (!std::isfinite(b.lower) || !std::isfinite(b.upper) || b.lower > b.upper) {
          throw ConfigError(fmt::format("bounds for {} must satisfy lower <= upper", to_string(b.parameter)));
        }
      }
    }
    if (e.n_points < 2) {
      throw ConfigError("estimation.n_points must be at least 2");
    }
    if (e.runs < 2 || e.restarts < 2) {
      throw ConfigError("estimation.runs and estimation.restarts must be at least 2");
    }
    if (!(e.noise_sigma >= 0.0) || !(e.noise_relative >= 0.0)) {
      throw ConfigError("noise scales must be non-negative");
    }
    if (!(e.forward.dt > 0.0) || e.forward.substeps < 1) {
      throw ConfigError("estimation.forward_dt must be positive and forward_substeps at least 1");
    }
  }
};

namespace config_detail {

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) {
    return {};
  }
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) {
      return out;
    }
    start = pos + 1;
  }
}

inline double parse_double(std::string_view text) {
  const std::string s = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    throw ConfigError(fmt::format("'{}' is not a number", s));
  }
  if (!std::isfinite(v)) {
    throw ConfigError(fmt::format("'{}' is not finite", s));
  }
  return v;
}

template <class Int>
Int parse_integer(std::string_view text) {
  const std::string s = trim(text);
  Int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    throw ConfigError(fmt::format("'{}' is not a non-negative integer", s));
  }
  return v;
}

inline bool parse_bool(std::string_view text) {
  const std::string s = trim(text);
  if (s == "true" || s == "1" || s == "yes" || s == "on") {
    return true;
  }
  if (s == "false" || s == "0" || s == "no" || s == "off") {
    return false;
  }
  throw ConfigError(fmt::format("'{}' is not a boolean", s));
}

inline std::optional<double> parse_optional(std::string_view text) {
  if (trim(text) == "auto") {
    return std::nullopt;
  }
  return parse_double(text);
}

inline std::string format_double(double v) { return fmt::format("{:.17g}", v); }

inline std::string format_optional(const std::optional<double>& v) { return v ? format_double(*v) : "auto"; }

struct Key {
  std::string name; ///< section.key
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
  bool hashed = true; ///< false for settings that cannot change results
};

template <class Ref>
Key real_key(std::string name, Ref ref) {
  return {std::move(name), [ref](RunConfig& c, std::string_view v) { ref(c) = parse_double(v); },
          [ref](const RunConfig& c) { return format_double(ref(c)); }};
}

template <class Ref>
Key optional_key(std::string name, Ref ref) {
  return {std::move(name), [ref](RunConfig& c, std::string_view v) { ref(c) = parse_optional(v); },
          [ref](const RunConfig& c) { return format_optional(ref(c)); }};
}

template <class Int, class Ref>
Key integer_key(std::string name, Ref ref) {
  return {std::move(name), [ref](RunConfig& c, std::string_view v) { ref(c) = parse_integer<Int>(v); },
          [ref](const RunConfig& c) { return std::to_string(ref(c)); }};
}

template <class Ref, class Enum>
Key choice_key(std::string name, Ref ref, std::vector<Enum> choices) {
  return {std::move(name),
          [ref, choices, name](RunConfig& c, std::string_view v) {
            const std::string s = trim(v);
            for (Enum e : choices) {
              if (s == to_string(e)) {
                ref(c) = e;
                return;
              }
            }
            std::string allowed;
            for (Enum e : choices) {
              allowed += allowed.empty() ? "" : ", ";
              allowed += to_string(e);
            }
            throw ConfigError(fmt::format("'{}' is not one of: {}", s, allowed));
          },
          [ref](const RunConfig& c) { return std::string(to_string(ref(c))); }};
}

inline std::vector<Key> build_registry() {
  std::vector<Key> keys;
  keys.push_back(integer_key<std::uint64_t>("run.seed", [](auto& c) -> auto& { return c.seed; }));

#define HEATPIPE_PARAM(field) keys.push_back(real_key("params." #field, [](auto& c) -> auto& { return c.params.field; }))
  HEATPIPE_PARAM(L);
  HEATPIPE_PARAM(d_i);
  HEATPIPE_PARAM(delta);
  HEATPIPE_PARAM(sigma);
  HEATPIPE_PARAM(sigma0);
  HEATPIPE_PARAM(g);
  HEATPIPE_PARAM(rho_l);
  HEATPIPE_PARAM(rho_v);
  HEATPIPE_PARAM(h_lfv);
  HEATPIPE_PARAM(h_lfw);
  HEATPIPE_PARAM(h_v);
  HEATPIPE_PARAM(c_vv);
  HEATPIPE_PARAM(c_vl);
  HEATPIPE_PARAM(R);
  HEATPIPE_PARAM(R_v);
  HEATPIPE_PARAM(mu_l);
  HEATPIPE_PARAM(L_v);
  HEATPIPE_PARAM(T_w);
  HEATPIPE_PARAM(T_v0);
  HEATPIPE_PARAM(p_v0);
  HEATPIPE_PARAM(p_l);
  HEATPIPE_PARAM(m_f0_ratio);
  HEATPIPE_PARAM(r_v);
#undef HEATPIPE_PARAM
  keys.push_back(optional_key("params.L_0", [](auto& c) -> auto& { return c.params.L_0; }));
  keys.push_back(optional_key("params.L_p", [](auto& c) -> auto& { return c.params.L_p; }));

  keys.push_back(real_key("simulate.t_end", [](auto& c) -> auto& { return c.integrator.t_end; }));
  keys.push_back(real_key("simulate.dt", [](auto& c) -> auto& { return c.integrator.dt; }));
  keys.push_back(integer_key<std::size_t>("simulate.substeps", [](auto& c) -> auto& { return c.integrator.substeps; }));
  keys.push_back(optional_key("simulate.p_v1", [](auto& c) -> auto& { return c.p_v1; }));
  keys.push_back(optional_key("simulate.p_v2", [](auto& c) -> auto& { return c.p_v2; }));

  keys.push_back(optional_key("analytic.t_end", [](auto& c) -> auto& { return c.analytic.t_end; }));
  keys.push_back(integer_key<std::size_t>("analytic.points", [](auto& c) -> auto& { return c.analytic.points; }));
  keys.push_back(integer_key<std::size_t>("analytic.substeps", [](auto& c) -> auto& { return c.analytic.substeps; }));
  keys.push_back(real_key("analytic.wong_a", [](auto& c) -> auto& { return c.analytic.wong_a; }));
  keys.push_back(real_key("analytic.wong_b", [](auto& c) -> auto& { return c.analytic.wong_b; }));
  keys.push_back(real_key("analytic.wong_k", [](auto& c) -> auto& { return c.analytic.wong_k; }));
  keys.push_back(real_key("analytic.wong_x0", [](auto& c) -> auto& { return c.analytic.wong_x0; }));
  keys.push_back(real_key("analytic.wong_v0", [](auto& c) -> auto& { return c.analytic.wong_v0; }));
  keys.push_back(optional_key("analytic.yuan_C", [](auto& c) -> auto& { return c.analytic.yuan_C; }));
  keys.push_back(optional_key("analytic.yuan_dp", [](auto& c) -> auto& { return c.analytic.yuan_dp; }));

  keys.push_back(integer_key<std::size_t>("firefly.population", [](auto& c) -> auto& { return c.firefly.population; }));
  keys.push_back(integer_key<std::size_t>("firefly.iterations", [](auto& c) -> auto& { return c.firefly.iterations; }));
  keys.push_back(real_key("firefly.beta0", [](auto& c) -> auto& { return c.firefly.beta0; }));
  keys.push_back(real_key("firefly.gamma", [](auto& c) -> auto& { return c.firefly.gamma; }));
  keys.push_back(real_key("firefly.alpha", [](auto& c) -> auto& { return c.firefly.alpha; }));
  keys.push_back(real_key("firefly.alpha_decay", [](auto& c) -> auto& { return c.firefly.alpha_decay; }));
  keys.push_back(choice_key("firefly.randomization", [](auto& c) -> auto& { return c.firefly.randomization; },
                            std::vector{firefly::Randomization::uniform, firefly::Randomization::gaussian,
                                        firefly::Randomization::levy}));
  keys.push_back(real_key("firefly.levy_lambda", [](auto& c) -> auto& { return c.firefly.levy_lambda; }));

  keys.push_back(choice_key("estimation.mode", [](auto& c) -> auto& { return c.estimation.mode; },
                            std::vector{FitMode::lsq, FitMode::constrained}));
  keys.push_back({"estimation.free",
                  [](RunConfig& c, std::string_view v) {
                    std::vector<Parameter> free;
                    for (const auto& name : split(v, ',')) {
                      const Parameter p = parse_parameter(name);
                      if (std::find(free.begin(), free.end(), p) != free.end()) {
                        throw ConfigError(fmt::format("parameter {} listed twice", name));
                      }
                      free.push_back(p);
                    }
                    c.estimation.free = std::move(free);
                  },
                  [](const RunConfig& c) {
                    std::string out;
                    for (Parameter p : c.estimation.free) {
                      out += out.empty() ? "" : ",";
                      out += to_string(p);
                    }
                    return out;
                  }});
  for (std::size_t i = 0; i < all_parameters.size(); ++i) {
    for (const char* prefix : {"box_", "loose_"}) {
      const bool box = std::string_view(prefix) == "box_";
      keys.push_back({fmt::format("estimation.{}{}", prefix, to_string(all_parameters[i])),
                      [i, box](RunConfig& c, std::string_view v) {
                        const auto parts = split(v, ',');
                        if (parts.size() != 2) {
                          throw ConfigError(fmt::format("'{}' is not a 'lower,upper' pair", trim(v)));
                        }
                        auto& b = box ? c.estimation.box[i] : c.estimation.loose[i];
                        b.lower = parse_double(parts[0]);
                        b.upper = parse_double(parts[1]);
                      },
                      [i, box](const RunConfig& c) {
                        const auto& b = box ? c.estimation.box[i] : c.estimation.loose[i];
                        return format_double(b.lower) + "," + format_double(b.upper);
                      }});
    }
  }
  keys.push_back(integer_key<std::size_t>("estimation.n_points", [](auto& c) -> auto& { return c.estimation.n_points; }));
  keys.push_back(real_key("estimation.noise_sigma", [](auto& c) -> auto& { return c.estimation.noise_sigma; }));
  keys.push_back(real_key("estimation.noise_relative", [](auto& c) -> auto& { return c.estimation.noise_relative; }));
  keys.push_back(integer_key<std::size_t>("estimation.runs", [](auto& c) -> auto& { return c.estimation.runs; }));
  keys.push_back(integer_key<std::size_t>("estimation.restarts", [](auto& c) -> auto& { return c.estimation.restarts; }));
  keys.push_back(choice_key("estimation.scope", [](auto& c) -> auto& { return c.estimation.scope; },
                            std::vector{PenaltyScope::swarm, PenaltyScope::ensemble}));
  keys.push_back(choice_key("estimation.forward", [](auto& c) -> auto& { return c.estimation.forward.model; },
                            std::vector{ForwardModel::analytic, ForwardModel::ode}));
  keys.push_back({"estimation.t_obs",
                  [](RunConfig& c, std::string_view v) {
                    const auto t = parse_optional(v);
                    if (t && !(*t > 0.0)) {
                      throw ConfigError("t_obs must be positive or auto");
                    }
                    c.estimation.forward.t_obs = t.value_or(0.0);
                  },
                  [](const RunConfig& c) {
                    const double t = c.estimation.forward.t_obs;
                    return t > 0.0 ? format_double(t) : std::string("auto");
                  }});
  keys.push_back(real_key("estimation.forward_dt", [](auto& c) -> auto& { return c.estimation.forward.dt; }));
  keys.push_back(integer_key<std::size_t>("estimation.forward_substeps",
                                          [](auto& c) -> auto& { return c.estimation.forward.substeps; }));
  keys.push_back({"estimation.observations",
                  [](RunConfig& c, std::string_view v) { c.estimation.observations = trim(v); },
                  [](const RunConfig& c) { return c.estimation.observations; }});
  Key threads = integer_key<unsigned>("estimation.threads", [](auto& c) -> auto& { return c.estimation.threads; });
  threads.hashed = false;
  keys.push_back(std::move(threads));

  keys.push_back({"output.plot", [](RunConfig& c, std::string_view v) { c.plot = parse_bool(v); },
                  [](const RunConfig& c) { return std::string(c.plot ? "true" : "false"); }});

  std::sort(keys.begin(), keys.end(), [](const Key& a, const Key& b) { return a.name < b.name; });
  return keys;
}

inline const std::vector<Key>& registry() {
  static const std::vector<Key> keys = build_registry();
  return keys;
}

inline const Key& find_key(std::string_view name) {
  const auto& keys = registry();
  const auto it = std::lower_bound(keys.begin(), keys.end(), name,
                                   [](const Key& k, std::string_view n) { return k.name < n; });
  if (it == keys.end() || it->name != name) {
    throw ConfigError(fmt::format("unknown configuration key '{}'", name));
  }
  return *it;
}

} // namespace config_detail

/// Names of every accepted key, sorted.
inline std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& k : config_detail::registry()) {
    out.push_back(k.name);
  }
  return out;
}

/// Sets one key ("section.key"). Throws ConfigError naming the key on failure.
inline void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value) {
  const auto& k = config_detail::find_key(key);
  try {
    k.set(cfg, value);
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("{}: {}", key, e.what()));
  }
}

inline std::string get_config_value(const RunConfig& cfg, std::string_view key) {
  return config_detail::find_key(key).get(cfg);
}

/// Applies a "section.key=value" assignment.
inline void apply_override(RunConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError(fmt::format("override '{}' is not of the form section.key=value", assignment));
  }
  set_config_value(cfg, config_detail::trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

/// Parses config text onto `cfg`. `origin` names the source in error messages.
inline void parse_config(RunConfig& cfg, std::string_view text, std::string_view origin = "<config>") {
  std::string section = "run";
  std::set<std::string> seen;
  std::istringstream in{std::string(text)};
  std::string raw;
  for (std::size_t line_no = 1; std::getline(in, raw); ++line_no) {
    const auto hash = raw.find_first_of("#;");
    const std::string line = config_detail::trim(std::string_view(raw).substr(0, hash));
    if (line.empty()) {
      continue;
    }
    try {
      if (line.front() == '[') {
        if (line.back() != ']' || line.size() < 3) {
          throw ConfigError(fmt::format("malformed section header '{}'", line));
        }
        section = config_detail::trim(std::string_view(line).substr(1, line.size() - 2));
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw ConfigError(fmt::format("expected key = value, got '{}'", line));
      }
      const std::string key = section + "." + config_detail::trim(std::string_view(line).substr(0, eq));
      if (!seen.insert(key).second) {
        throw ConfigError(fmt::format("key '{}' set twice", key));
      }
      set_config_value(cfg, key, std::string_view(line).substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("{}:{}: {}", origin, line_no, e.what()));
    }
  }
}

inline RunConfig load_config_file(const std::filesystem::path& path, RunConfig cfg = {}) {
  std::ifstream in(path);
  if (!in) {
    throw InputFileError(path.string(), "cannot open config file");
  }
  std::stringstream buf;
  buf << in.rdbuf();
  parse_config(cfg, buf.str(), path.string());
  return cfg;
}

/// Every result-affecting key as "section.key=value", sorted, one per line.
inline std::string canonical_text(const RunConfig& cfg) {
  std::string out;
  for (const auto& k : config_detail::registry()) {
    if (k.hashed) {
      out += k.name + "=" + k.get(cfg) + "\n";
    }
  }
  return out;
}

/// Key-value view of the canonical text (unhashed keys included).
inline std::map<std::string, std::string> config_map(const RunConfig& cfg) {
  std::map<std::string, std::string> out;
  for (const auto& k : config_detail::registry()) {
    out[k.name] = k.get(cfg);
  }
  return out;
}

inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 computation failed");
  }
  std::string hex;
  hex.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    hex += fmt::format("{:02x}", digest[i]);
  }
  return hex;
}

inline std::string config_hash(const RunConfig& cfg) { return sha256_hex(canonical_text(cfg)); }

/// Estimation problem described by the [estimation] section, with the given observations.
inline EstimationProblem make_problem(const RunConfig& cfg, ObservationSet observations) {
  EstimationProblem pr;
  const bool constrained = cfg.estimation.mode == FitMode::constrained;
  for (Parameter p : cfg.estimation.free) {
    const auto idx = static_cast<std::size_t>(p);
    pr.free.push_back(constrained ? cfg.estimation.box[idx] : cfg.estimation.loose[idx]);
  }
  pr.fixed = cfg.params;
  pr.observations = std::move(observations);
  pr.mode = constrained ? ObjectiveMode::penalized : ObjectiveMode::lsq;
  pr.scope = cfg.estimation.scope;
  pr.forward = cfg.estimation.forward;
  return pr;
}

} // namespace heatpipe
