#pragma once

// Files written and read by the command-line tool: CSV tables, observation
// sets, SVG line plots and the run report that ties them to a configuration.
//
// Every artifact carries the configuration hash: CSV files end with a
// `# config_hash=<hex>` comment line, JSON files have a "config_hash" member
// and SVG files an XML comment.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <json.hpp>

#include "heatpipe/config.hpp"
#include "heatpipe/errors.hpp"
#include "heatpipe/estimation.hpp"

namespace heatpipe::io {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr std::string_view tool_name = "heatpipe";
inline constexpr std::string_view tool_version = "0.1.0";
inline constexpr std::string_view hash_marker = "config_hash=";

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw InputFileError(path.string(), "cannot open file");
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_file(const fs::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out.write(content.data(), static_cast<std::streamsize>(content.size()))) {
    throw std::runtime_error(fmt::format("cannot write {}", path.string()));
  }
}

inline std::string file_sha256(const fs::path& path) { return sha256_hex(read_file(path)); }

inline std::string format_number(double v) { return fmt::format("{:.17g}", v); }

// ---------------------------------------------------------------------------
// CSV

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

inline std::string to_csv(const Table& t, std::string_view hash) {
  std::string out = fmt::format("{}\n", fmt::join(t.header, ","));
  for (const auto& row : t.rows) {
    if (row.size() != t.header.size()) {
      throw std::logic_error("CSV row width does not match header");
    }
    for (std::size_t i = 0; i < row.size(); ++i) {
      out += i ? "," : "";
      out += format_number(row[i]);
    }
    out += '\n';
  }
  out += fmt::format("# {}{}\n", hash_marker, hash);
  return out;
}

/// Parses a numeric CSV with a header line; blank lines and lines starting
/// with '#' are skipped. Throws ConfigError with the line number on bad input.
inline Table parse_csv(std::string_view text, std::string_view origin) {
  Table t;
  std::istringstream in{std::string(text)};
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    const std::string trimmed = config_detail::trim(line);
    if (trimmed.empty() || trimmed.front() == '#') {
      continue;
    }
    const auto cells = config_detail::split(trimmed, ',');
    if (t.header.empty()) {
      t.header = cells;
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw ConfigError(fmt::format("{}:{}: expected {} columns, found {}", origin, line_no, t.header.size(),
                                    cells.size()));
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) {
      try {
        row.push_back(config_detail::parse_double(c));
      } catch (const ConfigError& e) {
        throw ConfigError(fmt::format("{}:{}: {}", origin, line_no, e.what()));
      }
    }
    t.rows.push_back(std::move(row));
  }
  if (t.header.empty()) {
    throw ConfigError(fmt::format("{}: no header line", origin));
  }
  return t;
}

/// Hash recorded in an artifact's trailing comment, or empty.
inline std::string embedded_hash(std::string_view content) {
  const auto pos = content.rfind(hash_marker);
  if (pos == std::string_view::npos) {
    return {};
  }
  const auto start = pos + hash_marker.size();
  const auto end = content.find_first_not_of("0123456789abcdef", start);
  return std::string(content.substr(start, end == std::string_view::npos ? end : end - start));
}

// ---------------------------------------------------------------------------
// Observations

inline std::string observations_csv(const ObservationSet& obs, std::string_view hash) {
  Table t{{"t", "x_obs"}, {}};
  for (const auto& s : obs.samples) {
    t.rows.push_back({s.t, s.x});
  }
  return to_csv(t, hash);
}

/// Reads a "t,x_obs" file. A missing file raises InputFileError.
inline ObservationSet read_observations(const fs::path& path) {
  if (!fs::exists(path)) {
    throw InputFileError(path.string(), "observations file not found");
  }
  const Table t = parse_csv(read_file(path), path.string());
  if (t.header != std::vector<std::string>{"t", "x_obs"}) {
    throw ConfigError(fmt::format("{}: header must be 't,x_obs'", path.string()));
  }
  ObservationSet obs;
  obs.source = ObservationSource::file;
  for (const auto& r : t.rows) {
    obs.samples.push_back({r[0], r[1]});
  }
  try {
    obs.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
  return obs;
}

/// Sidecar holding the generating parameters of a synthetic observation file.
inline fs::path truth_sidecar(const fs::path& observations) {
  fs::path p = observations;
  p.replace_extension(".truth.json");
  return p;
}

inline json params_json(const PhysicalParams& p) {
  RunConfig cfg;
  cfg.params = p;
  json out = json::object();
  for (const auto& [key, value] : config_map(cfg)) {
    if (key.rfind("params.", 0) == 0) {
      out[key.substr(7)] = value;
    }
  }
  return out;
}

inline PhysicalParams params_from_json(const json& j) {
  RunConfig cfg;
  for (const auto& [key, value] : j.items()) {
    set_config_value(cfg, "params." + key, value.get<std::string>());
  }
  return cfg.params;
}

// ---------------------------------------------------------------------------
// SVG line plots

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f77b4";
  bool dashed = false;
  bool markers = false;  ///< draw points instead of a line
  bool fit_axes = true;  ///< false: clipped to the range set by the other series
  bool in_legend = true;
};

struct Plot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
};

namespace svg_detail {

inline std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
    case '<': out += "&lt;"; break;
    case '>': out += "&gt;"; break;
    case '&': out += "&amp;"; break;
    case '"': out += "&quot;"; break;
    default: out += c;
    }
  }
  return out;
}

/// About five round tick values covering [lo, hi].
inline std::vector<double> ticks(double lo, double hi) {
  const double span = hi - lo;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (m * mag >= raw) {
      step = m * mag;
      break;
    }
  }
  std::vector<double> out;
  for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * span; v += step) {
    out.push_back(std::abs(v) < 1e-12 * span ? 0.0 : v);
  }
  return out;
}

} // namespace svg_detail

inline std::string render_svg(const Plot& plot, std::string_view hash) {
  constexpr double width = 720, height = 480, left = 80, right = 20, top = 40, bottom = 60;
  double x_lo = INFINITY, x_hi = -INFINITY, y_lo = INFINITY, y_hi = -INFINITY;
  for (const auto& s : plot.series) {
    if (!s.fit_axes) {
      continue;
    }
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (std::isfinite(s.x[i]) && std::isfinite(s.y[i])) {
        x_lo = std::min(x_lo, s.x[i]);
        x_hi = std::max(x_hi, s.x[i]);
        y_lo = std::min(y_lo, s.y[i]);
        y_hi = std::max(y_hi, s.y[i]);
      }
    }
  }
  if (!(x_lo < x_hi)) {
    x_lo = std::isfinite(x_lo) ? x_lo - 0.5 : 0.0;
    x_hi = x_lo + 1.0;
  }
  if (!(y_lo < y_hi)) {
    y_lo = std::isfinite(y_lo) ? y_lo - 0.5 : 0.0;
    y_hi = y_lo + 1.0;
  }
  const double pad = 0.05 * (y_hi - y_lo);
  y_lo -= pad;
  y_hi += pad;
  const double pw = width - left - right, ph = height - top - bottom;
  auto px = [&](double x) { return left + (x - x_lo) / (x_hi - x_lo) * pw; };
  auto py = [&](double y) { return top + (y_hi - y) / (y_hi - y_lo) * ph; };

  std::string out;
  out += fmt::format(R"(<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">)", width,
                     height, width, height);
  out += fmt::format("\n<!-- {}{} -->\n", hash_marker, hash);
  out += R"(<rect width="100%" height="100%" fill="white"/>)";
  out += "\n";
  out += fmt::format(R"(<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>)",
                     left + pw / 2, svg_detail::escape(plot.title));
  out += "\n";
  out += fmt::format(R"(<clipPath id="plot-area"><rect x="{}" y="{}" width="{}" height="{}"/></clipPath>)", left, top,
                     pw, ph);
  out += fmt::format(R"(<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>)", left, top, pw, ph);
  out += "\n";
  for (double t : svg_detail::ticks(x_lo, x_hi)) {
    out += fmt::format(R"(<line x1="{0:.2f}" y1="{1}" x2="{0:.2f}" y2="{2}" stroke="#ddd"/>)", px(t), top, top + ph);
    out += fmt::format(R"(<text x="{:.2f}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{:g}</text>)",
                       px(t), top + ph + 16, t);
    out += "\n";
  }
  for (double t : svg_detail::ticks(y_lo, y_hi)) {
    out += fmt::format(R"(<line x1="{1}" y1="{0:.2f}" x2="{2}" y2="{0:.2f}" stroke="#ddd"/>)", py(t), left, left + pw);
    out += fmt::format(R"(<text x="{}" y="{:.2f}" font-family="sans-serif" font-size="11" text-anchor="end">{:g}</text>)",
                       left - 6, py(t) + 4, t);
    out += "\n";
  }
  out += fmt::format(R"(<text x="{}" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>)",
                     left + pw / 2, height - 16, svg_detail::escape(plot.x_label));
  out += fmt::format(
      R"svg(<text x="18" y="{0}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 18 {0})">{1}</text>)svg",
      top + ph / 2, svg_detail::escape(plot.y_label));
  out += "\n";

  out += R"svg(<g clip-path="url(#plot-area)">)svg";
  out += "\n";
  for (const auto& s : plot.series) {
    if (s.markers) {
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (std::isfinite(s.y[i])) {
          out += fmt::format(R"(<circle cx="{:.2f}" cy="{:.2f}" r="3" fill="{}"/>)", px(s.x[i]), py(s.y[i]), s.color);
        }
      }
    } else {
      std::string points;
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (std::isfinite(s.y[i])) {
          points += fmt::format("{:.2f},{:.2f} ", px(s.x[i]), py(s.y[i]));
        }
      }
      out += fmt::format(R"(<polyline fill="none" stroke="{}" stroke-width="1.5"{} points="{}"/>)", s.color,
                         s.dashed ? R"( stroke-dasharray="6 4")" : "", points);
    }
    out += "\n";
  }
  out += "</g>\n";
  double ly = top + 16;
  for (const auto& s : plot.series) {
    if (!s.in_legend) {
      continue;
    }
    out += fmt::format(R"(<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{}" stroke-width="2"{}/>)", left + 10, ly - 4,
                       left + 34, ly - 4, s.color, s.dashed ? R"( stroke-dasharray="6 4")" : "");
    out += fmt::format(R"(<text x="{}" y="{}" font-family="sans-serif" font-size="12">{}</text>)", left + 40, ly,
                       svg_detail::escape(s.name));
    out += "\n";
    ly += 16;
  }
  out += "</svg>\n";
  return out;
}

// ---------------------------------------------------------------------------
// Run report

/// Parameters whose default has no source value; reports list them so a
/// reader can tell which inputs were assumed.
inline constexpr std::array<std::string_view, 3> assumed_keys{"params.h_lfv", "params.mu_l", "params.sigma"};

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(now));
}

/// Report of one command invocation. `results` holds command-specific output;
/// artifacts are files written next to the report, inputs are files read.
struct RunReport {
  std::string command;
  RunConfig config;
  json results = json::object();
  std::vector<std::string> artifacts; ///< file names relative to the output directory
  std::vector<fs::path> inputs;

  json to_json(const fs::path& out_dir) const {
    json j;
    j["tool"] = {{"name", tool_name}, {"version", tool_version}};
    j["command"] = command;
    j["timestamp"] = utc_timestamp();
    j["seed"] = config.seed;
    j["config_hash"] = config_hash(config);
    j["config"] = config_map(config);
    j["assumed_values"] = json::object();
    for (std::string_view key : assumed_keys) {
      j["assumed_values"][std::string(key)] = get_config_value(config, key);
    }
    j["results"] = results;
    j["artifacts"] = json::array();
    for (const auto& name : artifacts) {
      j["artifacts"].push_back({{"file", name}, {"sha256", file_sha256(out_dir / name)}});
    }
    j["inputs"] = json::array();
    for (const auto& path : inputs) {
      j["inputs"].push_back({{"file", fs::absolute(path).lexically_normal().string()}, {"sha256", file_sha256(path)}});
    }
    return j;
  }
};

inline constexpr std::string_view report_name = "report.json";

/// Rebuilds the configuration embedded in a report; unknown keys are rejected.
inline RunConfig config_from_report(const json& report) {
  RunConfig cfg;
  for (const auto& [key, value] : report.at("config").items()) {
    set_config_value(cfg, key, value.get<std::string>());
  }
  cfg.validate();
  return cfg;
}

} // namespace heatpipe::io
