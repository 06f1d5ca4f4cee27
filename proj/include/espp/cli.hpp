// Copyright 2026 The ESPP Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ESPP__CLI_HPP_
#define ESPP__CLI_HPP_

#include "espp/config.hpp"
#include "espp/simulator.hpp"
#include "espp/svg_plot.hpp"
#include "espp/trace_io.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace espp::cli
{
namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kCollision = 1, kConfigFailure = 2, kNumericalFailure = 3 };

struct RunConfig
{
  std::optional<fs::path> config_file;
  std::optional<std::string> planner;
  std::vector<double> speeds;  // run takes at most one
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> out_dir;  // run and sweep default to "out"
  bool plots{false};
  int jobs{1};
  std::vector<std::string> overrides;  // dotted.key=value, applied after the file
};

inline const std::vector<double> kSweepSpeeds{20.0, 25.0, 30.0, 35.0};
inline const fs::path kDefaultOutDir{"out"};

/// Sets the log level from ESPP_LOG_LEVEL (error, warn, info, debug).
/// Returns false for any other value.
inline bool init_logging()
{
  if (!spdlog::get("espp")) {
    spdlog::set_default_logger(spdlog::stderr_color_st("espp"));
    spdlog::set_pattern("[%l] %v");
  }
  const char * env = std::getenv("ESPP_LOG_LEVEL");
  const std::string level = env ? env : "info";
  if (level == "error") {
    spdlog::set_level(spdlog::level::err);
  } else if (level == "warn") {
    spdlog::set_level(spdlog::level::warn);
  } else if (level == "info") {
    spdlog::set_level(spdlog::level::info);
  } else if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else {
    spdlog::set_level(spdlog::level::info);
    spdlog::error("ESPP_LOG_LEVEL must be one of error, warn, info, debug; got '{}'", level);
    return false;
  }
  return true;
}

/// Scenario from the file and overrides, then the dedicated flags.
inline sim::Scenario resolve_scenario(const RunConfig & cfg, std::optional<double> speed, std::optional<sim::Planner> planner)
{
  std::vector<std::string> overrides = cfg.overrides;
  if (planner) {
    overrides.push_back(std::string("scenario.planner=\"") + sim::to_string(*planner) + "\"");
  } else if (cfg.planner) {
    if (!sim::parse_planner(*cfg.planner)) {
      throw ConfigError("unknown planner '" + *cfg.planner + "' (expected cpf-cs, apf-fb, apf-nolr or espp)");
    }
    overrides.push_back("scenario.planner=\"" + *cfg.planner + "\"");
  }
  if (speed) {
    overrides.push_back("scenario.speed=" + io::format_double(*speed));
  }
  if (cfg.seed) {
    overrides.push_back("scenario.seed=" + std::to_string(*cfg.seed));
  }
  return config::load_scenario(cfg.config_file, overrides);
}

namespace detail
{
inline void prepare_dir(const fs::path & dir)
{
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw ConfigError("cannot create output directory '" + dir.string() + "'");
  }
}

template <typename Writer>
void write_file(const fs::path & path, Writer && write)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw ConfigError("cannot write '" + path.string() + "'");
  }
  write(out);
  if (!out) {
    throw ConfigError("failed writing '" + path.string() + "'");
  }
}

inline void write_plots(const sim::Trace & trace, const fs::path & dir)
{
  for (auto kind : plot::kAllPlotKinds) {
    write_file(dir / (std::string(plot::to_string(kind)) + ".svg"),
               [&](std::ostream & o) { o << plot::render(plot::make_figure(kind, trace)); });
  }
}
}  // namespace detail

/// Writes trace.csv, obstacle.csv, metrics.json, config.json and, with
/// plots enabled, one SVG per plot kind into the output directory.
inline int cmd_run(const RunConfig & cfg)
{
  const fs::path out_dir = cfg.out_dir.value_or(kDefaultOutDir);
  sim::Scenario sc;
  try {
    if (cfg.speeds.size() > 1) {
      throw ConfigError("run takes a single --speed");
    }
    sc = resolve_scenario(cfg, cfg.speeds.empty() ? std::nullopt : std::optional(cfg.speeds.front()), std::nullopt);
    detail::prepare_dir(out_dir);
  } catch (const EsppError & e) {
    spdlog::error("configuration error: {}", e.what());
    return kConfigFailure;
  }
  spdlog::debug("running {} at {} m/s, seed {}", sim::to_string(sc.planner), sc.speed, sc.seed);
  sim::Trace trace;
  try {
    trace = sim::run(sc);
  } catch (const sim::NumericalError & e) {
    spdlog::error("numerical failure: {}", e.what());
    return kNumericalFailure;
  } catch (const EsppError & e) {
    spdlog::error("simulation failure: {}", e.what());
    return kNumericalFailure;
  }
  if (!trace.note.empty()) {
    spdlog::debug("run ended: {}", trace.note);
  }
  const auto metrics = sim::compute_metrics(trace);
  try {
    detail::write_file(out_dir / "trace.csv", [&](std::ostream & o) { io::write_trace_csv(o, trace); });
    detail::write_file(out_dir / "obstacle.csv", [&](std::ostream & o) { io::write_obstacle_csv(o, trace); });
    detail::write_file(
      out_dir / "metrics.json", [&](std::ostream & o) { o << io::metrics_json(metrics, sc).dump(2) << '\n'; });
    detail::write_file(
      out_dir / "config.json", [&](std::ostream & o) { o << config::scenario_to_json(sc).dump(2) << '\n'; });
    if (cfg.plots) {
      detail::write_plots(trace, out_dir);
    }
  } catch (const ConfigError & e) {
    spdlog::error("output error: {}", e.what());
    return kConfigFailure;
  }
  spdlog::info(
    "{} at {} m/s: ac {:.5f} 1/m, rt {:.2f} s, ca {}, ss {}, max steer {:.4f} rad", sim::to_string(sc.planner),
    sc.speed, metrics.ac, metrics.rt, metrics.ca, metrics.ss, metrics.max_steer);
  if (!metrics.ca) {
    spdlog::warn("collision with the obstacle");
    return kCollision;
  }
  return kOk;
}

struct SweepCell
{
  sim::Planner planner{sim::Planner::Espp};
  double speed{0.0};
  std::optional<sim::Metrics> metrics;
  std::string error;
};

namespace detail
{
inline std::string csv_quote(const std::string & s)
{
  std::string out = "\"";
  for (char c : s) {
    out += c == '"' ? std::string("\"\"") : std::string(1, c);
  }
  return out + "\"";
}
}  // namespace detail

inline constexpr std::string_view kSweepHeader = "planner,speed_mps,ac,rt_s,ca,ss,max_steer_rad,max_lat_accel_mps2,error";

inline void write_sweep_csv(std::ostream & out, const std::vector<SweepCell> & cells)
{
  out << kSweepHeader << '\n';
  for (const auto & c : cells) {
    out << sim::to_string(c.planner) << ',' << io::format_double(c.speed) << ',';
    if (c.metrics) {
      const auto & m = *c.metrics;
      out << io::format_double(m.ac) << ',' << io::format_double(m.rt) << ',' << (m.ca ? "true" : "false") << ','
          << (m.ss ? "true" : "false") << ',' << io::format_double(m.max_steer) << ','
          << io::format_double(m.max_lat_accel) << ",\n";
    } else {
      out << ",,,,,," << detail::csv_quote(c.error) << '\n';
    }
  }
}

/// Planners as rows and speeds as columns, each cell AC/RT/CA/SS.
inline void print_sweep_table(std::ostream & out, const std::vector<SweepCell> & cells, const std::vector<double> & speeds)
{
  char buf[64];
  out << "planner   ";
  for (double v : speeds) {
    std::snprintf(buf, sizeof buf, " | %-26s", (io::format_double(v) + " m/s  AC / RT / CA / SS").c_str());
    out << buf;
  }
  out << '\n';
  for (auto p : sim::kAllPlanners) {
    bool any = false;
    std::string row;
    std::snprintf(buf, sizeof buf, "%-10s", sim::to_string(p));
    row += buf;
    for (double v : speeds) {
      const auto it = std::find_if(cells.begin(), cells.end(), [&](const SweepCell & c) {
        return c.planner == p && c.speed == v;
      });
      if (it == cells.end()) {
        continue;
      }
      any = true;
      if (it->metrics) {
        const auto & m = *it->metrics;
        std::snprintf(buf, sizeof buf, " | %.5f / %5.2f / %s / %s     ", m.ac, m.rt, m.ca ? "ok" : "x ", m.ss ? "ok" : "x ");
      } else {
        std::snprintf(buf, sizeof buf, " | %-26s", "error");
      }
      row += buf;
    }
    if (any) {
      out << row << '\n';
    }
  }
}

/// Runs every (planner, speed) cell on cfg.jobs threads and writes
/// summary.csv. Failed cells are recorded and the sweep continues.
inline int cmd_sweep(const RunConfig & cfg, std::ostream & table = std::cout)
{
  const fs::path out_dir = cfg.out_dir.value_or(kDefaultOutDir);
  const std::vector<double> speeds = cfg.speeds.empty() ? kSweepSpeeds : cfg.speeds;
  std::vector<SweepCell> cells;
  std::vector<sim::Scenario> scenarios;
  try {
    if (cfg.jobs < 1) {
      throw ConfigError("--jobs must be at least 1");
    }
    std::vector<sim::Planner> planners(sim::kAllPlanners.begin(), sim::kAllPlanners.end());
    if (cfg.planner) {
      const auto p = sim::parse_planner(*cfg.planner);
      if (!p) {
        throw ConfigError("unknown planner '" + *cfg.planner + "' (expected cpf-cs, apf-fb, apf-nolr or espp)");
      }
      planners = {*p};
    }
    for (auto p : planners) {
      for (double v : speeds) {
        scenarios.push_back(resolve_scenario(cfg, v, p));
        cells.push_back({p, v, std::nullopt, {}});
      }
    }
    detail::prepare_dir(out_dir);
  } catch (const EsppError & e) {
    spdlog::error("configuration error: {}", e.what());
    return kConfigFailure;
  }

  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        cells[i].metrics = sim::compute_metrics(sim::run(scenarios[i]));
      } catch (const std::exception & e) {
        cells[i].error = e.what();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const auto n = std::min<std::size_t>(static_cast<std::size_t>(cfg.jobs), cells.size());
    for (std::size_t j = 1; j < n; ++j) {
      pool.emplace_back(worker);
    }
    worker();
  }

  bool failed = false;
  for (const auto & c : cells) {
    if (!c.metrics) {
      failed = true;
      spdlog::error("{} at {} m/s failed: {}", sim::to_string(c.planner), c.speed, c.error);
    }
  }
  try {
    detail::write_file(out_dir / "summary.csv", [&](std::ostream & o) { write_sweep_csv(o, cells); });
  } catch (const ConfigError & e) {
    spdlog::error("output error: {}", e.what());
    return kConfigFailure;
  }
  print_sweep_table(table, cells, speeds);
  return failed ? kNumericalFailure : kOk;
}

/// Renders one plot kind from a trace written by cmd_run. The scenario comes
/// from --config, else config.json beside the trace, else the defaults;
/// obstacle.csv beside the trace is read when present. Writes
/// <out_dir>/<kind>.svg, where out_dir defaults to the trace directory.
inline int cmd_plot(const fs::path & trace_path, std::string_view kind_name, RunConfig cfg)
{
  const auto kind = plot::parse_plot_kind(kind_name);
  if (!kind) {
    spdlog::error(
      "unknown plot kind '{}' (expected trajectory, steering, heading, lat_accel or potential_heatmap)", kind_name);
    return kConfigFailure;
  }
  const fs::path dir = trace_path.has_parent_path() ? trace_path.parent_path() : fs::path(".");
  if (!cfg.config_file && fs::exists(dir / "config.json")) {
    cfg.config_file = dir / "config.json";
  }
  const fs::path out_dir = cfg.out_dir.value_or(dir);
  try {
    const sim::Scenario sc = config::load_scenario(cfg.config_file, cfg.overrides);
    std::ifstream ego(trace_path);
    if (!ego) {
      throw ConfigError("cannot open trace '" + trace_path.string() + "'");
    }
    std::ifstream obstacle(dir / "obstacle.csv");
    const sim::Trace trace = io::read_trace(ego, obstacle ? &obstacle : nullptr, sc);
    detail::prepare_dir(out_dir);
    const fs::path out = out_dir / (std::string(plot::to_string(*kind)) + ".svg");
    detail::write_file(out, [&](std::ostream & o) { o << plot::render(plot::make_figure(*kind, trace)); });
    spdlog::info("wrote {}", out.string());
  } catch (const EsppError & e) {
    spdlog::error("plot error: {}", e.what());
    return kConfigFailure;
  }
  return kOk;
}

}  // namespace espp::cli

#endif  // ESPP__CLI_HPP_
