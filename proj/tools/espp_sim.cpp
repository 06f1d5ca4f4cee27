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

#include "espp/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <optional>
#include <string>

namespace
{
struct Flags
{
  std::string config;
  std::string planner;
  std::vector<double> speeds;
  std::uint64_t seed{0};
  std::string out;
  bool plots{false};
  int jobs{1};
  std::vector<std::string> overrides;
};

void add_common(CLI::App & cmd, Flags & f)
{
  cmd.add_option("--config", f.config, "Scenario JSON file");
  cmd.add_option("--set", f.overrides, "Override a config field, e.g. --set mpc.u_max=0.25 (repeatable)");
  cmd.add_option("--out", f.out, "Output directory");
}

espp::cli::RunConfig to_run_config(const CLI::App & cmd, const Flags & f)
{
  espp::cli::RunConfig cfg;
  if (cmd.count("--config") > 0) {
    cfg.config_file = f.config;
  }
  if (cmd.get_option_no_throw("--planner") && cmd.count("--planner") > 0) {
    cfg.planner = f.planner;
  }
  cfg.speeds = f.speeds;
  if (cmd.get_option_no_throw("--seed") && cmd.count("--seed") > 0) {
    cfg.seed = f.seed;
  }
  if (cmd.count("--out") > 0) {
    cfg.out_dir = f.out;
  }
  cfg.plots = f.plots;
  cfg.jobs = f.jobs;
  cfg.overrides = f.overrides;
  return cfg;
}
}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"Emergency stopping path planner simulator"};
  app.require_subcommand(1);
  Flags f;

  auto * run = app.add_subcommand("run", "Simulate one scenario and write trace, metrics and plots");
  add_common(*run, f);
  run->add_option("--planner", f.planner, "cpf-cs, apf-fb, apf-nolr or espp");
  run->add_option("--speed", f.speeds, "Initial speed [m/s]")->expected(1);
  run->add_option("--seed", f.seed, "Random seed");
  run->add_flag("--plots", f.plots, "Write SVG plots");

  auto * sweep = app.add_subcommand("sweep", "Run every planner and speed and write summary.csv");
  add_common(*sweep, f);
  sweep->add_option("--planner", f.planner, "Restrict to one planner");
  sweep->add_option("--speed", f.speeds, "Speeds [m/s], comma separated or repeated")->delimiter(',');
  sweep->add_option("--seed", f.seed, "Random seed");
  sweep->add_option("--jobs", f.jobs, "Parallel runs")->check(CLI::PositiveNumber);

  std::string trace_path;
  std::string kind;
  auto * plot = app.add_subcommand("plot", "Render an SVG from a trace CSV");
  add_common(*plot, f);
  plot->add_option("trace", trace_path, "Trace CSV written by run")->required();
  plot->add_option("--kind", kind, "trajectory, steering, heading, lat_accel or potential_heatmap")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp & e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp & e) {
    return app.exit(e);
  } catch (const CLI::ParseError & e) {
    app.exit(e);
    return espp::cli::kConfigFailure;
  }
  if (!espp::cli::init_logging()) {
    return espp::cli::kConfigFailure;
  }
  if (*run) {
    return espp::cli::cmd_run(to_run_config(*run, f));
  }
  if (*sweep) {
    return espp::cli::cmd_sweep(to_run_config(*sweep, f));
  }
  return espp::cli::cmd_plot(trace_path, kind, to_run_config(*plot, f));
}
