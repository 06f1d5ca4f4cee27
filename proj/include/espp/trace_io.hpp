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

#ifndef ESPP__TRACE_IO_HPP_
#define ESPP__TRACE_IO_HPP_

#include "espp/simulator.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace espp::io
{
inline constexpr std::string_view kTraceHeader = "t,x,y,v,beta,psi,psi_dot,delta_f,mode,u_total";
inline constexpr std::string_view kObstacleHeader = "t,x,y,psi,v,a_long,a_lat,phase";

/// Seventeen significant digits, enough to read back the same double.
inline std::string format_double(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail
{
inline std::vector<std::string_view> split_fields(std::string_view line)
{
  std::vector<std::string_view> out;
  for (std::size_t begin = 0;;) {
    const auto comma = line.find(',', begin);
    out.push_back(line.substr(begin, comma == std::string_view::npos ? std::string_view::npos : comma - begin));
    if (comma == std::string_view::npos) {
      return out;
    }
    begin = comma + 1;
  }
}

inline double parse_double(std::string_view field, std::size_t line)
{
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw EsppError("trace line " + std::to_string(line) + ": bad number '" + std::string(field) + "'");
  }
  return v;
}

inline std::vector<std::vector<std::string_view>> read_rows(
  std::istream & in, std::string_view header, std::vector<std::string> & storage)
{
  std::string line;
  if (!std::getline(in, line) || line != header) {
    throw EsppError("trace: expected header '" + std::string(header) + "'");
  }
  while (std::getline(in, line)) {
    if (!line.empty()) {
      storage.push_back(line);
    }
  }
  const std::size_t columns = split_fields(header).size();
  std::vector<std::vector<std::string_view>> rows;
  rows.reserve(storage.size());
  for (std::size_t i = 0; i < storage.size(); ++i) {
    rows.push_back(split_fields(storage[i]));
    if (rows.back().size() != columns) {
      throw EsppError("trace line " + std::to_string(i + 2) + ": expected " + std::to_string(columns) + " fields");
    }
  }
  return rows;
}
}  // namespace detail

inline void write_trace_csv(std::ostream & out, const sim::Trace & trace)
{
  out << kTraceHeader << '\n';
  for (const auto & s : trace.steps) {
    const auto & e = s.ego;
    for (double v : {s.t, e.x, e.y, e.v, e.beta, e.psi, e.psi_dot, s.delta_f}) {
      out << format_double(v) << ',';
    }
    out << sim::to_string(s.mode) << ',' << format_double(s.u_total) << '\n';
  }
}

inline void write_obstacle_csv(std::ostream & out, const sim::Trace & trace)
{
  out << kObstacleHeader << '\n';
  for (const auto & s : trace.steps) {
    const auto & o = s.obstacle;
    for (double v : {s.t, o.x, o.y, o.psi, o.v, o.a_long, o.a_lat}) {
      out << format_double(v) << ',';
    }
    out << static_cast<int>(s.obstacle_phase) << '\n';
  }
}

/// Rebuilds a trace from the ego CSV and, when given, the obstacle CSV.
/// Both files must list the same time stamps.
inline sim::Trace read_trace(std::istream & ego_csv, std::istream * obstacle_csv, const sim::Scenario & scenario)
{
  sim::Trace trace;
  trace.scenario = scenario;
  std::vector<std::string> ego_lines;
  const auto rows = detail::read_rows(ego_csv, kTraceHeader, ego_lines);
  trace.steps.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto & r = rows[i];
    const std::size_t line = i + 2;
    auto & s = trace.steps[i];
    s.t = detail::parse_double(r[0], line);
    s.ego.x = detail::parse_double(r[1], line);
    s.ego.y = detail::parse_double(r[2], line);
    s.ego.v = detail::parse_double(r[3], line);
    s.ego.beta = detail::parse_double(r[4], line);
    s.ego.psi = detail::parse_double(r[5], line);
    s.ego.psi_dot = detail::parse_double(r[6], line);
    s.delta_f = detail::parse_double(r[7], line);
    if (r[8] == sim::to_string(sim::RunMode::Normal)) {
      s.mode = sim::RunMode::Normal;
    } else if (r[8] == sim::to_string(sim::RunMode::Emergency)) {
      s.mode = sim::RunMode::Emergency;
    } else {
      throw EsppError("trace line " + std::to_string(line) + ": unknown mode '" + std::string(r[8]) + "'");
    }
    s.u_total = detail::parse_double(r[9], line);
  }
  if (obstacle_csv == nullptr) {
    return trace;
  }
  std::vector<std::string> obstacle_lines;
  const auto orows = detail::read_rows(*obstacle_csv, kObstacleHeader, obstacle_lines);
  if (orows.size() != rows.size()) {
    throw EsppError("trace: obstacle rows do not match ego rows");
  }
  for (std::size_t i = 0; i < orows.size(); ++i) {
    const auto & r = orows[i];
    const std::size_t line = i + 2;
    auto & s = trace.steps[i];
    if (detail::parse_double(r[0], line) != s.t) {
      throw EsppError("trace line " + std::to_string(line) + ": obstacle time stamp differs");
    }
    s.obstacle.x = detail::parse_double(r[1], line);
    s.obstacle.y = detail::parse_double(r[2], line);
    s.obstacle.psi = detail::parse_double(r[3], line);
    s.obstacle.v = detail::parse_double(r[4], line);
    s.obstacle.a_long = detail::parse_double(r[5], line);
    s.obstacle.a_lat = detail::parse_double(r[6], line);
    const double phase = detail::parse_double(r[7], line);
    if (!(phase >= 0.0 && phase <= static_cast<double>(sim::ObstaclePhase::Settled)) || phase != std::floor(phase)) {
      throw EsppError("trace line " + std::to_string(line) + ": bad obstacle phase");
    }
    s.obstacle_phase = static_cast<sim::ObstaclePhase>(static_cast<int>(phase));
  }
  return trace;
}

inline nlohmann::json metrics_json(const sim::Metrics & m, const sim::Scenario & sc)
{
  return {
    {"ac", m.ac},
    {"rt_s", m.rt},
    {"ca", m.ca},
    {"ss", m.ss},
    {"max_steer_rad", m.max_steer},
    {"max_lat_accel_mps2", m.max_lat_accel},
    {"stop_x_m", m.stop_position.x()},
    {"stop_y_m", m.stop_position.y()},
    {"planner", sim::to_string(sc.planner)},
    {"speed_mps", sc.speed},
    {"seed", sc.seed},
  };
}

}  // namespace espp::io

#endif  // ESPP__TRACE_IO_HPP_
