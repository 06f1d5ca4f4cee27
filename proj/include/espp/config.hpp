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

#ifndef ESPP__CONFIG_HPP_
#define ESPP__CONFIG_HPP_

#include "espp/simulator.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace espp
{
namespace pf
{
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(RoadGeometry, lower_edge_y, upper_edge_y, lane_divider_ys, esl_lower_y, lane_width)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(
  ApfConfig, a_lane, a_obs, zeta, eta, target_scale, w1, edge_clamp_distance, gradient_step, force_tolerance, sigma_s0,
  sigma_d0, k_s, k_d, headway_time)
}  // namespace pf

namespace clothoid
{
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(
  FitBounds, e_y_min, e_y_max, e_psi_min, e_psi_max, omega_max, upsilon, g, kappa_dot_max, r_min)
}  // namespace clothoid

namespace planner
{
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(
  EsppConfig, n_b2i, n_i2s, n_apf, p_num, a_e, b_w, xi, delta_psi_o_max, corridor_half_width, grid_resolution,
  stop_margin, min_entry_heading, endpoint_weight, descent_step, lookahead_time, min_lookahead, gradient_step, fit)
}  // namespace planner

namespace vehicle
{
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(VehicleParams, m, i_z, l_f, l_r, c_f, c_r, l_w, length, min_lateral_speed)
}  // namespace vehicle

namespace trigger
{
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(BrakingModel, reaction_time, max_decel)
}  // namespace trigger

namespace mpc
{
inline void to_json(nlohmann::json & j, const MpcConfig & c)
{
  j = {{"n_p", c.n_p},       {"n_c", c.n_c},         {"t_s", c.t_s},       {"q", {c.q(0), c.q(1), c.q(2)}},
       {"r", c.r},           {"lambda", c.lambda},   {"u_max", c.u_max},   {"du_max", c.du_max},
       {"psi_max", c.psi_max}, {"beta_max", c.beta_max}, {"psi_dot_max", c.psi_dot_max}, {"slack_max", c.slack_max}};
}

inline void from_json(const nlohmann::json & j, MpcConfig & c)
{
  const auto q = j.at("q").get<std::vector<double>>();
  if (q.size() != 3) {
    throw ConfigError("mpc.q: expected 3 weights");
  }
  c.q = {q[0], q[1], q[2]};
  j.at("n_p").get_to(c.n_p);
  j.at("n_c").get_to(c.n_c);
  j.at("t_s").get_to(c.t_s);
  j.at("r").get_to(c.r);
  j.at("lambda").get_to(c.lambda);
  j.at("u_max").get_to(c.u_max);
  j.at("du_max").get_to(c.du_max);
  j.at("psi_max").get_to(c.psi_max);
  j.at("beta_max").get_to(c.beta_max);
  j.at("psi_dot_max").get_to(c.psi_dot_max);
  j.at("slack_max").get_to(c.slack_max);
}
}  // namespace mpc

namespace sim
{
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(
  ObstacleScript, speed_offset, start_gap, cut_in_gap, lane_y, final_y, yaw_rate, max_heading, brake_delay, decel,
  gap_jitter)

inline void to_json(nlohmann::json & j, Planner p) { j = to_string(p); }

inline void from_json(const nlohmann::json & j, Planner & p)
{
  const auto name = j.get<std::string>();
  const auto parsed = parse_planner(name);
  if (!parsed) {
    throw ConfigError("unknown planner '" + name + "'");
  }
  p = *parsed;
}
}  // namespace sim

namespace config
{
using nlohmann::json;

/// Scenario as a JSON document with one section per module.
inline json scenario_to_json(const sim::Scenario & sc)
{
  json s = {
    {"planner", sc.planner},
    {"speed", sc.speed},
    {"duration", sc.duration},
    {"t_s", sc.t_s},
    {"seed", sc.seed},
    {"with_obstacle", sc.with_obstacle},
    {"lane_center", sc.lane_center},
    {"balance_lane", sc.balance_lane},
    {"chain_points", sc.chain_points},
    {"target_distance", sc.target_distance},
    {"connect_time", sc.connect_time},
    {"escape_connect_time", sc.escape_connect_time},
    {"connect_min", sc.connect_min},
    {"path_alignment", sc.path_alignment},
    {"escape_path_alignment", sc.escape_path_alignment},
    {"stop_speed", sc.stop_speed},
    {"edge_reach_margin", sc.edge_reach_margin},
    {"settle_points", sc.settle_points},
    {"road", sc.road},
    {"braking", sc.braking},
    {"obstacle", sc.obstacle},
  };
  return {{"scenario", s}, {"apf", sc.apf}, {"espp", sc.espp}, {"vehicle", sc.vehicle}, {"mpc", sc.mpc}};
}

/// Inverse of scenario_to_json. Every field must be present.
inline sim::Scenario scenario_from_json(const json & j)
{
  sim::Scenario sc;
  try {
    const json & s = j.at("scenario");
    s.at("planner").get_to(sc.planner);
    s.at("speed").get_to(sc.speed);
    s.at("duration").get_to(sc.duration);
    s.at("t_s").get_to(sc.t_s);
    s.at("seed").get_to(sc.seed);
    s.at("with_obstacle").get_to(sc.with_obstacle);
    s.at("lane_center").get_to(sc.lane_center);
    s.at("balance_lane").get_to(sc.balance_lane);
    s.at("chain_points").get_to(sc.chain_points);
    s.at("target_distance").get_to(sc.target_distance);
    s.at("connect_time").get_to(sc.connect_time);
    s.at("escape_connect_time").get_to(sc.escape_connect_time);
    s.at("connect_min").get_to(sc.connect_min);
    s.at("path_alignment").get_to(sc.path_alignment);
    s.at("escape_path_alignment").get_to(sc.escape_path_alignment);
    s.at("stop_speed").get_to(sc.stop_speed);
    s.at("edge_reach_margin").get_to(sc.edge_reach_margin);
    s.at("settle_points").get_to(sc.settle_points);
    s.at("road").get_to(sc.road);
    s.at("braking").get_to(sc.braking);
    s.at("obstacle").get_to(sc.obstacle);
    j.at("apf").get_to(sc.apf);
    j.at("espp").get_to(sc.espp);
    j.at("vehicle").get_to(sc.vehicle);
    j.at("mpc").get_to(sc.mpc);
  } catch (const json::exception & e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return sc;
}

namespace detail
{
inline std::string join_key(const std::string & prefix, const std::string & key)
{
  return prefix.empty() ? key : prefix + "." + key;
}

inline bool same_kind(const json & given, const json & reference)
{
  if (reference.is_number_unsigned()) {
    return given.is_number_unsigned() || (given.is_number_integer() && given.get<std::int64_t>() >= 0);
  }
  if (reference.is_number_integer()) {
    return given.is_number_integer() || given.is_number_unsigned();
  }
  if (reference.is_number()) {
    return given.is_number();
  }
  return given.type() == reference.type();
}
}  // namespace detail

/// Rejects keys absent from `reference` and values of the wrong kind, naming
/// the offending field by its dotted path.
inline void check_shape(const json & given, const json & reference, const std::string & path = "")
{
  if (!detail::same_kind(given, reference)) {
    throw ConfigError("config field '" + path + "' expects " + std::string(reference.type_name()) + ", got " +
                      given.dump());
  }
  if (reference.is_object()) {
    for (const auto & [key, value] : given.items()) {
      const std::string field = detail::join_key(path, key);
      if (!reference.contains(key)) {
        throw ConfigError("unknown config field '" + field + "'");
      }
      check_shape(value, reference.at(key), field);
    }
  } else if (reference.is_array() && !reference.empty()) {
    for (std::size_t i = 0; i < given.size(); ++i) {
      check_shape(given.at(i), reference.at(0), path + "[" + std::to_string(i) + "]");
    }
  }
}

/// Applies `dotted.key=value` to `doc`. The value is read as JSON when it
/// parses and as a plain string otherwise.
inline void apply_override(json & doc, std::string_view assignment)
{
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) {
    value = text;
  }
  std::vector<std::string> parts;
  for (std::size_t begin = 0;;) {
    const auto dot = key.find('.', begin);
    parts.push_back(key.substr(begin, dot == std::string::npos ? std::string::npos : dot - begin));
    if (parts.back().empty()) {
      throw ConfigError("override key '" + key + "' has an empty component");
    }
    if (dot == std::string::npos) {
      break;
    }
    begin = dot + 1;
  }
  json patch = value;
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
    patch = json{{*it, patch}};
  }
  check_shape(patch, doc);
  doc.merge_patch(patch);
}

inline json read_json_file(const std::filesystem::path & path)
{
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file '" + path.string() + "'");
  }
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) {
    throw ConfigError("config file '" + path.string() + "' is not valid JSON");
  }
  return doc;
}

/// Defaults, then the file, then the overrides in order.
inline json resolve_document(
  const std::optional<std::filesystem::path> & file, const std::vector<std::string> & overrides)
{
  json doc = scenario_to_json(sim::Scenario{});
  if (file) {
    const json given = read_json_file(*file);
    check_shape(given, doc);
    doc.merge_patch(given);
  }
  for (const auto & o : overrides) {
    apply_override(doc, o);
  }
  return doc;
}

/// Resolved and validated scenario.
inline sim::Scenario load_scenario(
  const std::optional<std::filesystem::path> & file, const std::vector<std::string> & overrides)
{
  sim::Scenario sc = scenario_from_json(resolve_document(file, overrides));
  sc.validate();
  return sc;
}

}  // namespace config
}  // namespace espp

#endif  // ESPP__CONFIG_HPP_
