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

#ifndef ESPP__EMERGENCY_TRIGGER_HPP_
#define ESPP__EMERGENCY_TRIGGER_HPP_

#include "espp/potential_field.hpp"
#include "espp/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

namespace espp::trigger
{
/// Local reference waypoints ahead of the ego vehicle.
struct WaypointChain
{
  std::vector<Vec2> points;
  double step_length{0.0};

  int count() const { return static_cast<int>(points.size()); }
};

/// Straight chain: point k = ego + k L (cos psi_ref, sin psi_ref), k = 1..n.
inline WaypointChain generate_waypoints(const VehicleState & ego, double psi_ref, double L, int n)
{
  if (n < 1 || !(L > 0.0)) {
    throw EsppError("waypoints: need n >= 1 and L > 0");
  }
  WaypointChain chain{{}, L};
  chain.points.reserve(static_cast<std::size_t>(n));
  const Vec2 dir(std::cos(psi_ref), std::sin(psi_ref));
  for (int k = 1; k <= n; ++k) {
    chain.points.push_back(ego.position() + static_cast<double>(k) * L * dir);
  }
  return chain;
}

/// Chain that follows the descent direction, re-evaluated at every point.
/// Stops early at a local minimum of the field.
inline WaypointChain descend_waypoints(const Vec2 & start, const pf::FieldContext & ctx, double L, int n)
{
  if (n < 1 || !(L > 0.0)) {
    throw EsppError("waypoints: need n >= 1 and L > 0");
  }
  WaypointChain chain{{}, L};
  Vec2 p = start;
  for (int k = 0; k < n; ++k) {
    const auto d = pf::descend_gradient(p, ctx);
    if (d.local_minimum) {
      break;
    }
    p += L * Vec2(std::cos(d.psi_ref), std::sin(d.psi_ref));
    chain.points.push_back(p);
  }
  return chain;
}

struct Intersection
{
  Vec2 p_int{0.0, 0.0};
  double d_e2r{0.0};
};

/// Ray from the ego position along psi_ref intersected with the lower road
/// edge. Absent when the ray does not descend toward it.
inline std::optional<Intersection> estimate_intersection(
  const VehicleState & ego, double psi_ref, const pf::RoadGeometry & road)
{
  const double s = std::sin(psi_ref);
  const double height = ego.y - road.lower_edge_y;
  if (!(s < 0.0) || height < 0.0) {
    return std::nullopt;
  }
  const double d = height / -s;
  Intersection r;
  r.d_e2r = d;
  r.p_int = ego.position() + d * Vec2(std::cos(psi_ref), s);
  r.p_int.y() = road.lower_edge_y;
  return r;
}

struct BrakingModel
{
  double reaction_time{0.5};     // [s]
  double max_decel{0.75 * 9.81};  // [m/s^2]

  void validate() const
  {
    if (!(reaction_time >= 0.0 && max_decel > 0.0)) {
      throw ConfigError("braking model: reaction time must be >= 0 and deceleration > 0");
    }
  }
};

inline double braking_distance(double speed, const BrakingModel & model)
{
  if (speed < 0.0) {
    throw EsppError("braking distance: negative speed");
  }
  return speed * model.reaction_time + speed * speed / (2.0 * model.max_decel);
}

struct TriggerDecision
{
  bool triggered{false};
  std::optional<Vec2> p_int;
  std::optional<double> d_e2r;
  double d_brake{0.0};
};

/// Blind-alley test. The chain must reach the lower edge (within
/// edge_reach_margin) and the edge must be closer than the braking distance.
/// The reach test uses the mean lateral position of the last settle_points
/// waypoints (1 means the last waypoint alone). The intersection uses the
/// heading of the first chain segment.
inline TriggerDecision evaluate_trigger(
  const WaypointChain & chain, const VehicleState & ego, const pf::RoadGeometry & road, const BrakingModel & model,
  double edge_reach_margin = 0.0, int settle_points = 1)
{
  if (chain.points.empty()) {
    throw EsppError("trigger: empty waypoint chain");
  }
  if (settle_points < 1) {
    throw EsppError("trigger: settle_points must be at least 1");
  }
  TriggerDecision out;
  out.d_brake = braking_distance(ego.v, model);
  const Vec2 first = chain.points.front() - ego.position();
  const double psi_ref = std::atan2(first.y(), first.x());
  if (const auto hit = estimate_intersection(ego, psi_ref, road)) {
    out.p_int = hit->p_int;
    out.d_e2r = hit->d_e2r;
  }
  const auto tail = std::min<std::size_t>(static_cast<std::size_t>(settle_points), chain.points.size());
  double reach_y = 0.0;
  for (auto it = chain.points.end() - static_cast<std::ptrdiff_t>(tail); it != chain.points.end(); ++it) {
    reach_y += it->y();
  }
  reach_y /= static_cast<double>(tail);
  const bool reaches_edge = reach_y <= road.lower_edge_y + edge_reach_margin;
  out.triggered = reaches_edge && out.d_e2r && *out.d_e2r < out.d_brake;
  return out;
}

/// Once a decision triggers it stays triggered for the rest of the run.
class TriggerLatch
{
public:
  const TriggerDecision & update(const TriggerDecision & d)
  {
    if (!latched_) {
      decision_ = d;
      latched_ = d.triggered;
    }
    return decision_;
  }
  bool latched() const { return latched_; }
  const TriggerDecision & decision() const { return decision_; }

private:
  bool latched_{false};
  TriggerDecision decision_;
};

}  // namespace espp::trigger

#endif  // ESPP__EMERGENCY_TRIGGER_HPP_
