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

#ifndef ESPP__SIMULATOR_HPP_
#define ESPP__SIMULATOR_HPP_

#include "espp/clothoid.hpp"
#include "espp/emergency_trigger.hpp"
#include "espp/espp_planner.hpp"
#include "espp/mpc_controller.hpp"
#include "espp/potential_field.hpp"
#include "espp/types.hpp"
#include "espp/vehicle_model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace espp::sim
{
/// Raised when a state or command becomes non-finite.
class NumericalError : public EsppError
{
public:
  NumericalError(const std::string & what, std::size_t step)
  : EsppError(what + " at step " + std::to_string(step)), step_(step)
  {
  }
  std::size_t step() const { return step_; }

private:
  std::size_t step_;
};

enum class Planner { CpfCs, ApfFb, ApfNoLr, Espp };

inline constexpr std::array<Planner, 4> kAllPlanners{Planner::CpfCs, Planner::ApfFb, Planner::ApfNoLr, Planner::Espp};

inline const char * to_string(Planner p)
{
  switch (p) {
    case Planner::CpfCs:
      return "cpf-cs";
    case Planner::ApfFb:
      return "apf-fb";
    case Planner::ApfNoLr:
      return "apf-nolr";
    case Planner::Espp:
      return "espp";
  }
  return "?";
}

inline std::optional<Planner> parse_planner(std::string_view name)
{
  for (Planner p : kAllPlanners) {
    if (name == to_string(p)) {
      return p;
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------- geometry

struct OrientedRect
{
  Vec2 center{0.0, 0.0};
  double heading{0.0};
  double length{0.0};
  double width{0.0};

  std::vector<Vec2> corners() const
  {
    const Vec2 u(std::cos(heading), std::sin(heading));
    const Vec2 n(-u.y(), u.x());
    const Vec2 a = 0.5 * length * u;
    const Vec2 b = 0.5 * width * n;
    return {center + a + b, center - a + b, center - a - b, center + a - b};
  }
};

/// Separating-axis test for two convex polygons given in order.
inline bool convex_overlap(const std::vector<Vec2> & p, const std::vector<Vec2> & q)
{
  const auto separated_along_edges = [](const std::vector<Vec2> & a, const std::vector<Vec2> & b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      const Vec2 e = a[(i + 1) % a.size()] - a[i];
      const Vec2 axis(-e.y(), e.x());
      if (axis.squaredNorm() == 0.0) {
        continue;
      }
      double amin = std::numeric_limits<double>::infinity();
      double amax = -amin;
      double bmin = amin;
      double bmax = -amin;
      for (const auto & v : a) {
        amin = std::min(amin, axis.dot(v));
        amax = std::max(amax, axis.dot(v));
      }
      for (const auto & v : b) {
        bmin = std::min(bmin, axis.dot(v));
        bmax = std::max(bmax, axis.dot(v));
      }
      if (amax < bmin || bmax < amin) {
        return true;
      }
    }
    return false;
  };
  return !separated_along_edges(p, q) && !separated_along_edges(q, p);
}

inline bool detect_collision(const OrientedRect & a, const OrientedRect & b)
{
  return convex_overlap(a.corners(), b.corners());
}

/// Convex polygon containing the sector: apex plus a circumscribed arc.
inline std::vector<Vec2> sector_polygon(const planner::MotionSector & s, int segments = 32)
{
  std::vector<Vec2> poly{s.apex};
  if (s.radius <= 0.0) {
    return poly;
  }
  const int n = std::max(segments, 1);
  const double dtheta = 2.0 * s.half_angle / n;
  const double r = s.radius / std::cos(0.5 * dtheta);
  poly.push_back(s.apex + s.radius * Vec2(std::cos(s.heading - s.half_angle), std::sin(s.heading - s.half_angle)));
  for (int i = 0; i < n; ++i) {
    const double a = s.heading - s.half_angle + (i + 0.5) * dtheta;
    poly.push_back(s.apex + r * Vec2(std::cos(a), std::sin(a)));
  }
  poly.push_back(s.apex + s.radius * Vec2(std::cos(s.heading + s.half_angle), std::sin(s.heading + s.half_angle)));
  return poly;
}

inline bool footprint_overlaps_sector(const OrientedRect & r, const planner::MotionSector & s)
{
  const auto poly = sector_polygon(s);
  if (poly.size() == 1) {
    const auto c = r.corners();
    return convex_overlap(c, {poly[0], poly[0] + Vec2(1e-12, 0.0), poly[0] + Vec2(0.0, 1e-12)});
  }
  return convex_overlap(r.corners(), poly);
}

// ---------------------------------------------------------------- obstacle

enum class ObstaclePhase { Cruise = 0, SteerIn = 1, Hold = 2, SteerOut = 3, Settled = 4 };

/// Scripted cut-in: cruise in the adjacent lane, turn toward the ego lane at
/// a constant yaw rate once the gap is reached, hold the heading, turn back
/// so the lateral motion ends at final_y, and brake fully after brake_delay.
struct ObstacleScript
{
  double speed_offset{2.0};    // obstacle speed minus ego speed [m/s]
  double start_gap{7.4};       // initial x distance, CG to CG [m]
  double cut_in_gap{9.4};      // x distance that starts the cut-in [m]
  double lane_y{6.0};          // initial lateral position [m]
  double final_y{2.3};         // lateral position after the cut-in [m]
  double yaw_rate{0.4};        // [rad/s]
  double max_heading{0.2};     // [rad]
  double brake_delay{0.5};     // cut-in start to full braking [s]
  double decel{0.75 * 9.81};   // [m/s^2]
  double gap_jitter{0.0};      // seeded uniform perturbation of start_gap [m]

  void validate() const
  {
    if (!(yaw_rate > 0.0 && max_heading > 0.0 && decel > 0.0 && brake_delay >= 0.0 && gap_jitter >= 0.0)) {
      throw ConfigError("obstacle script: yaw_rate, max_heading, decel must be positive");
    }
    if (!(final_y < lane_y)) {
      throw ConfigError("obstacle script: final_y must be below lane_y");
    }
  }
};

struct ObstacleSim
{
  ObstacleState state;
  ObstaclePhase phase{ObstaclePhase::Cruise};
  double cut_in_time{std::numeric_limits<double>::quiet_NaN()};
};

inline ObstacleSim obstacle_step(const ObstacleSim & o, const ObstacleScript & sc, double t, double t_s, double ego_x)
{
  ObstacleSim n = o;
  ObstacleState & s = n.state;
  if (n.phase == ObstaclePhase::Cruise && s.x - ego_x >= sc.cut_in_gap) {
    n.phase = ObstaclePhase::SteerIn;
    n.cut_in_time = t;
  }
  double psi_dot = 0.0;
  switch (n.phase) {
    case ObstaclePhase::Cruise:
    case ObstaclePhase::Settled:
      break;
    case ObstaclePhase::SteerIn:
      psi_dot = -sc.yaw_rate;
      if (s.psi - sc.yaw_rate * t_s <= -sc.max_heading) {
        psi_dot = (-sc.max_heading - s.psi) / t_s;
        n.phase = ObstaclePhase::Hold;
      }
      break;
    case ObstaclePhase::Hold: {
      // Lateral travel of a linear heading ramp back to zero.
      const double ramp = std::abs(s.psi) / sc.yaw_rate;
      const double drop = s.v * ramp * (1.0 - std::cos(s.psi)) / std::max(std::abs(s.psi), 1e-9);
      if (s.y - drop <= sc.final_y) {
        n.phase = ObstaclePhase::SteerOut;
      }
      break;
    }
    case ObstaclePhase::SteerOut:
      psi_dot = sc.yaw_rate;
      if (s.psi + sc.yaw_rate * t_s >= 0.0) {
        psi_dot = -s.psi / t_s;
        n.phase = ObstaclePhase::Settled;
      }
      break;
  }
  const bool braking = !std::isnan(n.cut_in_time) && t - n.cut_in_time >= sc.brake_delay - 1e-12;
  s.a_long = braking && s.v > 0.0 ? -sc.decel : 0.0;
  s.a_lat = s.v * psi_dot;
  s.x += t_s * s.v * std::cos(s.psi);
  s.y += t_s * s.v * std::sin(s.psi);
  s.psi += t_s * psi_dot;
  if (braking) {
    s.v = std::max(0.0, s.v - sc.decel * t_s);
  }
  return n;
}

// ---------------------------------------------------------------- scenario

struct Scenario
{
  Planner planner{Planner::Espp};
  double speed{30.0};          // initial ego speed [m/s]
  double duration{15.0};       // [s]
  double t_s{0.01};            // [s]
  std::uint64_t seed{0};
  bool with_obstacle{true};
  double lane_center{2.0};     // ego lane centre [m]
  bool balance_lane{true};     // lane amplitude that makes lane_center an equilibrium
  int chain_points{20};        // waypoints per APF chain
  double target_distance{50.0};  // target point ahead of the ego [m]
  double connect_time{1.5};    // connecting-path lookahead [s]
  double escape_connect_time{2.4};  // lookahead while tracking a planned escape curve [s]
  double connect_min{5.0};     // [m]
  double path_alignment{0.5};  // start heading of the connecting path, 0 = ego, 1 = path
  double escape_path_alignment{0.0};  // same, while tracking a planned escape curve
  double stop_speed{0.1};      // [m/s]
  double edge_reach_margin{1.7};  // chain end this close to the lower edge counts as reaching it [m]
  int settle_points{10};       // trailing waypoints averaged for the reach test
  pf::RoadGeometry road{};
  pf::ApfConfig apf{};
  planner::EsppConfig espp{};
  vehicle::VehicleParams vehicle{.min_lateral_speed = 1.0};
  mpc::MpcConfig mpc{};
  trigger::BrakingModel braking{};
  ObstacleScript obstacle{};

  void validate() const
  {
    if (!(speed >= 0.0 && duration > 0.0 && t_s > 0.0 && stop_speed > 0.0)) {
      throw ConfigError("scenario: speed >= 0, duration > 0, t_s > 0, stop_speed > 0 required");
    }
    if (!(edge_reach_margin >= 0.0)) {
      throw ConfigError("scenario: edge_reach_margin must be nonnegative");
    }
    if (chain_points < 1 || settle_points < 1 || !(connect_min > 0.0 && connect_time >= 0.0 && path_alignment >= 0.0 && path_alignment <= 1.0 && escape_path_alignment >= 0.0 && escape_path_alignment <= 1.0 && escape_connect_time >= 0.0 && target_distance > 0.0)) {
      throw ConfigError("scenario: invalid chain or lookahead settings");
    }
    if (std::abs(mpc.t_s - t_s) > 1e-15) {
      throw ConfigError("scenario: controller and simulation sample times differ");
    }
    road.validate();
    apf.validate();
    espp.validate(vehicle.l_w);
    vehicle.validate();
    mpc.validate();
    braking.validate();
    obstacle.validate();
  }
};

enum class RunMode { Normal = 0, Emergency = 1 };

inline const char * to_string(RunMode m)
{
  return m == RunMode::Normal ? "normal" : "emergency";
}

struct StepRecord
{
  double t{0.0};
  VehicleState ego;
  ObstacleState obstacle;
  ObstaclePhase obstacle_phase{ObstaclePhase::Cruise};
  double delta_f{0.0};
  RunMode mode{RunMode::Normal};
  bool braking{false};
  double u_total{0.0};
};

struct Trace
{
  Scenario scenario;
  std::vector<StepRecord> steps;
  std::optional<double> trigger_time;
  std::optional<planner::EsppPlan> plan;
  std::string note;  // fallback or termination reason
};

inline OrientedRect ego_footprint(const VehicleState & s, const vehicle::VehicleParams & p)
{
  return {s.position(), s.psi, p.length, p.l_w};
}

inline OrientedRect obstacle_footprint(const ObstacleState & s, const vehicle::VehicleParams & p)
{
  return {s.position(), s.psi, p.length, p.l_w};
}

namespace detail
{
inline void require_finite(const VehicleState & s, double u, std::size_t k)
{
  const bool ok = std::isfinite(s.x) && std::isfinite(s.y) && std::isfinite(s.beta) && std::isfinite(s.psi) &&
                  std::isfinite(s.psi_dot) && std::isfinite(s.v) && std::isfinite(u);
  if (!ok) {
    throw NumericalError("non-finite ego state or command", k);
  }
}

/// Road-parallel line at the lateral equilibrium the chain settles on: the
/// mean of its second half, which averages the fixed-step zigzag.
inline mpc::CurvePath chain_path(const VehicleState & ego, const trigger::WaypointChain & chain)
{
  double y = ego.y;
  if (chain.count() > 0) {
    const std::size_t half = chain.points.size() / 2;
    double sum = 0.0;
    for (std::size_t i = half; i < chain.points.size(); ++i) {
      sum += chain.points[i].y();
    }
    y = sum / static_cast<double>(chain.points.size() - half);
  }
  return {Pose2{ego.x, y, 0.0}, {}};
}
}  // namespace detail

/// Normal-mode field seen by the planner with the ego at `ego` and the
/// obstacle at `obstacle`. The constant-speed variant ignores the obstacle's
/// accelerations.
inline pf::FieldContext normal_field(const Scenario & sc, const VehicleState & ego, const ObstacleState & obstacle)
{
  pf::FieldContext ctx;
  ctx.road = sc.road;
  ctx.cfg = sc.apf;
  if (sc.balance_lane) {
    ctx.cfg.a_lane = pf::balanced_lane_amplitude(sc.road, sc.apf, sc.lane_center);
  }
  ctx.target = pf::TargetPoint{ego.x + sc.target_distance, sc.lane_center};
  if (sc.with_obstacle) {
    ObstacleState seen = obstacle;
    if (sc.planner == Planner::CpfCs) {
      seen.a_long = 0.0;
      seen.a_lat = 0.0;
    }
    ctx.obstacles.push_back(pf::obstacle_params(seen, ctx.cfg));
  }
  return ctx;
}

/// Closed-loop simulation of the cut-in scenario for one planner variant.
inline Trace run(const Scenario & sc)
{
  sc.validate();
  Trace trace;
  trace.scenario = sc;
  const auto & vp = sc.vehicle;
  std::mt19937_64 rng(sc.seed);
  std::uniform_real_distribution<double> jitter(-sc.obstacle.gap_jitter, sc.obstacle.gap_jitter);
  const double gap0 = sc.obstacle.start_gap + (sc.obstacle.gap_jitter > 0.0 ? jitter(rng) : 0.0);

  VehicleState ego;
  ego.y = sc.lane_center;
  ego.v = sc.speed;
  ObstacleSim obs;
  obs.state.x = gap0;
  obs.state.y = sc.obstacle.lane_y;
  obs.state.v = sc.speed + sc.obstacle.speed_offset;

  mpc::MpcController controller(sc.mpc, vp);
  trigger::TriggerLatch latch;
  RunMode mode = RunMode::Normal;
  std::optional<double> brake_time;
  bool lower_edge_active = true;
  std::optional<mpc::CurvePath> escape_path;
  const bool uses_trigger = sc.planner != Planner::CpfCs;

  const auto steps = static_cast<std::size_t>(std::llround(sc.duration / sc.t_s));
  trace.steps.reserve(steps + 1);
  for (std::size_t k = 0;; ++k) {
    const double t = static_cast<double>(k) * sc.t_s;
    const bool braking = brake_time && t >= *brake_time - 1e-12;

    pf::FieldContext ctx = normal_field(sc, ego, obs.state);
    ctx.lower_edge_active = lower_edge_active;

    StepRecord rec;
    rec.t = t;
    rec.ego = ego;
    rec.obstacle = obs.state;
    rec.obstacle_phase = obs.phase;
    rec.braking = braking;

    const double spacing = std::max(ego.v * sc.t_s, 1e-3);
    mpc::CurvePath path;
    if (mode == RunMode::Emergency && escape_path) {
      path = *escape_path;
    } else {
      const auto chain = trigger::descend_waypoints(ego.position(), ctx, spacing, sc.chain_points);
      if (uses_trigger && !latch.latched() && chain.count() > 0) {
        const auto d = latch.update(trigger::evaluate_trigger(chain, ego, sc.road, sc.braking, sc.edge_reach_margin, sc.settle_points));
        if (d.triggered) {
          trace.trigger_time = t;
          brake_time = t + sc.braking.reaction_time;
          if (sc.planner == Planner::Espp) {
            planner::PlanInput in{ego, obs.state, sc.road, d.d_brake, vp.l_w, sc.mpc.n_p, sc.t_s};
            auto plan = planner::plan_espp(in, sc.espp);
            if (plan.feasible) {
              mode = RunMode::Emergency;
              escape_path = mpc::CurvePath{plan.frame, plan.curve, plan.r_stop};
            } else {
              trace.note = plan.fallback_reason;
            }
            trace.plan = std::move(plan);
          } else if (sc.planner == Planner::ApfNoLr) {
            mode = RunMode::Emergency;
            lower_edge_active = false;
          } else {
            mode = RunMode::Emergency;
          }
        }
      }
      path = detail::chain_path(ego, chain);
      if (escape_path) {
        path = *escape_path;
      }
    }

    if (escape_path && trace.plan) {
      const Vec2 target = planner::temporary_target(*trace.plan, ego.position(), ego.v, sc.espp);
      const auto plan = &*trace.plan;
      const auto cfg = sc.espp;
      ctx.mode = pf::Mode::Emergency;
      ctx.emergency_terms = [plan, target, cfg](const Vec2 & p) { return planner::espp_potential(*plan, p, target, cfg); };
    }
    rec.mode = mode;
    rec.u_total = pf::total_potential(ego.position(), ctx);

    const double horizon = escape_path ? sc.escape_connect_time : sc.connect_time;
    const double lookahead = std::max(sc.connect_min, horizon * ego.v);
    const auto local = mpc::connecting_path(ego, path, lookahead, escape_path ? sc.escape_path_alignment : sc.path_alignment);
    const auto ref = mpc::build_reference(local, ego, sc.mpc.n_p, sc.t_s);
    const bool wide = mode == RunMode::Emergency && sc.planner != Planner::ApfFb;
    const auto bounds = mpc::OutputBounds::for_road(sc.road, sc.mpc, wide);
    const auto cmd = controller.compute(ego, ref, bounds);
    rec.delta_f = cmd.delta_f;
    detail::require_finite(ego, cmd.delta_f, k);
    trace.steps.push_back(rec);

    if (sc.with_obstacle && detect_collision(ego_footprint(ego, vp), obstacle_footprint(obs.state, vp))) {
      trace.note = "collision";
      break;
    }
    if (braking && ego.v < sc.stop_speed) {
      trace.note = trace.note.empty() ? "stopped" : trace.note;
      break;
    }
    if (k >= steps) {
      break;
    }
    const double ego_x = ego.x;
    const std::optional<double> decel = braking ? std::optional<double>(sc.braking.max_decel) : std::nullopt;
    ego = vehicle::step(ego, cmd.delta_f, vp, sc.t_s, decel);
    if (sc.with_obstacle) {
      obs = obstacle_step(obs, sc.obstacle, t, sc.t_s, ego_x);
    }
  }
  return trace;
}

// ---------------------------------------------------------------- metrics

struct Metrics
{
  double ac{0.0};         // mean |curvature| of the driven path [1/m]
  double rt{0.0};         // cut-in to stop [s]
  bool ca{true};          // no collision
  bool ss{false};         // safe stop
  double max_steer{0.0};  // [rad]
  double max_lat_accel{0.0};  // [m/s^2]
  Vec2 stop_position{0.0, 0.0};
};

/// Menger curvature of three points; zero for degenerate triples.
inline double three_point_curvature(const Vec2 & a, const Vec2 & b, const Vec2 & c)
{
  const double ab = (b - a).norm();
  const double bc = (c - b).norm();
  const double ca = (a - c).norm();
  if (std::min({ab, bc, ca}) < 1e-6) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  const Vec2 u = b - a;
  const Vec2 v = c - a;
  const double cross = u.x() * v.y() - u.y() * v.x();
  return 2.0 * std::abs(cross) / (ab * bc * ca);
}

inline std::size_t cut_in_index(const std::vector<StepRecord> & steps)
{
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (steps[i].obstacle_phase != ObstaclePhase::Cruise) {
      return i;
    }
  }
  return 0;
}

/// a_y = v (beta_dot + psi_dot), with beta_dot differenced over the step.
inline double lateral_acceleration(const StepRecord & prev, const StepRecord & cur)
{
  const double dt = cur.t - prev.t;
  return cur.ego.v * ((cur.ego.beta - prev.ego.beta) / dt + cur.ego.psi_dot);
}

/// Metrics from the recorded steps alone, so a re-read trace reproduces them.
inline Metrics compute_metrics(const Trace & trace, int subsample = 5)
{
  Metrics m;
  const auto & steps = trace.steps;
  const auto & sc = trace.scenario;
  if (steps.empty()) {
    m.ca = true;
    return m;
  }
  const std::size_t start = cut_in_index(steps);
  const double t0 = steps[start].t;

  std::vector<Vec2> pts;
  for (std::size_t i = start; i < steps.size(); i += static_cast<std::size_t>(std::max(subsample, 1))) {
    pts.push_back(steps[i].ego.position());
  }
  double sum = 0.0;
  int count = 0;
  for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
    const double k = three_point_curvature(pts[i - 1], pts[i], pts[i + 1]);
    if (std::isfinite(k)) {
      sum += k;
      ++count;
    }
  }
  m.ac = count > 0 ? sum / count : 0.0;

  m.rt = steps.back().t - t0;
  for (std::size_t i = start; i < steps.size(); ++i) {
    if (steps[i].ego.v < sc.stop_speed) {
      m.rt = steps[i].t - t0;
      break;
    }
  }

  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto & s = steps[i];
    if (sc.with_obstacle && detect_collision(ego_footprint(s.ego, sc.vehicle), obstacle_footprint(s.obstacle, sc.vehicle))) {
      m.ca = false;
    }
    m.max_steer = std::max(m.max_steer, std::abs(s.delta_f));
    if (i > 0) {
      m.max_lat_accel = std::max(m.max_lat_accel, std::abs(lateral_acceleration(steps[i - 1], s)));
    }
  }

  const auto & last = steps.back();
  m.stop_position = last.ego.position();
  const bool stopped = last.ego.v < sc.stop_speed;
  bool off_lanes = true;
  for (const auto & c : ego_footprint(last.ego, sc.vehicle).corners()) {
    if (c.y() > sc.road.lower_edge_y && c.y() < sc.road.upper_edge_y) {
      off_lanes = false;
    }
  }
  const bool clear = !sc.with_obstacle ||
                     !detect_collision(ego_footprint(last.ego, sc.vehicle), obstacle_footprint(last.obstacle, sc.vehicle));
  m.ss = m.ca && stopped && off_lanes && clear;
  return m;
}

}  // namespace espp::sim

#endif  // ESPP__SIMULATOR_HPP_
