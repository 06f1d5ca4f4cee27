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

#ifndef ESPP__ESPP_PLANNER_HPP_
#define ESPP__ESPP_PLANNER_HPP_

#include "espp/clothoid.hpp"
#include "espp/potential_field.hpp"
#include "espp/types.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace espp::planner
{
struct EsppConfig
{
  int n_b2i{5};                     // interpolated points on breach -> intersection
  int n_i2s{5};                     // interpolated points on intersection -> stop
  int n_apf{5};                     // entry points between ego and breach point
  int p_num{50};                    // new waypoints produced by descent
  double a_e{10.0};                 // corridor potential amplitude
  double b_w{0.5};                  // corridor potential width parameter [1/m]
  double xi{0.2};                   // attractive influence factor
  double delta_psi_o_max{0.2};      // obstacle heading-change bound [rad]
  double corridor_half_width{0.8};  // offset of the corridor boundaries [m]
  double grid_resolution{0.25};     // stop-point search grid [m]
  double stop_margin{0.5};          // extra clearance above the restricted strip [m]
  double min_entry_heading{0.1};    // smallest entry angle toward the shoulder [rad]
  double endpoint_weight{10.0};     // fit weight of breach and stop points
  double descent_step{0.3};         // step length of the new-waypoint descent [m]
  double lookahead_time{0.5};       // temporary target lookahead [s]
  double min_lookahead{2.0};        // [m]
  double gradient_step{0.05};       // finite-difference step [m]
  clothoid::FitBounds fit{};

  void validate(double vehicle_width) const
  {
    if (n_b2i < 2 || n_i2s < 2 || n_apf < 0 || p_num < 1) {
      throw ConfigError("espp config: n_b2i and n_i2s must be >= 2, p_num >= 1");
    }
    if (!(a_e > 0.0 && b_w > 0.0 && xi > 0.0)) {
      throw ConfigError("espp config: a_e, b_w and xi must be positive");
    }
    if (!(corridor_half_width >= 0.5 * vehicle_width)) {
      throw ConfigError("espp config: corridor_half_width must be at least half the vehicle width");
    }
    if (!(delta_psi_o_max >= 0.0 && grid_resolution > 0.0 && stop_margin >= 0.0 && min_entry_heading > 0.0 &&
          endpoint_weight > 0.0 && descent_step > 0.0 && lookahead_time >= 0.0 && min_lookahead > 0.0 &&
          gradient_step > 0.0)) {
      throw ConfigError("espp config: invalid step, margin or weight");
    }
    fit.validate();
  }
};

class NoFeasibleStopPoint : public EsppError
{
public:
  NoFeasibleStopPoint()
  : EsppError("no feasible stop point: fall back to straight-line braking in the current lane")
  {
  }
};

/// Circular sector of predicted obstacle positions.
struct MotionSector
{
  Vec2 apex{0.0, 0.0};
  double heading{0.0};
  double half_angle{0.0};
  double radius{0.0};

  double alpha() const { return 2.0 * half_angle; }
  double area() const { return 0.5 * alpha() * radius * radius; }

  bool contains(const Vec2 & p) const
  {
    const Vec2 d = p - apex;
    const double r = d.norm();
    if (r > radius) {
      return false;
    }
    if (r == 0.0) {
      return true;
    }
    return std::abs(wrap_angle(std::atan2(d.y(), d.x()) - heading)) <= half_angle;
  }

  /// Smallest and largest x covered by the sector.
  std::pair<double, double> x_extent() const
  {
    double lo = apex.x();
    double hi = apex.x();
    const auto include = [&](double ang) {
      const double x = apex.x() + radius * std::cos(ang);
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    };
    include(heading - half_angle);
    include(heading + half_angle);
    for (double axis : {0.0, std::numbers::pi}) {
      if (std::abs(wrap_angle(axis - heading)) <= half_angle) {
        include(axis);
      }
    }
    return {lo, hi};
  }
};

inline MotionSector predict_motion_sector(const ObstacleState & obstacle, int n_p, double t_s, const EsppConfig & cfg)
{
  if (obstacle.v < 0.0) {
    throw EsppError("motion sector: negative obstacle speed");
  }
  const double half = obstacle.delta_psi_max.value_or(cfg.delta_psi_o_max);
  if (half < 0.0) {
    throw EsppError("motion sector: negative heading-change bound");
  }
  return {obstacle.position(), obstacle.psi, half, static_cast<double>(n_p) * obstacle.v * t_s};
}

enum class Zone { S1, S2, S3, S4 };

inline const char * to_string(Zone z)
{
  switch (z) {
    case Zone::S1:
      return "S1";
    case Zone::S2:
      return "S2";
    case Zone::S3:
      return "S3";
    case Zone::S4:
      return "S4";
  }
  return "?";
}

/// Escape box split by the sector and its x-shadow:
///   S2 the sector itself, S4 the band before the shadow, S3 the band
///   under the sector, S1 everything past it.
struct EscapeRegion
{
  double x_min{0.0};
  double x_max{0.0};
  double y_min{0.0};
  double y_max{0.0};
  MotionSector sector;
  double shadow_lo{0.0};
  double shadow_hi{0.0};
  std::array<Vec2, 3> dividing_points{};

  Zone classify(const Vec2 & p) const
  {
    if (sector.contains(p)) {
      return Zone::S2;
    }
    if (p.x() > shadow_hi) {
      return Zone::S1;
    }
    if (p.x() < shadow_lo) {
      return Zone::S4;
    }
    return Zone::S3;
  }
};

/// Box ahead of the breach point spanning one braking distance, from the
/// lower road edge down to the restricted strip plus the stop margin.
inline EscapeRegion build_escape_region(
  const Vec2 & p_bp, double d_brake, const pf::RoadGeometry & road, double vehicle_width, const MotionSector & sector,
  const EsppConfig & cfg)
{
  if (!(d_brake >= 0.0)) {
    throw EsppError("escape region: braking distance must be nonnegative");
  }
  EscapeRegion r;
  r.x_min = p_bp.x();
  r.x_max = p_bp.x() + d_brake;
  r.y_max = std::min(road.lower_edge_y, p_bp.y());
  r.y_min = road.esl_lower_y + 0.5 * vehicle_width + cfg.stop_margin;
  if (r.y_min > r.y_max) {
    throw EsppError("escape region: shoulder too narrow for the vehicle");
  }
  r.sector = sector;
  std::tie(r.shadow_lo, r.shadow_hi) = sector.x_extent();
  r.dividing_points = {Vec2(r.shadow_lo, r.y_max), Vec2(r.shadow_hi, r.y_max), Vec2(r.shadow_hi, r.y_min)};
  return r;
}

struct EsppAnchors
{
  Vec2 p_bp{0.0, 0.0};
  Vec2 p_sp{0.0, 0.0};
  Vec2 p_ip{0.0, 0.0};
  double psi_espp{0.0};
  double l_espp{0.0};
};

/// Intersection of the entry ray from the breach point with the road-parallel
/// line through the stop point.
inline EsppAnchors build_anchors(const Vec2 & p_bp, const Vec2 & p_sp, double heading)
{
  if (!(p_sp.x() > p_bp.x())) {
    throw EsppError("anchors: stop point must lie ahead of the breach point");
  }
  const double s = std::sin(heading);
  if (std::abs(s) < 1e-9) {
    throw EsppError("anchors: entry heading is parallel to the road");
  }
  const double t = (p_sp.y() - p_bp.y()) / s;
  EsppAnchors a;
  a.p_bp = p_bp;
  a.p_sp = p_sp;
  a.p_ip = p_bp + t * Vec2(std::cos(heading), s);
  a.p_ip.y() = p_sp.y();
  a.psi_espp = std::atan2(p_sp.y() - p_bp.y(), p_sp.x() - p_bp.x());
  a.l_espp = (a.p_ip - p_bp).norm() + (p_sp - a.p_ip).norm();
  return a;
}

/// Polyline length breach -> intersection -> stop for a candidate, or
/// nullopt when the intersection does not lie between the two anchors.
inline std::optional<double> escape_length(const Vec2 & p_bp, const Vec2 & p_sp, double heading)
{
  const double s = std::sin(heading);
  if (std::abs(s) < 1e-9) {
    return std::nullopt;
  }
  const double t = (p_sp.y() - p_bp.y()) / s;
  if (t < 0.0) {
    return std::nullopt;
  }
  const double x_ip = p_bp.x() + t * std::cos(heading);
  if (x_ip < p_bp.x() - 1e-12 || x_ip > p_sp.x() + 1e-12) {
    return std::nullopt;
  }
  return t + (p_sp.x() - x_ip);
}

/// Grid search maximizing the Manhattan distance from the breach point.
/// With constraints active a candidate must lie in the heading window
/// heading < atan(dy/dx) < 0 and in S1 (path length >= d_brake) or S4
/// (path length < d_brake). Ties go to larger x, then larger |y - y_bp|.
inline Vec2 select_stop_point(
  const Vec2 & p_bp, double entry_heading, const EscapeRegion & region, double d_brake, double resolution,
  bool constraints_active)
{
  if (!(resolution > 0.0)) {
    throw EsppError("stop point: grid resolution must be positive");
  }
  constexpr double kMaxGridCells = 1e7;
  const double cells =
    (region.x_max - region.x_min) / resolution * (region.y_max - region.y_min) / resolution;
  if (!std::isfinite(region.x_min) || !std::isfinite(region.x_max) || !std::isfinite(region.y_min) ||
      !std::isfinite(region.y_max) || !(cells <= kMaxGridCells) ||
      region.x_min + resolution == region.x_min || region.y_max - resolution == region.y_max) {
    throw EsppError("stop point: search region is non-finite or too large for the grid");
  }
  std::vector<double> xs;
  for (int k = 1;; ++k) {
    const double x = region.x_min + static_cast<double>(k) * resolution;
    if (x >= region.x_max - 1e-9) {
      break;
    }
    xs.push_back(x);
  }
  if (region.x_max > region.x_min) {
    xs.push_back(region.x_max);
  }
  std::vector<double> ys;
  for (int k = 0;; ++k) {
    const double y = region.y_max - static_cast<double>(k) * resolution;
    if (y <= region.y_min + 1e-9) {
      break;
    }
    ys.push_back(y);
  }
  ys.push_back(region.y_min);

  std::optional<Vec2> best;
  double best_score = -std::numeric_limits<double>::infinity();
  const auto better = [&](const Vec2 & c, double score) {
    if (!best || score > best_score + 1e-12) {
      return true;
    }
    if (score < best_score - 1e-12) {
      return false;
    }
    if (c.x() != best->x()) {
      return c.x() > best->x();
    }
    return std::abs(c.y() - p_bp.y()) > std::abs(best->y() - p_bp.y());
  };
  for (double x : xs) {
    for (double y : ys) {
      const Vec2 c(x, y);
      if (constraints_active) {
        const double theta = std::atan((y - p_bp.y()) / (x - p_bp.x()));
        if (!(entry_heading < theta && theta < 0.0)) {
          continue;
        }
        const auto len = escape_length(p_bp, c, entry_heading);
        if (!len) {
          continue;
        }
        const Zone z = region.classify(c);
        const bool ok = (z == Zone::S1 && *len >= d_brake) || (z == Zone::S4 && *len < d_brake);
        if (!ok) {
          continue;
        }
      }
      const double score = std::abs(x - p_bp.x()) + std::abs(y - p_bp.y());
      if (better(c, score)) {
        best = c;
        best_score = score;
      }
    }
  }
  if (!best) {
    throw NoFeasibleStopPoint();
  }
  return *best;
}

struct HybridWaypoints
{
  std::vector<Vec2> points;  // world frame, in path order
  std::size_t breach_index{0};
  std::size_t stop_index{0};
};

/// [entry points, breach, n_b2i on breach->intersection, n_i2s on
/// intersection->stop, stop]. Throws when x is not strictly increasing in
/// the fitting frame.
inline HybridWaypoints assemble_hybrid_waypoints(
  const std::vector<Vec2> & apf_points, const EsppAnchors & anchors, const EsppConfig & cfg, const Pose2 & frame)
{
  HybridWaypoints h;
  h.points = apf_points;
  h.breach_index = h.points.size();
  h.points.push_back(anchors.p_bp);
  const auto interpolate = [&](const Vec2 & a, const Vec2 & b, int n) {
    for (int k = 1; k <= n; ++k) {
      const double t = static_cast<double>(k) / static_cast<double>(n + 1);
      h.points.push_back(a + t * (b - a));
    }
  };
  interpolate(anchors.p_bp, anchors.p_ip, cfg.n_b2i);
  interpolate(anchors.p_ip, anchors.p_sp, cfg.n_i2s);
  h.stop_index = h.points.size();
  h.points.push_back(anchors.p_sp);
  const auto local = clothoid::world_to_vehicle(h.points, frame);
  for (std::size_t i = 1; i < local.size(); ++i) {
    if (!(local[i].x() > local[i - 1].x())) {
      throw EsppError("hybrid waypoints: x is not strictly increasing in the fitting frame");
    }
  }
  return h;
}

enum class Side { Left, Right };

/// Corridor boundary term at a fitting-frame position. The boundary is the
/// fitted curve shifted along its normal by the corridor half width: down
/// for the right boundary, up for the left one.
inline double espp_boundary_potential(
  const Vec2 & pos, const clothoid::Coefficients & curve, Side side, const EsppConfig & cfg)
{
  const double x = pos.x();
  const double y = pos.y();
  const double slope = clothoid::slope(curve, x);
  const double stretch = std::sqrt(1.0 + slope * slope);
  const double shift = (side == Side::Right ? -1.0 : 1.0) * cfg.corridor_half_width * stretch;
  const double boundary = clothoid::eval(curve, x).value + shift;
  double dist = 0.0;
  if (std::abs(slope) < 1e-6) {
    dist = std::abs(y - boundary);
  } else {
    const double m = -1.0 / slope;
    const double b = boundary - m * x;
    const double dx = (y - b) / m - x;
    const double dy = boundary - y;
    dist = std::sqrt(dx * dx + dy * dy);
  }
  const double sgn = (y > boundary) - (y < boundary);
  const double rate = side == Side::Right ? -cfg.b_w : cfg.b_w;
  const double e = 1.0 - std::exp(rate * sgn * dist);
  return cfg.a_e * e * e;
}

inline double espp_attractive_potential(const Vec2 & pos, const Vec2 & target, double xi)
{
  return 0.5 * xi * (pos - target).squaredNorm();
}

struct EsppPlan
{
  bool feasible{false};
  std::string fallback_reason;
  Pose2 frame;
  clothoid::Coefficients curve;
  double r_stop{0.0};  // stop point parameter in the fitting frame
  double entry_heading{0.0};
  bool constraints_active{false};
  MotionSector sector;
  EscapeRegion region;
  EsppAnchors anchors;
  HybridWaypoints hybrid;
  Eigen::VectorXd weights;
  std::vector<Vec2> p_new;  // world frame
  std::vector<double> p_new_potential;
  Vec2 descent_target{0.0, 0.0};
};

inline Vec2 to_frame(const Vec2 & p, const Pose2 & f)
{
  return clothoid::world_to_vehicle({p}, f).front();
}

inline Vec2 curve_point_world(const EsppPlan & plan, double r)
{
  return clothoid::vehicle_to_world({Vec2(r, clothoid::eval(plan.curve, r).value)}, plan.frame).front();
}

/// Point on the curve a lookahead arc length ahead of the projection of
/// pos, clamped at the stop point.
inline Vec2 temporary_target(const EsppPlan & plan, const Vec2 & pos_world, double speed, const EsppConfig & cfg)
{
  const double lookahead = std::max(cfg.min_lookahead, speed * cfg.lookahead_time);
  double r = std::clamp(to_frame(pos_world, plan.frame).x(), 0.0, plan.r_stop);
  const double dr = 0.05;
  double arc = 0.0;
  while (arc < lookahead && r < plan.r_stop) {
    const double step = std::min(dr, plan.r_stop - r);
    const double s = clothoid::slope(plan.curve, r + 0.5 * step);
    arc += step * std::sqrt(1.0 + s * s);
    r += step;
  }
  return curve_point_world(plan, r);
}

/// Corridor plus attractive potential at a world position.
inline double espp_potential(const EsppPlan & plan, const Vec2 & pos_world, const Vec2 & target_world, const EsppConfig & cfg)
{
  const Vec2 p = to_frame(pos_world, plan.frame);
  return espp_boundary_potential(p, plan.curve, Side::Right, cfg) +
         espp_boundary_potential(p, plan.curve, Side::Left, cfg) +
         espp_attractive_potential(pos_world, target_world, cfg.xi);
}

struct PlanInput
{
  VehicleState ego;
  ObstacleState obstacle;
  pf::RoadGeometry road;
  double d_brake{0.0};
  double vehicle_width{1.6};
  int n_p{20};
  double t_s{0.01};
};

namespace detail
{
inline EsppPlan straight_plan(const PlanInput & in)
{
  EsppPlan plan;
  plan.feasible = true;
  plan.frame = in.ego.pose();
  plan.p_new = {in.ego.position()};
  plan.anchors.p_bp = plan.anchors.p_sp = plan.anchors.p_ip = in.ego.position();
  plan.descent_target = in.ego.position();
  return plan;
}

/// Fixed-target descent with backtracking; every accepted point lowers
/// the potential.
inline void descend_new_waypoints(EsppPlan & plan, const Vec2 & start, const EsppConfig & cfg)
{
  const Vec2 target = plan.descent_target;
  const auto field = [&](const Vec2 & q) { return espp_potential(plan, q, target, cfg); };
  Vec2 p = start;
  double u = field(p);
  for (int k = 0; k < cfg.p_num; ++k) {
    const Vec2 grad = pf::central_gradient(field, p, cfg.gradient_step);
    if (!grad.allFinite() || grad.norm() < 1e-12) {
      break;
    }
    const Vec2 dir = -grad.normalized();
    double step = cfg.descent_step;
    bool moved = false;
    for (int halving = 0; halving < 30; ++halving, step *= 0.5) {
      const Vec2 q = p + step * dir;
      const double uq = field(q);
      if (uq < u) {
        p = q;
        u = uq;
        moved = true;
        break;
      }
    }
    if (!moved) {
      break;
    }
    plan.p_new.push_back(p);
    plan.p_new_potential.push_back(u);
  }
}
}  // namespace detail

/// Stop-point selection, anchors, hybrid waypoints, constrained fit with a
/// road-parallel end, and the descent producing new waypoints. Returns a
/// plan with feasible = false when no stop point qualifies.
inline EsppPlan plan_espp(const PlanInput & in, const EsppConfig & cfg)
{
  cfg.validate(in.vehicle_width);
  in.road.validate();
  if (in.ego.y <= in.road.lower_edge_y && in.d_brake < cfg.grid_resolution) {
    return detail::straight_plan(in);
  }
  EsppPlan plan;
  plan.frame = in.ego.pose();
  plan.entry_heading = std::min(in.ego.psi, -cfg.min_entry_heading);
  const Vec2 ego = in.ego.position();
  const double height = in.ego.y - in.road.lower_edge_y;
  Vec2 p_bp = ego;
  if (height > 0.0) {
    const double d = height / -std::sin(plan.entry_heading);
    p_bp = ego + d * Vec2(std::cos(plan.entry_heading), std::sin(plan.entry_heading));
    p_bp.y() = in.road.lower_edge_y;
  }
  std::vector<Vec2> entry;
  const double entry_len = (p_bp - ego).norm();
  if (entry_len > 1e-6) {
    entry.push_back(ego);
    for (int k = 1; k <= cfg.n_apf; ++k) {
      entry.push_back(ego + static_cast<double>(k) / static_cast<double>(cfg.n_apf + 1) * (p_bp - ego));
    }
  }
  plan.sector = predict_motion_sector(in.obstacle, in.n_p, in.t_s, cfg);
  plan.region = build_escape_region(p_bp, in.d_brake, in.road, in.vehicle_width, plan.sector, cfg);
  plan.constraints_active = in.obstacle.psi <= 0.0;
  Vec2 p_sp;
  try {
    p_sp = select_stop_point(
      p_bp, plan.entry_heading, plan.region, in.d_brake, cfg.grid_resolution, plan.constraints_active);
    plan.anchors = build_anchors(p_bp, p_sp, plan.entry_heading);
    plan.hybrid = assemble_hybrid_waypoints(entry, plan.anchors, cfg, plan.frame);
  } catch (const EsppError & e) {
    plan.feasible = false;
    plan.fallback_reason = e.what();
    return plan;
  }
  const auto local = clothoid::world_to_vehicle(plan.hybrid.points, plan.frame);
  plan.weights = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(local.size()));
  plan.weights(static_cast<Eigen::Index>(plan.hybrid.breach_index)) = cfg.endpoint_weight;
  plan.weights(static_cast<Eigen::Index>(plan.hybrid.stop_index)) = cfg.endpoint_weight;
  plan.r_stop = local.back().x();
  const clothoid::SlopeWindow road_parallel{
    plan.r_stop, std::tan(-plan.frame.psi + cfg.fit.e_psi_min), std::tan(-plan.frame.psi + cfg.fit.e_psi_max)};
  plan.curve = clothoid::fit_qp_curvature_limited(local, plan.weights, cfg.fit, plan.r_stop, 100, road_parallel);
  plan.feasible = true;
  plan.descent_target = temporary_target(plan, ego, in.ego.v, cfg);
  plan.p_new = {ego};
  plan.p_new_potential = {espp_potential(plan, ego, plan.descent_target, cfg)};
  detail::descend_new_waypoints(plan, ego, cfg);
  return plan;
}

}  // namespace espp::planner

#endif  // ESPP__ESPP_PLANNER_HPP_
