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

#ifndef ESPP__POTENTIAL_FIELD_HPP_
#define ESPP__POTENTIAL_FIELD_HPP_

#include "espp/types.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <vector>

namespace espp::pf
{
/// Straight multi-lane road along +X. Lateral coordinates are world Y.
struct RoadGeometry
{
  double lower_edge_y{0.0};
  double upper_edge_y{8.0};
  std::vector<double> lane_divider_ys{4.0};
  double esl_lower_y{-4.0};  // lower boundary of the emergency stopping lane
  double lane_width{4.0};

  void validate() const
  {
    if (!(lower_edge_y < upper_edge_y)) {
      throw ConfigError("road: lower edge must be below upper edge");
    }
    double prev = lower_edge_y;
    for (double yc : lane_divider_ys) {
      if (!(yc > prev && yc < upper_edge_y)) {
        throw ConfigError("road: lane dividers must be increasing and inside the road");
      }
      prev = yc;
    }
    if (!(esl_lower_y < lower_edge_y)) {
      throw ConfigError("road: emergency lane must lie below the lower edge");
    }
    if (!(lane_width > 0.0)) {
      throw ConfigError("road: lane width must be positive");
    }
  }
};

struct ApfConfig
{
  double a_lane{20.0};
  double a_obs{150.0};
  double zeta{1.0};
  double eta{3.0};
  double target_scale{100.0};
  double w1{0.7};
  double edge_clamp_distance{0.05};
  double gradient_step{0.05};
  double force_tolerance{1e-9};
  // Obstacle spread as a function of its accelerations.
  double sigma_s0{3.0};
  double sigma_d0{1.0};
  double k_s{0.5};
  double k_d{0.5};
  double headway_time{0.5};  // offset of the trailing component [s]

  void validate() const
  {
    if (!(a_lane > 0.0 && a_obs > 0.0 && zeta > 0.0 && eta > 0.0)) {
      throw ConfigError("apf: A_lane, A_obs, zeta and eta must be positive");
    }
    if (!(w1 >= 0.5 && w1 <= 1.0)) {
      throw ConfigError("apf: w1 must lie in [0.5, 1]");
    }
    if (!(edge_clamp_distance > 0.0 && gradient_step > 0.0 && target_scale > 0.0)) {
      throw ConfigError("apf: clamp distance, gradient step and target scale must be positive");
    }
    if (!(sigma_s0 > 0.0 && sigma_d0 > 0.0 && k_s >= 0.0 && k_d >= 0.0 && headway_time >= 0.0)) {
      throw ConfigError("apf: obstacle spread parameters out of range");
    }
  }
};

/// Two-component Gaussian of one obstacle in road-aligned (s, d) coordinates.
struct ObstaclePfParams
{
  Vec2 mu1{0.0, 0.0};
  Vec2 mu2{0.0, 0.0};
  double sigma_s1{1.0};
  double sigma_d1{1.0};
  double sigma_s2{1.0};
  double sigma_d2{1.0};
};

struct TargetPoint
{
  double x_r{0.0};
  double y_r{0.0};
};

enum class Mode { Normal, Emergency };

inline double lane_potential(double y, const RoadGeometry & road, const ApfConfig & cfg)
{
  double u = 0.0;
  for (double yc : road.lane_divider_ys) {
    const double d = y - yc;
    u += cfg.a_lane * std::exp(-d * d / (2.0 * cfg.zeta * cfg.zeta));
  }
  return u;
}

namespace detail
{
inline double edge_term(double signed_distance, const ApfConfig & cfg)
{
  const double d = std::max(signed_distance, cfg.edge_clamp_distance);
  return 0.5 * cfg.eta / (d * d);
}
}  // namespace detail

inline double lower_edge_potential(double y, const RoadGeometry & road, const ApfConfig & cfg)
{
  return detail::edge_term(y - road.lower_edge_y, cfg);
}

inline double upper_edge_potential(double y, const RoadGeometry & road, const ApfConfig & cfg)
{
  return detail::edge_term(road.upper_edge_y - y, cfg);
}

/// Both road edges. Distances below the clamp (including points outside
/// the road) evaluate at the clamp.
inline double edge_potential(double y, const RoadGeometry & road, const ApfConfig & cfg)
{
  return lower_edge_potential(y, road, cfg) + upper_edge_potential(y, road, cfg);
}

inline double gaussian_component(const Vec2 & p, const Vec2 & mu, double sigma_s, double sigma_d, double amp)
{
  const double zs = (p.x() - mu.x()) / sigma_s;
  const double zd = (p.y() - mu.y()) / sigma_d;
  return amp / (2.0 * std::numbers::pi * sigma_s * sigma_d) * std::exp(-0.5 * (zs * zs + zd * zd));
}

inline double obstacle_potential(const Vec2 & ego_frenet, const ObstaclePfParams & p, const ApfConfig & cfg)
{
  const double u1 = gaussian_component(ego_frenet, p.mu1, p.sigma_s1, p.sigma_d1, cfg.a_obs);
  const double u2 = gaussian_component(ego_frenet, p.mu2, p.sigma_s2, p.sigma_d2, cfg.a_obs);
  return cfg.w1 * u1 + (1.0 - cfg.w1) * u2;
}

/// Field parameters of an obstacle: the spread grows with its
/// accelerations, the trailing component sits one headway behind it.
inline ObstaclePfParams obstacle_params(const ObstacleState & obs, const ApfConfig & cfg)
{
  ObstaclePfParams p;
  p.mu1 = obs.position();
  p.mu2 = obs.position() - Vec2(cfg.headway_time * obs.v, 0.0);
  p.sigma_s1 = cfg.sigma_s0 + cfg.k_s * std::abs(obs.a_long);
  p.sigma_d1 = cfg.sigma_d0 + cfg.k_d * std::abs(obs.a_lat);
  p.sigma_s2 = p.sigma_s1;
  p.sigma_d2 = p.sigma_d1;
  return p;
}

inline double target_potential(const Vec2 & ego, const TargetPoint & target, const ApfConfig & cfg)
{
  return (std::abs(ego.x() - target.x_r) + std::abs(ego.y() - target.y_r)) / cfg.target_scale;
}

/// Everything the total field depends on besides the query point.
struct FieldContext
{
  RoadGeometry road;
  ApfConfig cfg;
  std::vector<ObstaclePfParams> obstacles;
  std::optional<TargetPoint> target;
  Mode mode{Mode::Normal};
  bool lower_edge_active{true};
  bool upper_edge_active{true};
  // Corridor boundary plus attractive terms, used in emergency mode.
  std::function<double(const Vec2 &)> emergency_terms;
};

/// Normal mode: lane + active edges + obstacles + target.
/// Emergency mode: obstacles + emergency terms; the road terms are
/// replaced by the corridor around the stopping path.
inline double total_potential(const Vec2 & p, const FieldContext & ctx)
{
  double u = 0.0;
  for (const auto & o : ctx.obstacles) {
    u += obstacle_potential(p, o, ctx.cfg);
  }
  if (ctx.mode == Mode::Emergency) {
    if (ctx.emergency_terms) {
      u += ctx.emergency_terms(p);
    }
    return u;
  }
  u += lane_potential(p.y(), ctx.road, ctx.cfg);
  if (ctx.lower_edge_active) {
    u += lower_edge_potential(p.y(), ctx.road, ctx.cfg);
  }
  if (ctx.upper_edge_active) {
    u += upper_edge_potential(p.y(), ctx.road, ctx.cfg);
  }
  if (ctx.target) {
    u += target_potential(p, *ctx.target, ctx.cfg);
  }
  return u;
}

/// Fourth-order central-difference gradient of a scalar field with step h.
template <typename Field>
Vec2 central_gradient(const Field & field, const Vec2 & p, double h)
{
  const auto diff = [&](const Vec2 & e) {
    return (-field(p + 2.0 * e) + 8.0 * field(p + e) - 8.0 * field(p - e) + field(p - 2.0 * e)) / (12.0 * h);
  };
  return {diff(Vec2(h, 0.0)), diff(Vec2(0.0, h))};
}

struct DescentResult
{
  Vec2 force{0.0, 0.0};
  double psi_ref{0.0};
  bool local_minimum{false};
};

inline DescentResult descend_gradient(const Vec2 & p, const FieldContext & ctx, std::optional<double> step = std::nullopt)
{
  const double h = step.value_or(ctx.cfg.gradient_step);
  const Vec2 grad = central_gradient([&ctx](const Vec2 & q) { return total_potential(q, ctx); }, p, h);
  DescentResult r;
  r.force = -grad;
  if (!r.force.allFinite()) {
    throw EsppError("potential field gradient is not finite");
  }
  if (r.force.norm() < ctx.cfg.force_tolerance) {
    r.local_minimum = true;
    return r;
  }
  r.psi_ref = std::atan2(r.force.y(), r.force.x());
  return r;
}

/// Lane amplitude that makes lane_center an equilibrium of lane plus edge
/// potentials. Throws when the lane term cannot balance the edges there.
inline double balanced_lane_amplitude(const RoadGeometry & road, const ApfConfig & cfg, double lane_center)
{
  double lane_slope = 0.0;  // d(lane potential)/dy per unit amplitude
  for (double yc : road.lane_divider_ys) {
    const double d = lane_center - yc;
    lane_slope += -d / (cfg.zeta * cfg.zeta) * std::exp(-d * d / (2.0 * cfg.zeta * cfg.zeta));
  }
  const double dl = lane_center - road.lower_edge_y;
  const double du = road.upper_edge_y - lane_center;
  const double edge_slope = -cfg.eta / (dl * dl * dl) + cfg.eta / (du * du * du);
  const double a = -edge_slope / lane_slope;
  if (!std::isfinite(a) || a <= 0.0) {
    throw ConfigError("lane centre cannot be balanced by the lane potential");
  }
  return a;
}

}  // namespace espp::pf

#endif  // ESPP__POTENTIAL_FIELD_HPP_
