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

#include "espp/potential_field.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using espp::Vec2;
using namespace espp::pf;

namespace
{
espp::ObstacleState make_obstacle(double x, double y, double psi, double v, double a_long = 0.0, double a_lat = 0.0)
{
  espp::ObstacleState o;
  o.x = x;
  o.y = y;
  o.psi = psi;
  o.v = v;
  o.a_long = a_long;
  o.a_lat = a_lat;
  return o;
}

FieldContext straight_road_context()
{
  FieldContext ctx;
  ctx.cfg.a_lane = balanced_lane_amplitude(ctx.road, ctx.cfg, 2.0);
  return ctx;
}
}  // namespace

TEST(LanePotential, PeakAndTail)
{
  const RoadGeometry road;
  const ApfConfig cfg;
  EXPECT_DOUBLE_EQ(lane_potential(4.0, road, cfg), 20.0);
  EXPECT_LT(lane_potential(4.0 + 10.0, road, cfg), 1e-20 * 20.0);
  EXPECT_LT(lane_potential(4.0 - 10.0, road, cfg), 1e-20 * 20.0);
  EXPECT_NEAR(lane_potential(5.0, road, cfg), 12.130613194252668, 1e-12);
}

TEST(LanePotential, ScalesLinearlyWithAmplitude)
{
  const RoadGeometry road;
  ApfConfig cfg;
  ApfConfig scaled = cfg;
  scaled.a_lane *= 3.5;
  for (double y = -1.0; y <= 9.0; y += 0.37) {
    EXPECT_NEAR(lane_potential(y, road, scaled), 3.5 * lane_potential(y, road, cfg), 1e-12);
  }
}

TEST(LanePotential, ArgmaxAtDivider)
{
  const RoadGeometry road;
  const ApfConfig cfg;
  double best = -1.0;
  double arg = 0.0;
  const double cell = 0.001;
  for (double y = 0.0; y <= 8.0; y += cell) {
    const double u = lane_potential(y, road, cfg);
    if (u > best) {
      best = u;
      arg = y;
    }
  }
  EXPECT_LE(std::abs(arg - 4.0), cell);
}

TEST(EdgePotential, ClosedFormValues)
{
  ApfConfig cfg;
  RoadGeometry road;
  road.upper_edge_y = 9.0;
  road.lane_divider_ys = {4.5};
  // 1 m from the lower edge, 8 m from the upper edge.
  EXPECT_NEAR(edge_potential(1.0, road, cfg), 1.5 + 3.0 / 128.0, 1e-12);
  const RoadGeometry centred;
  EXPECT_NEAR(edge_potential(4.0, centred, cfg), 0.1875, 1e-12);
}

TEST(EdgePotential, ClampedNearAndBeyondEdge)
{
  const RoadGeometry road;
  const ApfConfig cfg;
  const double at_clamp = lower_edge_potential(cfg.edge_clamp_distance, road, cfg);
  EXPECT_TRUE(std::isfinite(at_clamp));
  EXPECT_DOUBLE_EQ(at_clamp, 0.5 * 3.0 / (0.05 * 0.05));
  EXPECT_DOUBLE_EQ(lower_edge_potential(0.0, road, cfg), at_clamp);
  EXPECT_DOUBLE_EQ(lower_edge_potential(-3.0, road, cfg), at_clamp);
  EXPECT_DOUBLE_EQ(lower_edge_potential(0.01, road, cfg), at_clamp);
  EXPECT_DOUBLE_EQ(upper_edge_potential(8.2, road, cfg), at_clamp);
  EXPECT_TRUE(std::isfinite(edge_potential(0.0, road, cfg)));
}

TEST(EdgePotential, MonotoneTowardEdges)
{
  const RoadGeometry road;
  const ApfConfig cfg;
  double prev = edge_potential(4.0, road, cfg);
  for (double y = 3.9; y > 0.06; y -= 0.1) {
    const double u = edge_potential(y, road, cfg);
    EXPECT_GT(u, prev);
    prev = u;
  }
  prev = edge_potential(4.0, road, cfg);
  for (double y = 4.1; y < 7.94; y += 0.1) {
    const double u = edge_potential(y, road, cfg);
    EXPECT_GT(u, prev);
    prev = u;
  }
}

TEST(ObstaclePotential, PeakValueAndTail)
{
  ApfConfig cfg;
  cfg.w1 = 1.0;
  ObstaclePfParams p;
  p.mu1 = {10.0, 2.0};
  p.mu2 = {5.0, 2.0};
  EXPECT_NEAR(obstacle_potential(p.mu1, p, cfg), 150.0 / (2.0 * M_PI), 1e-12);
  EXPECT_NEAR(obstacle_potential(p.mu1, p, cfg), 23.8732, 1e-4);
  const double peak = 150.0 / (2.0 * M_PI);
  EXPECT_LT(obstacle_potential(Vec2(40.0, 2.0), p, cfg), 1e-20 * peak);
}

TEST(ObstaclePotential, EqualWeightsAverageComponents)
{
  ApfConfig cfg;
  cfg.w1 = 0.5;
  ObstaclePfParams p;
  p.mu1 = {10.0, 2.0};
  p.mu2 = {7.0, 2.5};
  p.sigma_s1 = 3.0;
  p.sigma_d1 = 1.2;
  p.sigma_s2 = 2.0;
  p.sigma_d2 = 0.8;
  const Vec2 q(8.3, 1.1);
  const double u1 = gaussian_component(q, p.mu1, 3.0, 1.2, 150.0);
  const double u2 = gaussian_component(q, p.mu2, 2.0, 0.8, 150.0);
  EXPECT_NEAR(obstacle_potential(q, p, cfg), 0.5 * (u1 + u2), 1e-12);
}

TEST(ObstaclePotential, TranslationInvariant)
{
  const ApfConfig cfg;
  espp::ObstacleState obs = make_obstacle(30.0, 6.0, -0.1, 32.0, -4.0, 1.5);
  const auto p = obstacle_params(obs, cfg);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  for (int i = 0; i < 50; ++i) {
    const Vec2 q(30.0 + u(rng), 4.0 + 0.2 * u(rng));
    const Vec2 off(u(rng), u(rng));
    auto moved = p;
    moved.mu1 += off;
    moved.mu2 += off;
    EXPECT_NEAR(obstacle_potential(q + off, moved, cfg), obstacle_potential(q, p, cfg), 1e-12);
  }
}

TEST(ObstaclePotential, SpreadGrowsWithAcceleration)
{
  const ApfConfig cfg;
  espp::ObstacleState calm = make_obstacle(0.0, 0.0, 0.0, 30.0, 0.0, 0.0);
  espp::ObstacleState hard = make_obstacle(0.0, 0.0, 0.0, 30.0, -7.0, 2.0);
  const auto a = obstacle_params(calm, cfg);
  const auto b = obstacle_params(hard, cfg);
  EXPECT_DOUBLE_EQ(a.sigma_s1, 3.0);
  EXPECT_DOUBLE_EQ(a.sigma_d1, 1.0);
  EXPECT_DOUBLE_EQ(b.sigma_s1, 6.5);
  EXPECT_DOUBLE_EQ(b.sigma_d1, 2.0);
  EXPECT_DOUBLE_EQ(a.mu2.x(), -15.0);
}

TEST(TargetPotential, ManhattanOverScale)
{
  const ApfConfig cfg;
  EXPECT_EQ(target_potential(Vec2(3.0, 4.0), TargetPoint{3.0, 4.0}, cfg), 0.0);
  EXPECT_NEAR(target_potential(Vec2(100.0, 4.0), TargetPoint{200.0, 4.0}, cfg), 1.0, 1e-12);
  EXPECT_NEAR(target_potential(Vec2(100.0, 0.0), TargetPoint{200.0, 4.0}, cfg), 1.04, 1e-12);
}

TEST(TotalPotential, NormalModeIsSumOfComponents)
{
  auto ctx = straight_road_context();
  ctx.obstacles.push_back(obstacle_params(make_obstacle(20.0, 6.0, 0.0, 30.0), ctx.cfg));
  ctx.target = TargetPoint{200.0, 2.0};
  const Vec2 q(12.0, 3.1);
  const double expected = lane_potential(q.y(), ctx.road, ctx.cfg) + edge_potential(q.y(), ctx.road, ctx.cfg) +
                          obstacle_potential(q, ctx.obstacles[0], ctx.cfg) +
                          target_potential(q, *ctx.target, ctx.cfg);
  EXPECT_DOUBLE_EQ(total_potential(q, ctx), expected);
}

TEST(TotalPotential, MatchesScalarReferenceAtRandomPoints)
{
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    ApfConfig cfg;
    cfg.a_lane = 5.0 + 30.0 * u(rng);
    cfg.w1 = 0.5 + 0.5 * u(rng);
    espp::ObstacleState obs;
    obs.x = 100.0 * u(rng);
    obs.y = 8.0 * u(rng);
    obs.v = 35.0 * u(rng);
    obs.a_long = -8.0 + 16.0 * u(rng);
    obs.a_lat = -4.0 + 8.0 * u(rng);
    FieldContext ctx;
    ctx.cfg = cfg;
    ctx.obstacles.push_back(obstacle_params(obs, cfg));
    ctx.target = TargetPoint{obs.x + 50.0 * u(rng), 2.0};
    const Vec2 p(obs.x - 15.0 + 30.0 * u(rng), -1.0 + 10.0 * u(rng));

    oracle::FieldParams q;
    q.dividers = ctx.road.lane_divider_ys;
    q.a_lane = cfg.a_lane;
    q.zeta = cfg.zeta;
    q.lower_edge = ctx.road.lower_edge_y;
    q.upper_edge = ctx.road.upper_edge_y;
    q.eta = cfg.eta;
    q.clamp = cfg.edge_clamp_distance;
    q.a_obs = cfg.a_obs;
    q.w1 = cfg.w1;
    q.obs_x = obs.x;
    q.obs_y = obs.y;
    q.obs_v = obs.v;
    q.obs_a_long = obs.a_long;
    q.obs_a_lat = obs.a_lat;
    q.sigma_s0 = cfg.sigma_s0;
    q.sigma_d0 = cfg.sigma_d0;
    q.k_s = cfg.k_s;
    q.k_d = cfg.k_d;
    q.headway = cfg.headway_time;
    q.target_x = ctx.target->x_r;
    q.target_y = ctx.target->y_r;
    q.target_scale = cfg.target_scale;
    const double ref = oracle::field_value(p.x(), p.y(), q);
    EXPECT_NEAR(total_potential(p, ctx), ref, 1e-9 * std::max(1.0, std::abs(ref))) << "point " << i;
  }
}

TEST(TotalPotential, LowerEdgeCanBeSuppressed)
{
  auto ctx = straight_road_context();
  const Vec2 q(0.0, 1.0);
  const double with_edge = total_potential(q, ctx);
  ctx.lower_edge_active = false;
  EXPECT_NEAR(with_edge - total_potential(q, ctx), lower_edge_potential(1.0, ctx.road, ctx.cfg), 1e-12);
}

TEST(TotalPotential, EmergencyModeUsesCorridorTerms)
{
  auto ctx = straight_road_context();
  ctx.mode = Mode::Emergency;
  ctx.target = TargetPoint{200.0, 2.0};
  ctx.emergency_terms = [](const Vec2 & p) { return 0.1 * p.squaredNorm(); };
  const Vec2 q(3.0, -1.0);
  EXPECT_DOUBLE_EQ(total_potential(q, ctx), 1.0);
}

TEST(TotalPotential, FiniteAndNonnegativeOnGrid)
{
  auto ctx = straight_road_context();
  ctx.obstacles.push_back(obstacle_params(make_obstacle(50.0, 5.0, -0.2, 32.0, -7.0, 2.0), ctx.cfg));
  ctx.target = TargetPoint{300.0, 2.0};
  for (int i = 0; i < 40; ++i) {
    for (int j = 0; j < 25; ++j) {
      const Vec2 q(2.5 * i, -2.0 + 0.5 * j);
      const double u = total_potential(q, ctx);
      EXPECT_TRUE(std::isfinite(u));
      EXPECT_GE(lane_potential(q.y(), ctx.road, ctx.cfg), 0.0);
      EXPECT_GT(edge_potential(q.y(), ctx.road, ctx.cfg), 0.0);
      EXPECT_GE(obstacle_potential(q, ctx.obstacles[0], ctx.cfg), 0.0);
      EXPECT_GE(u, 0.0);
    }
  }
}

TEST(DescendGradient, FreeLaneHeadsStraight)
{
  auto ctx = straight_road_context();
  ctx.target = TargetPoint{500.0, 2.0};
  const auto r = descend_gradient(Vec2(0.0, 2.0), ctx);
  ASSERT_FALSE(r.local_minimum);
  EXPECT_LT(std::abs(r.psi_ref), 1e-3);
}

TEST(DescendGradient, ReportsLocalMinimum)
{
  FieldContext ctx;
  ctx.mode = Mode::Emergency;
  ctx.emergency_terms = [](const Vec2 & p) { return (p - Vec2(1.0, 2.0)).squaredNorm(); };
  const auto r = descend_gradient(Vec2(1.0, 2.0), ctx);
  EXPECT_TRUE(r.local_minimum);
}

TEST(DescendGradient, ObstacleAheadDeflectsHeading)
{
  auto ctx = straight_road_context();
  ctx.target = TargetPoint{500.0, 2.0};
  ctx.obstacles.push_back(obstacle_params(make_obstacle(8.0, 2.3, 0.0, 0.0), ctx.cfg));
  const Vec2 q(0.0, 2.0);
  const auto r = descend_gradient(q, ctx);
  ASSERT_FALSE(r.local_minimum);
  EXPECT_GT(std::abs(r.psi_ref), 1e-3);
  // Independent half-step difference of the same field.
  const double h = ctx.cfg.gradient_step / 2.0;
  const double dy = (total_potential(q + Vec2(0.0, h), ctx) - total_potential(q - Vec2(0.0, h), ctx)) / (2.0 * h);
  EXPECT_EQ(std::signbit(r.psi_ref), std::signbit(-dy));
}

TEST(DescendGradient, HalfStepAgreesToFirstOrder)
{
  auto ctx = straight_road_context();
  ctx.target = TargetPoint{400.0, 2.0};
  ctx.obstacles.push_back(obstacle_params(make_obstacle(40.0, 5.0, 0.0, 30.0, -3.0, 1.0), ctx.cfg));
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> ux(0.0, 80.0);
  std::uniform_real_distribution<double> uy(0.75, 7.25);
  int checked = 0;
  while (checked < 100) {
    const Vec2 q(ux(rng), uy(rng));
    // The Manhattan target term has a kink along y = y_r; skip the stencil band.
    if (std::abs(q.y() - ctx.target->y_r) < 0.1) {
      continue;
    }
    ++checked;
    const auto a = descend_gradient(q, ctx, 0.05);
    const auto b = descend_gradient(q, ctx, 0.025);
    EXPECT_LT((a.force - b.force).norm() / std::max(b.force.norm(), 1e-12), 1e-3);
  }
}

TEST(BalancedLaneAmplitude, LaneCentreIsEquilibrium)
{
  const RoadGeometry road;
  ApfConfig cfg;
  cfg.a_lane = balanced_lane_amplitude(road, cfg, 2.0);
  EXPECT_NEAR(cfg.a_lane, 1.334, 1e-3);
  const auto field = [&](const Vec2 & p) { return lane_potential(p.y(), road, cfg) + edge_potential(p.y(), road, cfg); };
  const Vec2 g = central_gradient(field, Vec2(0.0, 2.0), 1e-4);
  EXPECT_LT(std::abs(g.y()), 1e-6);
}

TEST(Config, ValidationRejectsBadValues)
{
  ApfConfig cfg;
  cfg.w1 = 0.4;
  EXPECT_THROW(cfg.validate(), espp::ConfigError);
  RoadGeometry road;
  road.lane_divider_ys = {9.0};
  EXPECT_THROW(road.validate(), espp::ConfigError);
  EXPECT_NO_THROW(RoadGeometry{}.validate());
  EXPECT_NO_THROW(ApfConfig{}.validate());
}
