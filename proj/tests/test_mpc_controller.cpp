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

#include "espp/mpc_controller.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using espp::VehicleState;
using namespace espp::mpc;
namespace vm = espp::vehicle;
namespace cl = espp::clothoid;

namespace
{
VehicleState ego(double y, double v = 30.0)
{
  VehicleState s;
  s.y = y;
  s.v = v;
  return s;
}

Reference constant_reference(double y, int n_p)
{
  return Reference{std::vector<Eigen::Vector3d>(static_cast<std::size_t>(n_p), Eigen::Vector3d(y, 0.0, 0.0))};
}

OutputBounds normal_bounds(const MpcConfig & cfg)
{
  return OutputBounds::for_road(espp::pf::RoadGeometry{}, cfg, false);
}
}  // namespace

TEST(BuildReference, StraightCenterline)
{
  const CurvePath path{espp::Pose2{0.0, 0.0, 0.0}, cl::Coefficients{2.0, 0.0, 0.0, 0.0}};
  const auto ref = build_reference(path, ego(2.0), 20, 0.01);
  ASSERT_EQ(ref.y_d.size(), 20u);
  for (const auto & y : ref.y_d) {
    EXPECT_DOUBLE_EQ(y(0), 2.0);
    EXPECT_EQ(y(1), 0.0);
    EXPECT_EQ(y(2), 0.0);
  }
}

TEST(BuildReference, ConstantCurvatureYawRate)
{
  const double kappa = 0.004;
  const CurvePath path{espp::Pose2{0.0, 0.0, 0.0}, cl::Coefficients{0.0, 0.0, kappa / 2.0, 0.0}};
  const auto ref = build_reference(path, ego(0.0, 25.0), 20, 0.01);
  for (const auto & y : ref.y_d) {
    EXPECT_NEAR(y(2), kappa * 25.0, 1e-12);
  }
}

TEST(BuildReference, CurveValuesAtStations)
{
  const cl::Coefficients c{0.5, -0.02, 0.001, -0.00002};
  const CurvePath path{espp::Pose2{10.0, 3.0, 0.0}, c};
  VehicleState s = ego(3.0, 28.0);
  s.x = 12.0;
  const auto ref = build_reference(path, s, 20, 0.01);
  for (int k : {1, 5, 10, 15, 20}) {
    const double r = 2.0 + k * 28.0 * 0.01;
    EXPECT_NEAR(ref.y_d[static_cast<std::size_t>(k - 1)](0), 3.0 + cl::eval(c, r).value, 1e-12);
  }
}

TEST(BuildReference, RotatedFrameRoundTrip)
{
  const CurvePath path{espp::Pose2{5.0, 1.0, -0.2}, cl::Coefficients{0.0, 0.05, 0.002, 0.0}};
  const double r = path.param_at_world_x(15.0);
  EXPECT_NEAR(path.world_point(r).x(), 15.0, 1e-10);
}

TEST(BuildQp, ZeroErrorGivesZeroMove)
{
  const MpcConfig cfg;
  const vm::VehicleParams p;
  const auto built = build_qp(ego(2.0), constant_reference(2.0, cfg.n_p), vm::discretize(p, 30.0, cfg.t_s), cfg,
                              normal_bounds(cfg), 0.0);
  EXPECT_EQ(built.problem.num_vars(), 6);
  const auto r = solve_step(built);
  EXPECT_NEAR(r.du0, 0.0, 1e-10);
  EXPECT_NEAR(r.epsilon, 0.0, 1e-10);
  EXPECT_NEAR(r.delta_f, 0.0, 1e-10);
}

TEST(BuildQp, StepReferenceSteersTowardIt)
{
  const MpcConfig cfg;
  const vm::VehicleParams p;
  const auto built = build_qp(ego(2.0), constant_reference(2.5, cfg.n_p), vm::discretize(p, 30.0, cfg.t_s), cfg,
                              normal_bounds(cfg), 0.0);
  const auto r = solve_step(built);
  EXPECT_GT(r.du0, 0.0);
  EXPECT_LE(std::abs(r.du0), cfg.du_max + 1e-12);

  // One-variable oracle: move only du_0, others fixed at the optimum, scan a grid.
  double best = std::numeric_limits<double>::infinity();
  double arg = 0.0;
  for (double d = -cfg.du_max; d <= cfg.du_max + 1e-12; d += cfg.du_max / 1000.0) {
    Eigen::VectorXd z = r.z;
    z(0) = d;
    const double obj = built.problem.objective(z);
    if (obj < best) {
      best = obj;
      arg = d;
    }
  }
  EXPECT_GT(arg, 0.0);
  EXPECT_NEAR(arg, r.du0, 2.0 * cfg.du_max / 1000.0);
}

TEST(BuildQp, EmergencyBoundsOpenTheRoadEdge)
{
  MpcConfig cfg;
  cfg.psi_max = 1.0;
  const vm::VehicleParams p;
  VehicleState s = ego(0.3);
  s.psi = -0.1;
  const auto ref = constant_reference(-2.0, cfg.n_p);
  const auto model = vm::discretize(p, 30.0, cfg.t_s);
  const auto normal = solve_step(build_qp(s, ref, model, cfg, normal_bounds(cfg), 0.0));
  const auto emer =
    solve_step(build_qp(s, ref, model, cfg, OutputBounds::for_road(espp::pf::RoadGeometry{}, cfg, true), 0.0));
  EXPECT_GT(normal.epsilon, 1e-6);
  EXPECT_NEAR(emer.epsilon, 0.0, 1e-9);
  EXPECT_LT(emer.cost, normal.cost);
}

TEST(SolveStep, HorizonOneRidgeRegression)
{
  MpcConfig cfg;
  cfg.n_p = 1;
  cfg.n_c = 1;
  cfg.du_max = 0.2;
  cfg.psi_dot_max = 100.0;
  cfg.beta_max = 10.0;
  const vm::VehicleParams p;
  VehicleState s = ego(2.0);
  s.beta = 0.01;
  s.psi_dot = -0.05;
  const double u_prev = 0.01;
  const Eigen::Vector3d yd(2.1, 0.0, 0.02);
  const auto model = vm::discretize(p, 30.0, cfg.t_s);
  espp::pf::RoadGeometry road;
  const auto built = build_qp(s, Reference{{yd}}, model, cfg, OutputBounds::for_road(road, cfg, false), u_prev);
  const auto r = solve_step(built);
  // Closed form: min (g du + e)' Q (g du + e) + R du^2.
  const Eigen::Vector4d x0(s.y, s.beta, s.psi, s.psi_dot);
  const Eigen::Vector3d g = model.C * model.B;
  const Eigen::Vector3d e = model.C * (model.A * x0 + model.B * u_prev) - yd;
  const Eigen::Matrix3d Q = cfg.q.asDiagonal();
  const double du = -(g.dot(Q * e)) / (g.dot(Q * g) + cfg.r);
  EXPECT_NEAR(r.du0, du, 1e-8);
}

TEST(SolveStep, CommandAlwaysWithinLimits)
{
  const MpcConfig cfg;
  const vm::VehicleParams p;
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> uy(-3.0, 11.0);
  std::uniform_real_distribution<double> uu(-0.2, 0.2);
  std::uniform_real_distribution<double> us(-0.3, 0.3);
  for (int i = 0; i < 200; ++i) {
    VehicleState s = ego(uy(rng), 20.0 + 15.0 * std::abs(us(rng)));
    s.psi = us(rng);
    s.psi_dot = us(rng);
    s.beta = 0.1 * us(rng);
    const double u_prev = uu(rng);
    const auto built = build_qp(s, constant_reference(uy(rng), cfg.n_p), vm::discretize(p, s.v, cfg.t_s), cfg,
                                normal_bounds(cfg), u_prev);
    const auto r = solve_step(built);
    EXPECT_LE(std::abs(r.delta_f), cfg.u_max + 1e-9);
    EXPECT_LE(std::abs(r.delta_f - u_prev), cfg.du_max + 1e-9);
  }
}

TEST(SolveStep, Deterministic)
{
  const MpcConfig cfg;
  const vm::VehicleParams p;
  const auto built = build_qp(ego(1.3), constant_reference(2.0, cfg.n_p), vm::discretize(p, 30.0, cfg.t_s), cfg,
                              normal_bounds(cfg), 0.004);
  const auto a = solve_step(built);
  const auto b = solve_step(built);
  EXPECT_EQ(a.delta_f, b.delta_f);
  EXPECT_EQ(a.cost, b.cost);
}

TEST(SolveStep, SatisfiesKktAndMatchesGridOracle)
{
  MpcConfig cfg;
  cfg.n_p = 6;
  cfg.n_c = 3;
  const vm::VehicleParams p;
  const auto built = build_qp(ego(1.0), constant_reference(2.5, cfg.n_p), vm::discretize(p, 30.0, cfg.t_s), cfg,
                              normal_bounds(cfg), 0.0);
  const auto sol = espp::qp::solve(built.problem);
  ASSERT_EQ(sol.status, espp::qp::QpStatus::Optimal);
  EXPECT_LT(sol.kkt.stationarity, 1e-8);
  EXPECT_LT(sol.kkt.primal, 1e-9);
  EXPECT_LT(sol.kkt.complementarity, 1e-8);
  auto boxed = built.problem;
  (*boxed.ub)(cfg.n_c) = 0.01;  // keep the slack range small for the grid
  const auto grid = espp::qp::brute_force_oracle(boxed, 0.0005);
  ASSERT_TRUE(grid.has_value());
  EXPECT_LE(sol.objective, boxed.objective(*grid) + 1e-9);
  EXPECT_LT((sol.z - *grid).cwiseAbs().maxCoeff(), 2e-3);
}

TEST(SolveStep, RecedingHorizonShiftedCandidate)
{
  const MpcConfig cfg;
  const vm::VehicleParams p;
  VehicleState s = ego(1.2);
  const auto model = vm::discretize(p, 30.0, cfg.t_s);
  const auto ref = constant_reference(2.0, cfg.n_p);
  const auto first = solve_step(build_qp(s, ref, model, cfg, normal_bounds(cfg), 0.0));
  const VehicleState next = vm::step(s, first.delta_f, p, cfg.t_s);
  const auto built = build_qp(next, ref, model, cfg, normal_bounds(cfg), first.delta_f);
  const auto second = solve_step(built);
  Eigen::VectorXd shifted = Eigen::VectorXd::Zero(cfg.n_c + 1);
  shifted.head(cfg.n_c - 1) = first.z.segment(1, cfg.n_c - 1);
  shifted(cfg.n_c) = first.epsilon;
  EXPECT_LE(second.cost, built.problem.objective(shifted) + 1e-6);
}

TEST(ConnectingPath, StartsAtEgoAndJoinsTarget)
{
  const CurvePath target{espp::Pose2{0.0, 3.0, 0.0}, cl::Coefficients{0.0, 0.01, 0.0005, 0.0}};
  VehicleState s = ego(2.0);
  s.x = 4.0;
  s.psi = 0.05;
  const double h_local = std::atan(cl::slope(target.curve, 4.0));
  for (double alignment : {0.0, 0.5, 1.0}) {
    const auto path = connecting_path(s, target, 15.0, alignment);
    EXPECT_EQ(path.curve.c0, 0.0);
    EXPECT_EQ(path.curve.c1, 0.0);
    EXPECT_NEAR(path.world_point(0.0).x(), 4.0, 1e-12);
    EXPECT_NEAR(path.world_point(0.0).y(), 2.0, 1e-12);
    const double h_start = s.psi + alignment * (h_local - s.psi);
    EXPECT_NEAR(path.frame.psi, h_start, 1e-12);
    // The join is the target point at world X = x + lookahead * cos(start heading).
    const double rt = target.param_at_world_x(4.0 + 15.0 * std::cos(h_start));
    const auto p_target = target.world_point(rt);
    const double r_join = path.param_at_world_x(p_target.x());
    EXPECT_NEAR(path.world_point(r_join).y(), p_target.y(), 1e-9) << alignment;
    const double h_path = path.frame.psi + std::atan(cl::slope(path.curve, r_join));
    const double h_target = std::atan(cl::slope(target.curve, rt));
    EXPECT_NEAR(h_path, h_target, 1e-9) << alignment;
  }
  EXPECT_THROW(connecting_path(s, target, 0.0), espp::EsppError);
  EXPECT_THROW(connecting_path(s, target, 15.0, 1.5), espp::EsppError);
}

TEST(MpcController, TracksLaneOffsetWithinLimits)
{
  const MpcConfig cfg;
  const vm::VehicleParams p;
  for (double v : {20.0, 30.0, 35.0}) {
    MpcController ctl(cfg, p);
    VehicleState s = ego(2.0, v);
    const CurvePath target{espp::Pose2{0.0, 3.0, 0.0}, cl::Coefficients{}};
    double prev = 0.0;
    for (int i = 0; i < 1000; ++i) {
      const auto ref = build_reference(connecting_path(s, target, std::max(5.0, 1.5 * s.v)), s, cfg.n_p, cfg.t_s);
      const auto r = ctl.compute(s, ref, normal_bounds(cfg));
      ASSERT_LE(std::abs(r.delta_f), cfg.u_max + 1e-12);
      ASSERT_LE(std::abs(r.delta_f - prev), cfg.du_max + 1e-12);
      prev = r.delta_f;
      s = vm::step(s, r.delta_f, p, cfg.t_s);
    }
    EXPECT_NEAR(s.y, 3.0, 0.02) << "v " << v;
    EXPECT_NEAR(s.psi, 0.0, 0.01) << "v " << v;
  }
}

TEST(MpcConfig, Validation)
{
  MpcConfig cfg;
  cfg.n_c = 30;
  EXPECT_THROW(cfg.validate(), espp::ConfigError);
  MpcConfig bad;
  bad.du_max = 0.5;
  EXPECT_THROW(bad.validate(), espp::ConfigError);
}
