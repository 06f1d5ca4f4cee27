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

#ifndef ESPP__MPC_CONTROLLER_HPP_
#define ESPP__MPC_CONTROLLER_HPP_

#include "espp/clothoid.hpp"
#include "espp/potential_field.hpp"
#include "espp/qp_core.hpp"
#include "espp/types.hpp"
#include "espp/vehicle_model.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace espp::mpc
{
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct MpcConfig
{
  int n_p{20};
  int n_c{5};
  double t_s{0.01};
  Eigen::Vector3d q{0.01, 0.001, 0.001};  // weights on (Y, beta, psi_dot)
  double r{0.1};
  double lambda{0.15};
  double u_max{0.2};
  double du_max{0.015};
  double psi_max{0.4};
  double beta_max{0.1};
  double psi_dot_max{0.8};
  double slack_max{1e3};

  void validate() const
  {
    if (n_p < 1 || n_c < 1 || n_c > n_p) {
      throw ConfigError("mpc: need 1 <= n_c <= n_p");
    }
    if (!(t_s > 0.0)) {
      throw ConfigError("mpc: t_s must be positive");
    }
    if ((q.array() < 0.0).any() || r < 0.0 || lambda < 0.0) {
      throw ConfigError("mpc: weights must be nonnegative");
    }
    if (!(du_max > 0.0 && u_max > 0.0 && du_max <= u_max)) {
      throw ConfigError("mpc: need 0 < du_max <= u_max");
    }
    if (!(psi_max > 0.0 && beta_max > 0.0 && psi_dot_max > 0.0 && slack_max > 0.0)) {
      throw ConfigError("mpc: state bounds must be positive");
    }
  }
};

/// Output bounds over (Y, beta, psi_dot).
struct OutputBounds
{
  Eigen::Vector3d y_min;
  Eigen::Vector3d y_max;

  /// Road bounds; the emergency set lowers the Y limit to the stopping lane.
  static OutputBounds for_road(const pf::RoadGeometry & road, const MpcConfig & cfg, bool emergency)
  {
    OutputBounds b;
    b.y_min = {emergency ? road.esl_lower_y : road.lower_edge_y, -cfg.beta_max, -cfg.psi_dot_max};
    b.y_max = {road.upper_edge_y, cfg.beta_max, cfg.psi_dot_max};
    return b;
  }
};

/// Desired outputs (Y, beta, psi_dot) at prediction steps 1..n_p.
struct Reference
{
  std::vector<Eigen::Vector3d> y_d;
};

/// A cubic path expressed in a local frame (origin and heading in world).
struct CurvePath
{
  Pose2 frame;
  clothoid::Coefficients curve;
  double r_end{std::numeric_limits<double>::infinity()};  // straight extension beyond this parameter

  double lateral(double r) const
  {
    if (r <= r_end) {
      return clothoid::eval(curve, r).value;
    }
    return clothoid::eval(curve, r_end).value + (r - r_end) * clothoid::slope(curve, r_end);
  }
  double slope_at(double r) const { return clothoid::slope(curve, std::min(r, r_end)); }
  double curvature_at(double r) const { return r <= r_end ? clothoid::eval(curve, r).curvature : 0.0; }

  Vec2 world_point(double r) const
  {
    const double f = lateral(r);
    const double c = std::cos(frame.psi);
    const double s = std::sin(frame.psi);
    return {frame.x + c * r - s * f, frame.y + s * r + c * f};
  }

  /// Curve parameter whose world X equals x_world (Newton on the cubic).
  double param_at_world_x(double x_world) const
  {
    const double c = std::cos(frame.psi);
    const double s = std::sin(frame.psi);
    double r = (x_world - frame.x) / c;
    for (int it = 0; it < 8; ++it) {
      const double g = frame.x + c * r - s * lateral(r) - x_world;
      const double dg = c - s * slope_at(r);
      if (std::abs(dg) < 1e-9) {
        break;
      }
      const double dr = g / dg;
      r -= dr;
      if (std::abs(dr) < 1e-12) {
        break;
      }
    }
    return r;
  }
};

/// Samples the path at the stations the ego reaches at constant speed:
/// Y from the curve, zero sideslip, yaw rate = curvature * V.
inline Reference build_reference(const CurvePath & path, const VehicleState & state, int n_p, double t_s)
{
  if (n_p < 1) {
    throw EsppError("reference: n_p must be positive");
  }
  Reference ref;
  ref.y_d.reserve(static_cast<std::size_t>(n_p));
  for (int k = 1; k <= n_p; ++k) {
    const double x_k = state.x + static_cast<double>(k) * state.v * t_s;
    const double r = path.param_at_world_x(x_k);
    const double kappa = path.curvature_at(r);
    ref.y_d.emplace_back(path.world_point(r).y(), 0.0, kappa * state.v);
  }
  return ref;
}

/// Cubic that starts at the ego and joins the target path at the lookahead
/// distance with matching offset and slope. The start heading interpolates
/// between the ego heading (alignment 0) and the target heading at the
/// ego's station (alignment 1).
inline CurvePath connecting_path(
  const VehicleState & state, const CurvePath & target, double lookahead, double path_alignment = 0.5)
{
  if (!(lookahead > 0.0)) {
    throw EsppError("connecting path: lookahead must be positive");
  }
  if (!(path_alignment >= 0.0 && path_alignment <= 1.0)) {
    throw EsppError("connecting path: alignment must lie in [0, 1]");
  }
  const double local_heading = target.frame.psi + std::atan(target.slope_at(target.param_at_world_x(state.x)));
  const double start_heading = state.psi + path_alignment * (local_heading - state.psi);
  const double c = std::cos(start_heading);
  const double s = std::sin(start_heading);
  const double r = target.param_at_world_x(state.x + lookahead * c);
  const Vec2 join = target.world_point(r);
  const double join_heading = target.frame.psi + std::atan(target.slope_at(r));
  const double dx = join.x() - state.x;
  const double dy = join.y() - state.y;
  const double xv = c * dx + s * dy;
  const double yv = -s * dx + c * dy;
  const double sv = std::tan(join_heading - start_heading);
  if (!(xv > 1e-6)) {
    throw EsppError("connecting path: join point is not ahead of the vehicle");
  }
  const clothoid::Coefficients k{0.0, 0.0, (3.0 * yv - sv * xv) / (xv * xv), (sv * xv - 2.0 * yv) / (xv * xv * xv)};
  return CurvePath{Pose2{state.x, state.y, start_heading}, k, xv};
}

struct BuiltQp
{
  qp::QpProblem problem;
  qp::QpProblem relaxed;  // same problem without the hard state rows
  int n_c{0};
  double u_prev{0.0};
};

/// Condensed QP over z = [du_0 .. du_{n_c-1}, eps].
inline BuiltQp build_qp(
  const VehicleState & state, const Reference & ref, const vehicle::DiscreteSS & model, const MpcConfig & cfg,
  const OutputBounds & bounds, double u_prev)
{
  cfg.validate();
  if (static_cast<int>(ref.y_d.size()) != cfg.n_p) {
    throw EsppError("mpc: reference length must equal n_p");
  }
  const int nc = cfg.n_c;
  const int nz = nc + 1;
  const Eigen::Matrix4d & A = model.A;
  const Eigen::Vector4d & B = model.B;
  const Eigen::Matrix<double, 3, 4> & C = model.C;
  const Eigen::Matrix3d Q = cfg.q.asDiagonal();

  Eigen::Vector4d a = vehicle::lateral_state(state);
  MatrixXd M = MatrixXd::Zero(4, nc);
  MatrixXd H = MatrixXd::Zero(nz, nz);
  VectorXd f = VectorXd::Zero(nz);
  std::vector<Eigen::Vector4d> free_resp;
  std::vector<MatrixXd> forced;
  free_resp.reserve(static_cast<std::size_t>(cfg.n_p));
  forced.reserve(static_cast<std::size_t>(cfg.n_p));
  for (int k = 1; k <= cfg.n_p; ++k) {
    a = A * a + B * u_prev;
    MatrixXd e = MatrixXd::Zero(1, nc);
    e.leftCols(std::min(k - 1, nc - 1) + 1).setOnes();
    M = A * M + B * e;
    const MatrixXd CM = C * M;
    const Eigen::Vector3d err = C * a - ref.y_d[static_cast<std::size_t>(k - 1)];
    H.topLeftCorner(nc, nc) += 2.0 * CM.transpose() * Q * CM;
    f.head(nc) += 2.0 * CM.transpose() * Q * err;
    free_resp.push_back(a);
    forced.push_back(M);
  }
  H.topLeftCorner(nc, nc) += 2.0 * cfg.r * MatrixXd::Identity(nc, nc);
  f(nc) = cfg.lambda;

  VectorXd lb(nz);
  VectorXd ub(nz);
  lb.head(nc).setConstant(-cfg.du_max);
  ub.head(nc).setConstant(cfg.du_max);
  lb(nc) = 0.0;
  ub(nc) = cfg.slack_max;

  // Soft rows: input magnitude and Y bounds.
  std::vector<VectorXd> soft_rows;
  std::vector<double> soft_rhs;
  for (int j = 0; j < nc; ++j) {
    VectorXd g = VectorXd::Zero(nz);
    g.head(j + 1).setOnes();
    soft_rows.push_back(g);
    soft_rhs.push_back(cfg.u_max - u_prev);
    soft_rows.push_back(-g);
    soft_rhs.push_back(cfg.u_max + u_prev);
  }
  std::vector<VectorXd> hard_rows;
  std::vector<double> hard_rhs;
  auto add_pair = [nz, nc](
                    std::vector<VectorXd> & rows, std::vector<double> & rhs, const MatrixXd & sens, double offset,
                    double lo, double hi, bool slack) {
    VectorXd g = VectorXd::Zero(nz);
    g.head(nc) = sens.row(0).transpose();
    if (slack) {
      g(nc) = -1.0;
    }
    rows.push_back(g);
    rhs.push_back(hi - offset);
    VectorXd h = VectorXd::Zero(nz);
    h.head(nc) = -sens.row(0).transpose();
    if (slack) {
      h(nc) = -1.0;
    }
    rows.push_back(h);
    rhs.push_back(offset - lo);
  };
  for (int k = 0; k < cfg.n_p; ++k) {
    const auto & ak = free_resp[static_cast<std::size_t>(k)];
    const auto & Mk = forced[static_cast<std::size_t>(k)];
    add_pair(soft_rows, soft_rhs, Mk.row(0), ak(0), bounds.y_min(0), bounds.y_max(0), true);
    add_pair(hard_rows, hard_rhs, Mk.row(1), ak(1), bounds.y_min(1), bounds.y_max(1), false);
    add_pair(hard_rows, hard_rhs, Mk.row(3), ak(3), bounds.y_min(2), bounds.y_max(2), false);
    add_pair(hard_rows, hard_rhs, Mk.row(2), ak(2), -cfg.psi_max, cfg.psi_max, false);
  }

  auto assemble = [&](bool with_hard) {
    qp::QpProblem p;
    p.H = H;
    p.f = f;
    p.lb = lb;
    p.ub = ub;
    const std::size_t m = soft_rows.size() + (with_hard ? hard_rows.size() : 0);
    p.G = MatrixXd(static_cast<Eigen::Index>(m), nz);
    p.h = VectorXd(static_cast<Eigen::Index>(m));
    Eigen::Index i = 0;
    for (std::size_t r = 0; r < soft_rows.size(); ++r, ++i) {
      p.G.row(i) = soft_rows[r].transpose();
      p.h(i) = soft_rhs[r];
    }
    if (with_hard) {
      for (std::size_t r = 0; r < hard_rows.size(); ++r, ++i) {
        p.G.row(i) = hard_rows[r].transpose();
        p.h(i) = hard_rhs[r];
      }
    }
    return p;
  };
  return {assemble(true), assemble(false), nc, u_prev};
}

struct StepResult
{
  double delta_f{0.0};
  double du0{0.0};
  double epsilon{0.0};
  double cost{0.0};
  int active_count{0};
  int iterations{0};
  bool relaxed{false};  // hard state rows had to be dropped
  VectorXd z;
};

/// Solves the QP and returns the first command. Falls back to the problem
/// without hard state rows when those make it infeasible.
inline StepResult solve_step(const BuiltQp & built)
{
  auto sol = qp::solve(built.problem);
  StepResult out;
  if (sol.status == qp::QpStatus::Infeasible) {
    sol = qp::solve(built.relaxed);
    out.relaxed = true;
  }
  if (sol.status != qp::QpStatus::Optimal) {
    throw EsppError(
      std::string("mpc: QP solve failed (") + qp::to_string(sol.status) + ", " + std::to_string(sol.iterations) +
      " iterations, stationarity " + std::to_string(sol.kkt.stationarity) + ")");
  }
  out.z = sol.z;
  out.du0 = sol.z(0);
  out.epsilon = sol.z(built.n_c);
  out.delta_f = built.u_prev + out.du0;
  out.cost = sol.objective;
  out.active_count = sol.active_count;
  out.iterations = sol.iterations;
  return out;
}

/// Stateful wrapper that remembers the previous command.
class MpcController
{
public:
  MpcController(MpcConfig cfg, vehicle::VehicleParams params) : cfg_(cfg), params_(params) { cfg_.validate(); }

  StepResult compute(const VehicleState & state, const Reference & ref, const OutputBounds & bounds)
  {
    const double v = std::max(state.v, params_.min_lateral_speed);
    const auto model = vehicle::discretize(params_, v, cfg_.t_s);
    VehicleState s = state;
    s.v = v;
    const auto built = build_qp(s, ref, model, cfg_, bounds, u_prev_);
    auto res = solve_step(built);
    // Guard against round-off beyond the actuator limits.
    res.delta_f = std::clamp(res.delta_f, -cfg_.u_max, cfg_.u_max);
    res.delta_f = std::clamp(res.delta_f, u_prev_ - cfg_.du_max, u_prev_ + cfg_.du_max);
    u_prev_ = res.delta_f;
    return res;
  }

  double last_command() const { return u_prev_; }
  void reset(double u = 0.0) { u_prev_ = u; }
  const MpcConfig & config() const { return cfg_; }

private:
  MpcConfig cfg_;
  vehicle::VehicleParams params_;
  double u_prev_{0.0};
};

}  // namespace espp::mpc

#endif  // ESPP__MPC_CONTROLLER_HPP_
