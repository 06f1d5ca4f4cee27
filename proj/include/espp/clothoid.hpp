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

#ifndef ESPP__CLOTHOID_HPP_
#define ESPP__CLOTHOID_HPP_

#include "espp/qp_core.hpp"
#include "espp/types.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <set>
#include <vector>

namespace espp::clothoid
{
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Cubic approximation of a clothoid: f(r) = c0 + c1 r + c2 r^2 + c3 r^3.
struct Coefficients
{
  double c0{0.0};  // lateral offset [m]
  double c1{0.0};  // heading error [rad]
  double c2{0.0};  // half curvature
  double c3{0.0};  // curvature rate / 6

  Eigen::Vector4d vec() const { return {c0, c1, c2, c3}; }
  static Coefficients from(const Eigen::Vector4d & v) { return {v(0), v(1), v(2), v(3)}; }
  bool finite() const { return vec().allFinite(); }
};

struct Sample
{
  double value{0.0};      // lateral position [m]
  double curvature{0.0};  // [1/m]
};

inline Sample eval(const Coefficients & c, double r)
{
  return {c.c0 + r * (c.c1 + r * (c.c2 + r * c.c3)), 6.0 * c.c3 * r + 2.0 * c.c2};
}

inline double slope(const Coefficients & c, double r)
{
  return c.c1 + r * (2.0 * c.c2 + 3.0 * c.c3 * r);
}

/// World to vehicle frame: translate by the negated ego position, then
/// rotate by the negated heading.
inline std::vector<Vec2> world_to_vehicle(const std::vector<Vec2> & pts, const Pose2 & ego)
{
  const double cs = std::cos(-ego.psi);
  const double sn = std::sin(-ego.psi);
  std::vector<Vec2> out;
  out.reserve(pts.size());
  for (const auto & p : pts) {
    const double dx = p.x() - ego.x;
    const double dy = p.y() - ego.y;
    out.emplace_back(cs * dx - sn * dy, sn * dx + cs * dy);
  }
  return out;
}

inline std::vector<Vec2> vehicle_to_world(const std::vector<Vec2> & pts, const Pose2 & ego)
{
  const double cs = std::cos(ego.psi);
  const double sn = std::sin(ego.psi);
  std::vector<Vec2> out;
  out.reserve(pts.size());
  for (const auto & p : pts) {
    out.emplace_back(ego.x + cs * p.x() - sn * p.y(), ego.y + sn * p.x() + cs * p.y());
  }
  return out;
}

/// Bounds of the constrained fit. c2 and c3 limits are derived from the
/// yaw-rate and curvature-rate limits.
struct FitBounds
{
  double e_y_min{-0.7};
  double e_y_max{0.7};
  double e_psi_min{-0.05};
  double e_psi_max{0.05};
  double omega_max{4.9};       // [rad/s]
  double upsilon{0.75};        // road friction coefficient
  double g{9.81};              // [m/s^2]
  double kappa_dot_max{0.1};   // [1/(m s)]
  double r_min{6.12};          // minimum turning radius [m]

  double c2_bound() const { return omega_max * omega_max / (2.0 * upsilon * g); }
  double c3_bound() const { return kappa_dot_max / 6.0; }
  double kappa_max() const { return 1.0 / r_min; }

  Eigen::Vector4d lower() const { return {e_y_min, e_psi_min, -c2_bound(), -c3_bound()}; }
  Eigen::Vector4d upper() const { return {e_y_max, e_psi_max, c2_bound(), c3_bound()}; }

  void validate() const
  {
    if (!(e_y_min < e_y_max) || !(e_psi_min < e_psi_max)) {
      throw ConfigError("fit bounds: min must be below max");
    }
    if (!(omega_max > 0.0 && upsilon > 0.0 && g > 0.0 && kappa_dot_max > 0.0 && r_min > 0.0)) {
      throw ConfigError("fit bounds: omega_max, upsilon, g, kappa_dot_max and r_min must be positive");
    }
  }
};

namespace detail
{
inline MatrixXd vandermonde(const std::vector<Vec2> & pts)
{
  MatrixXd X(static_cast<Eigen::Index>(pts.size()), 4);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double x = pts[i].x();
    X.row(static_cast<Eigen::Index>(i)) << 1.0, x, x * x, x * x * x;
  }
  return X;
}

inline VectorXd ordinates(const std::vector<Vec2> & pts)
{
  VectorXd F(static_cast<Eigen::Index>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) {
    F(static_cast<Eigen::Index>(i)) = pts[i].y();
  }
  return F;
}

inline void require_fit_input(const std::vector<Vec2> & pts)
{
  if (pts.size() < 4) {
    throw EsppError("clothoid fit needs at least 4 points");
  }
  std::set<double> xs;
  for (const auto & p : pts) {
    if (!p.allFinite()) {
      throw EsppError("clothoid fit: non-finite point");
    }
    xs.insert(p.x());
  }
  if (xs.size() < 4) {
    throw EsppError("clothoid fit: rank-deficient design (fewer than 4 distinct x)");
  }
}

inline void require_weights(const VectorXd & w, std::size_t n)
{
  if (static_cast<std::size_t>(w.size()) != n) {
    throw EsppError("clothoid fit: weight count does not match point count");
  }
  if ((w.array() < 0.0).any() || !w.allFinite()) {
    throw EsppError("clothoid fit: weights must be finite and nonnegative");
  }
  if ((w.array() > 0.0).count() < 4) {
    throw EsppError("clothoid fit: at least 4 positive weights required");
  }
}
}  // namespace detail

/// Ordinary least squares fit over vehicle-frame x.
inline Coefficients fit_ls(const std::vector<Vec2> & pts)
{
  detail::require_fit_input(pts);
  const MatrixXd X = detail::vandermonde(pts);
  Eigen::ColPivHouseholderQR<MatrixXd> qr(X);
  if (qr.rank() < 4) {
    throw EsppError("clothoid fit: rank-deficient design");
  }
  return Coefficients::from(qr.solve(detail::ordinates(pts)));
}

/// Weighted fit with diagonal W: minimizes ||W (X c - F)||^2.
inline Coefficients fit_weighted(const std::vector<Vec2> & pts, const VectorXd & w)
{
  detail::require_fit_input(pts);
  detail::require_weights(w, pts.size());
  const MatrixXd WX = w.asDiagonal() * detail::vandermonde(pts);
  const VectorXd WF = w.asDiagonal() * detail::ordinates(pts);
  const Eigen::Matrix4d N = WX.transpose() * WX;
  Eigen::FullPivLU<Eigen::Matrix4d> lu(N);
  if (!lu.isInvertible()) {
    throw EsppError("clothoid fit: weighted normal matrix is singular");
  }
  return Coefficients::from(lu.solve(WX.transpose() * WF));
}

/// Weighted fit subject to the coefficient box. Shares its objective with
/// fit_weighted so an interior optimum reproduces it.
inline Coefficients fit_qp(const std::vector<Vec2> & pts, const VectorXd & w, const FitBounds & bounds)
{
  bounds.validate();
  detail::require_fit_input(pts);
  detail::require_weights(w, pts.size());
  const MatrixXd WX = w.asDiagonal() * detail::vandermonde(pts);
  const VectorXd WF = w.asDiagonal() * detail::ordinates(pts);
  const MatrixXd H = WX.transpose() * WX;
  const VectorXd f = -WX.transpose() * WF;
  const auto sol = qp::solve_box(H, f, bounds.lower(), bounds.upper());
  return Coefficients::from(sol.z);
}

/// Largest |curvature| of the curve over [0, x_end].
inline double max_abs_curvature(const Coefficients & c, double x_end)
{
  // Curvature is linear in r, so the extremes sit at the interval ends.
  return std::max(std::abs(eval(c, 0.0).curvature), std::abs(eval(c, x_end).curvature));
}

/// Slope window lo <= f'(r) <= hi imposed at one station.
struct SlopeWindow
{
  double r{0.0};
  double lo{0.0};
  double hi{0.0};
};

/// fit_qp plus the minimum-radius limit |kappa(r)| <= 1/R_min over the
/// given stations and an optional slope window. Falls back to the general
/// QP only when the box fit violates one of them.
inline Coefficients fit_qp_curvature_limited(
  const std::vector<Vec2> & pts, const VectorXd & w, const FitBounds & bounds, double x_end, int stations = 100,
  const std::optional<SlopeWindow> & terminal = std::nullopt)
{
  if (terminal && !(terminal->lo <= terminal->hi)) {
    throw EsppError("clothoid fit: empty slope window");
  }
  const Coefficients boxed = fit_qp(pts, w, bounds);
  const double kmax = bounds.kappa_max();
  const auto slope_ok = [&](const Coefficients & c) {
    if (!terminal) {
      return true;
    }
    const double s = slope(c, terminal->r);
    return s >= terminal->lo && s <= terminal->hi;
  };
  if (max_abs_curvature(boxed, x_end) <= kmax && slope_ok(boxed)) {
    return boxed;
  }
  const MatrixXd WX = w.asDiagonal() * detail::vandermonde(pts);
  const VectorXd WF = w.asDiagonal() * detail::ordinates(pts);
  qp::QpProblem p;
  p.H = WX.transpose() * WX;
  p.f = -WX.transpose() * WF;
  p.lb = bounds.lower();
  p.ub = bounds.upper();
  const int k = std::max(stations, 2);
  const int rows = 2 * k + (terminal ? 2 : 0);
  p.G = MatrixXd::Zero(rows, 4);
  p.h = VectorXd::Constant(rows, kmax);
  for (int i = 0; i < k; ++i) {
    const double r = x_end * static_cast<double>(i) / static_cast<double>(k - 1);
    p.G(2 * i, 2) = 2.0;
    p.G(2 * i, 3) = 6.0 * r;
    p.G(2 * i + 1, 2) = -2.0;
    p.G(2 * i + 1, 3) = -6.0 * r;
  }
  if (terminal) {
    const double r = terminal->r;
    const Eigen::RowVector4d d(0.0, 1.0, 2.0 * r, 3.0 * r * r);
    p.G.row(2 * k) = d;
    p.h(2 * k) = terminal->hi;
    p.G.row(2 * k + 1) = -d;
    p.h(2 * k + 1) = -terminal->lo;
  }
  const auto sol = qp::solve(p);
  if (sol.status != qp::QpStatus::Optimal) {
    throw EsppError("clothoid fit: curvature-limited QP did not converge");
  }
  return Coefficients::from(sol.z);
}

}  // namespace espp::clothoid

#endif  // ESPP__CLOTHOID_HPP_
