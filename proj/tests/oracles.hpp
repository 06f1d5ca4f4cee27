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

// Test-only reference implementations. Nothing here calls into the code
// paths these oracles check.

#ifndef ESPP_TESTS__ORACLES_HPP_
#define ESPP_TESTS__ORACLES_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>
#include <limits>
#include <optional>
#include <random>
#include <vector>

namespace oracle
{
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct EnumResult
{
  VectorXd z;
  double objective{std::numeric_limits<double>::infinity()};
};

/// Exhaustive active-set enumeration for min 1/2 z'Hz + f'z s.t. A z <= b.
/// Tries every subset of at most n rows as the active set, solves the
/// equality-constrained KKT system and keeps the best primal/dual feasible
/// point. Exponential, fine for a handful of rows.
inline std::optional<EnumResult> enumerate_active_sets(
  const MatrixXd & H, const VectorXd & f, const MatrixXd & A, const VectorXd & b)
{
  const int n = static_cast<int>(f.size());
  const int m = static_cast<int>(A.rows());
  std::optional<EnumResult> best;
  for (unsigned mask = 0; mask < (1u << m); ++mask) {
    std::vector<int> act;
    for (int i = 0; i < m; ++i) {
      if (mask & (1u << i)) {
        act.push_back(i);
      }
    }
    const int k = static_cast<int>(act.size());
    if (k > n) {
      continue;
    }
    MatrixXd K = MatrixXd::Zero(n + k, n + k);
    VectorXd rhs = VectorXd::Zero(n + k);
    K.topLeftCorner(n, n) = H;
    rhs.head(n) = -f;
    for (int a = 0; a < k; ++a) {
      K.block(n + a, 0, 1, n) = A.row(act[a]);
      K.block(0, n + a, n, 1) = A.row(act[a]).transpose();
      rhs(n + a) = b(act[a]);
    }
    Eigen::FullPivLU<MatrixXd> lu(K);
    if (!lu.isInvertible()) {
      continue;
    }
    const VectorXd sol = lu.solve(rhs);
    const VectorXd z = sol.head(n);
    const VectorXd lam = sol.tail(k);
    if (k > 0 && lam.minCoeff() < -1e-10) {
      continue;
    }
    if (m > 0 && (A * z - b).maxCoeff() > 1e-10) {
      continue;
    }
    const double obj = 0.5 * z.dot(H * z) + f.dot(z);
    if (!best || obj < best->objective) {
      best = EnumResult{z, obj};
    }
  }
  return best;
}

/// Random symmetric positive definite matrix with eigenvalues in [lo, hi].
inline MatrixXd random_spd(int n, std::mt19937_64 & rng, double lo = 0.2, double hi = 5.0)
{
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> ud(lo, hi);
  MatrixXd M(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      M(i, j) = nd(rng);
    }
  }
  Eigen::HouseholderQR<MatrixXd> qr(M);
  const MatrixXd Q = qr.householderQ();
  VectorXd ev(n);
  for (int i = 0; i < n; ++i) {
    ev(i) = ud(rng);
  }
  MatrixXd H = Q * ev.asDiagonal() * Q.transpose();
  return 0.5 * (H + H.transpose());
}

// Stop-point search reference, written from the region definitions.
inline bool in_sector(const Eigen::Vector2d & p, const Eigen::Vector2d & apex, double heading, double half, double radius)
{
  const double dx = p.x() - apex.x();
  const double dy = p.y() - apex.y();
  if (dx * dx + dy * dy > radius * radius) {
    return false;
  }
  if (dx == 0.0 && dy == 0.0) {
    return true;
  }
  // Angle between the offset and the bisector via the dot product.
  const double c = (dx * std::cos(heading) + dy * std::sin(heading)) / std::hypot(dx, dy);
  return std::acos(std::clamp(c, -1.0, 1.0)) <= half + 1e-12;
}

inline std::pair<double, double> sector_shadow(const Eigen::Vector2d & apex, double heading, double half, double radius)
{
  double lo = apex.x();
  double hi = apex.x();
  const int n = 200000;
  for (int i = 0; i <= n; ++i) {
    const double a = heading - half + 2.0 * half * i / n;
    const double x = apex.x() + radius * std::cos(a);
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  return {lo, hi};
}

struct StopGeometry
{
  Eigen::Vector2d p_bp;
  double heading;
  double d_brake;
  double y_lo;
  double y_hi;
  Eigen::Vector2d apex;
  double obs_heading;
  double half;
  double radius;
};

inline std::optional<Eigen::Vector2d> stop_point(const StopGeometry & g, double res, bool constrained)
{
  const auto [lo, hi] = sector_shadow(g.apex, g.obs_heading, g.half, g.radius);
  std::vector<double> xs;
  const int nx = static_cast<int>(std::ceil(g.d_brake / res - 1e-9));
  for (int k = 1; k < nx; ++k) {
    xs.push_back(g.p_bp.x() + k * res);
  }
  xs.push_back(g.p_bp.x() + g.d_brake);
  std::vector<double> ys;
  const int ny = static_cast<int>(std::ceil((g.y_hi - g.y_lo) / res - 1e-9));
  for (int k = 0; k < ny; ++k) {
    ys.push_back(g.y_hi - k * res);
  }
  ys.push_back(g.y_lo);
  std::optional<Eigen::Vector2d> best;
  for (double x : xs) {
    for (double y : ys) {
      if (constrained) {
        const double theta = std::atan2(y - g.p_bp.y(), x - g.p_bp.x());
        if (!(g.heading < theta && theta < 0.0)) {
          continue;
        }
        const double x_ip = g.p_bp.x() + (y - g.p_bp.y()) / std::tan(g.heading);
        if (x_ip > x) {
          continue;
        }
        const double len = std::hypot(x_ip - g.p_bp.x(), y - g.p_bp.y()) + (x - x_ip);
        const bool in_s2 = in_sector({x, y}, g.apex, g.obs_heading, g.half, g.radius);
        const bool s1 = !in_s2 && x > hi;
        const bool s4 = !in_s2 && x < lo;
        if (!((s1 && len >= g.d_brake) || (s4 && len < g.d_brake))) {
          continue;
        }
      }
      const Eigen::Vector2d c(x, y);
      if (!best) {
        best = c;
        continue;
      }
      const double sc = std::abs(x - g.p_bp.x()) + std::abs(y - g.p_bp.y());
      const double sb = std::abs(best->x() - g.p_bp.x()) + std::abs(best->y() - g.p_bp.y());
      if (sc > sb + 1e-12 || (std::abs(sc - sb) <= 1e-12 &&
                              (x > best->x() || (x == best->x() && std::abs(y - g.p_bp.y()) >
                                                                      std::abs(best->y() - g.p_bp.y()))))) {
        best = c;
      }
    }
  }
  return best;
}

// Reference right-hand side for [Y, beta, psi, psi_dot], written from the
// force balance rather than the closed-form coefficients.
template <typename Params>
inline std::array<double, 4> bicycle_rhs(const std::array<double, 4> & x, double v, double delta, const Params & p)
{
  const double beta = x[1];
  const double r = x[3];
  const double fyf = p.c_f * (delta - beta - p.l_f * r / v);
  const double fyr = p.c_r * (-beta + p.l_r * r / v);
  const double beta_dot = (fyf + fyr) / (p.m * v) - r;
  const double r_dot = (p.l_f * fyf - p.l_r * fyr) / p.i_z;
  return {v * (beta + x[2]), beta_dot, r, r_dot};
}

template <typename Params>
inline std::array<double, 4> bicycle_rk4(std::array<double, 4> x, double v, double delta, const Params & p, double h, int n)
{
  auto axpy = [](const std::array<double, 4> & a, double s, const std::array<double, 4> & b) {
    return std::array<double, 4>{a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2], a[3] + s * b[3]};
  };
  for (int i = 0; i < n; ++i) {
    const auto k1 = bicycle_rhs(x, v, delta, p);
    const auto k2 = bicycle_rhs(axpy(x, h / 2, k1), v, delta, p);
    const auto k3 = bicycle_rhs(axpy(x, h / 2, k2), v, delta, p);
    const auto k4 = bicycle_rhs(axpy(x, h, k3), v, delta, p);
    for (int j = 0; j < 4; ++j) {
      x[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    }
  }
  return x;
}

/// Flat parameter set for field_value.
struct FieldParams
{
  std::vector<double> dividers;
  double a_lane{0.0};
  double zeta{1.0};
  double lower_edge{0.0};
  double upper_edge{0.0};
  double eta{0.0};
  double clamp{0.0};
  double a_obs{0.0};
  double w1{1.0};
  double obs_x{0.0};
  double obs_y{0.0};
  double obs_v{0.0};
  double obs_a_long{0.0};
  double obs_a_lat{0.0};
  double sigma_s0{1.0};
  double sigma_d0{1.0};
  double k_s{0.0};
  double k_d{0.0};
  double headway{0.0};
  double target_x{0.0};
  double target_y{0.0};
  double target_scale{1.0};
};

/// Normal-mode field: lane Gaussians, clamped inverse-square edges, two
/// obstacle Gaussians written as products of 1-D normal densities, and the
/// Manhattan target term.
inline double field_value(double x, double y, const FieldParams & q)
{
  const double pi = 3.14159265358979323846;
  const auto normal_pdf = [pi](double z, double mean, double sd) {
    const double t = (z - mean) / sd;
    return std::exp(-0.5 * t * t) / (sd * std::sqrt(2.0 * pi));
  };
  double lane = 0.0;
  for (double yc : q.dividers) {
    lane += q.a_lane * std::exp(-(y - yc) * (y - yc) / (2.0 * q.zeta * q.zeta));
  }
  const double d_lo = std::max(y - q.lower_edge, q.clamp);
  const double d_hi = std::max(q.upper_edge - y, q.clamp);
  const double edges = q.eta / (2.0 * d_lo * d_lo) + q.eta / (2.0 * d_hi * d_hi);
  const double ss = q.sigma_s0 + q.k_s * std::abs(q.obs_a_long);
  const double sd = q.sigma_d0 + q.k_d * std::abs(q.obs_a_lat);
  const double lead = normal_pdf(x, q.obs_x, ss) * normal_pdf(y, q.obs_y, sd);
  const double trail = normal_pdf(x, q.obs_x - q.headway * q.obs_v, ss) * normal_pdf(y, q.obs_y, sd);
  const double obstacle = q.a_obs * (q.w1 * lead + (1.0 - q.w1) * trail);
  const double target = (std::abs(x - q.target_x) + std::abs(y - q.target_y)) / q.target_scale;
  return lane + edges + obstacle + target;
}

}  // namespace oracle

#endif  // ESPP_TESTS__ORACLES_HPP_
