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

#ifndef ESPP__VEHICLE_MODEL_HPP_
#define ESPP__VEHICLE_MODEL_HPP_

#include "espp/types.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <optional>

namespace espp::vehicle
{
struct VehicleParams
{
  double m{1530.0};       // [kg]
  double i_z{2315.0};     // [kg m^2]
  double l_f{1.232};      // CG to front axle [m]
  double l_r{1.468};      // CG to rear axle [m]
  double c_f{66900.0};    // front cornering stiffness [N/rad]
  double c_r{66900.0};    // rear cornering stiffness [N/rad]
  double l_w{1.6};        // body width [m]
  double length{4.7};     // body length [m]
  double min_lateral_speed{0.1};  // lateral dynamics frozen below this speed [m/s]

  void validate() const
  {
    if (!(m > 0.0 && i_z > 0.0 && l_f > 0.0 && l_r > 0.0 && c_f > 0.0 && c_r > 0.0 && l_w > 0.0 && length > 0.0)) {
      throw ConfigError("vehicle parameters must be positive");
    }
    if (!(min_lateral_speed > 0.0)) {
      throw ConfigError("vehicle: min_lateral_speed must be positive");
    }
  }
};

struct Derivatives
{
  double beta_dot{0.0};
  double psi_ddot{0.0};
  double f_yf{0.0};
  double f_yr{0.0};
};

/// Linear single-track dynamics with linear tyres.
inline Derivatives continuous_derivatives(const VehicleState & s, double delta_f, const VehicleParams & p)
{
  if (s.v < p.min_lateral_speed) {
    return {};
  }
  const double v = s.v;
  Derivatives d;
  d.f_yf = p.c_f * (delta_f - s.beta - p.l_f * s.psi_dot / v);
  d.f_yr = p.c_r * (-s.beta + p.l_r * s.psi_dot / v);
  d.beta_dot = -(p.c_r + p.c_f) / (p.m * v) * s.beta +
               ((p.c_r * p.l_r - p.c_f * p.l_f) / (p.m * v * v) - 1.0) * s.psi_dot + p.c_f / (p.m * v) * delta_f;
  d.psi_ddot = (p.c_r * p.l_r - p.c_f * p.l_f) / p.i_z * s.beta -
               (p.c_r * p.l_r * p.l_r + p.c_f * p.l_f * p.l_f) / (p.i_z * v) * s.psi_dot + p.c_f * p.l_f / p.i_z * delta_f;
  return d;
}

/// Forward-Euler state space over x = [Y, beta, psi, psi_dot], y = [Y, beta, psi_dot].
struct DiscreteSS
{
  Eigen::Matrix4d A{Eigen::Matrix4d::Identity()};
  Eigen::Vector4d B{Eigen::Vector4d::Zero()};
  Eigen::Matrix<double, 3, 4> C{Eigen::Matrix<double, 3, 4>::Zero()};
  double t_s{0.01};
};

inline Eigen::Matrix<double, 3, 4> output_selector()
{
  Eigen::Matrix<double, 3, 4> C = Eigen::Matrix<double, 3, 4>::Zero();
  C(0, 0) = 1.0;
  C(1, 1) = 1.0;
  C(2, 3) = 1.0;
  return C;
}

inline DiscreteSS discretize(const VehicleParams & p, double v, double t_s)
{
  if (!(v > 0.0) || !(t_s > 0.0)) {
    throw EsppError("discretize: speed and sample time must be positive");
  }
  DiscreteSS ss;
  ss.t_s = t_s;
  auto & A = ss.A;
  A << 1.0, t_s * v, t_s * v, 0.0,
    0.0, 1.0 - t_s * (p.c_r + p.c_f) / (p.m * v), 0.0, t_s * (p.c_r * p.l_r - p.c_f * p.l_f) / (p.m * v * v) - t_s,
    0.0, 0.0, 1.0, t_s,
    0.0, t_s * (p.c_r * p.l_r - p.c_f * p.l_f) / p.i_z, 0.0,
    1.0 - t_s * (p.c_r * p.l_r * p.l_r + p.c_f * p.l_f * p.l_f) / (p.i_z * v);
  ss.B << 0.0, t_s * p.c_f / (p.m * v), 0.0, t_s * p.c_f * p.l_f / p.i_z;
  ss.C = output_selector();
  return ss;
}

inline Eigen::Vector4d lateral_state(const VehicleState & s)
{
  return {s.y, s.beta, s.psi, s.psi_dot};
}

/// One sample of the discrete model plus longitudinal motion. When braking
/// is given the speed drops by decel * t_s, floored at zero.
inline VehicleState step(
  const VehicleState & s, double delta_f, const VehicleParams & p, double t_s, std::optional<double> braking = std::nullopt)
{
  if (!(t_s > 0.0)) {
    throw EsppError("step: sample time must be positive");
  }
  VehicleState n = s;
  if (s.v >= p.min_lateral_speed) {
    const DiscreteSS ss = discretize(p, s.v, t_s);
    const Eigen::Vector4d x = ss.A * lateral_state(s) + ss.B * delta_f;
    n.y = x(0);
    n.beta = x(1);
    n.psi = x(2);
    n.psi_dot = x(3);
  } else {
    n.y = s.y + t_s * s.v * (s.beta + s.psi);
  }
  n.x = s.x + t_s * s.v * std::cos(s.psi);
  if (braking) {
    n.v = std::max(0.0, s.v - *braking * t_s);
  }
  return n;
}

}  // namespace espp::vehicle

#endif  // ESPP__VEHICLE_MODEL_HPP_
