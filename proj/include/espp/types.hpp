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

#ifndef ESPP__TYPES_HPP_
#define ESPP__TYPES_HPP_

#include <Eigen/Core>

#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>

namespace espp
{
using Vec2 = Eigen::Vector2d;

/// Base class of every error thrown by the library.
class EsppError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Raised for invalid configuration values (bad ranges, inconsistent bounds).
class ConfigError : public EsppError
{
public:
  using EsppError::EsppError;
};

/// Planar pose: position plus heading (rad, CCW from +X).
struct Pose2
{
  double x{0.0};
  double y{0.0};
  double psi{0.0};
};

/// Ego state used across the planner and controller.
///   x, y    world position of the CG [m]
///   beta    sideslip [rad]
///   psi     heading [rad]
///   psi_dot yaw rate [rad/s]
///   v       longitudinal speed [m/s]
struct VehicleState
{
  double x{0.0};
  double y{0.0};
  double beta{0.0};
  double psi{0.0};
  double psi_dot{0.0};
  double v{0.0};

  Vec2 position() const { return {x, y}; }
  Pose2 pose() const { return {x, y, psi}; }
};

/// Obstacle vehicle as seen by the planner.
struct ObstacleState
{
  double x{0.0};
  double y{0.0};
  double psi{0.0};
  double v{0.0};
  double a_long{0.0};
  double a_lat{0.0};
  std::optional<double> delta_psi_max;  // heading-change bound [rad]; planner default when unset

  Vec2 position() const { return {x, y}; }
};

inline double wrap_angle(double a)
{
  return std::remainder(a, 2.0 * std::numbers::pi);
}

}  // namespace espp

#endif  // ESPP__TYPES_HPP_
