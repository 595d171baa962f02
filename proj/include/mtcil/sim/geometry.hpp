// Copyright 2026 The mtcil Authors
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

#pragma once

#include <array>
#include <cmath>

#include "mtcil/common.hpp"

// World frame: x points east, y points south, headings grow clockwise when
// viewed from above. A positive steering command therefore turns right.
namespace mtcil::sim {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(Vec2 a, double s) { return {a.x * s, a.y * s}; }
  friend Vec2 operator*(double s, Vec2 a) { return {a.x * s, a.y * s}; }
  friend bool operator==(const Vec2&, const Vec2&) = default;

  double norm() const { return std::hypot(x, y); }
  bool finite() const { return std::isfinite(x) && std::isfinite(y); }
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double distance(Vec2 a, Vec2 b) { return (a - b).norm(); }

// Wraps into (-pi, pi].
inline double wrap_angle(double a) {
  double r = std::remainder(a, 2.0 * kPi);
  if (r <= -kPi) r += 2.0 * kPi;
  return r;
}

inline Vec2 heading_vector(double heading) { return {std::cos(heading), std::sin(heading)}; }
inline Vec2 right_normal(double heading) { return {-std::sin(heading), std::cos(heading)}; }

inline Vec2 rotate(Vec2 v, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

struct Pose2D {
  Vec2 position;
  double heading = 0.0;
  friend bool operator==(const Pose2D&, const Pose2D&) = default;
};

// Expresses a world point in the frame of `pose`: x forward, y to the right.
inline Vec2 to_local(const Pose2D& pose, Vec2 world) {
  const Vec2 d = world - pose.position;
  return {dot(d, heading_vector(pose.heading)), dot(d, right_normal(pose.heading))};
}

inline Vec2 to_world(const Pose2D& pose, Vec2 local) {
  return pose.position + heading_vector(pose.heading) * local.x +
         right_normal(pose.heading) * local.y;
}

struct OrientedBox {
  Pose2D pose;
  Vec2 half_extents;

  std::array<Vec2, 4> corners() const {
    const double hx = half_extents.x, hy = half_extents.y;
    return {to_world(pose, {hx, hy}), to_world(pose, {hx, -hy}), to_world(pose, {-hx, -hy}),
            to_world(pose, {-hx, hy})};
  }

  // Distance from p to the box; zero inside.
  double distance_to(Vec2 p) const {
    const Vec2 l = to_local(pose, p);
    const double dx = std::max(std::abs(l.x) - half_extents.x, 0.0);
    const double dy = std::max(std::abs(l.y) - half_extents.y, 0.0);
    return std::hypot(dx, dy);
  }

  bool intersects_disc(Vec2 center, double radius) const {
    return distance_to(center) <= radius;
  }
};

// Distance from p to segment [a, b]; also reports the clamped parameter.
inline double segment_distance(Vec2 p, Vec2 a, Vec2 b, double* t_out = nullptr) {
  const Vec2 ab = b - a;
  const double len2 = dot(ab, ab);
  double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  if (t_out) *t_out = t;
  return distance(p, a + ab * t);
}

}  // namespace mtcil::sim
