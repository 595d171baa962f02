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

#include <cmath>
#include <optional>

#include "mtcil/common.hpp"
#include "mtcil/decision.hpp"
#include "mtcil/sim/world.hpp"

namespace mtcil::expert {

inline constexpr double kLookaheadBase = 4.0;
inline constexpr double kLookaheadGain = 0.3;
inline constexpr double kSpeedGain = 0.5;     // accel units per m/s of speed error
inline constexpr double kStopMargin = 2.0;    // metres kept to a yielded-to pedestrian
inline constexpr double kComfortDecel = 2.0;  // m/s^2 used to shape the approach speed
// Comfort limits keep every routine command at or below the 0.9 jerk threshold.
inline constexpr double kSteerLimit = 0.85;
inline constexpr double kThrottleLimit = 0.8;
inline constexpr double kBrakeLimit = 0.9;
inline constexpr double kAnticipation = 1.5;  // s of pedestrian walking looked ahead

// Pure pursuit toward a look-ahead point on the route.
inline double pure_pursuit_steer(const sim::EgoState& ego, const sim::Route& route) {
  const double lookahead = kLookaheadBase + kLookaheadGain * ego.speed;
  const auto proj = route.project(ego.pose.position);
  const sim::Vec2 target = route.point_at(proj.arc + lookahead);
  const sim::Vec2 d = target - ego.pose.position;
  const double alpha = sim::wrap_angle(std::atan2(d.y, d.x) - ego.pose.heading);
  const double dist = std::max(d.norm(), 1e-3);
  const double delta = std::atan(2.0 * ego.wheelbase * std::sin(alpha) / dist);
  return clip(delta / sim::kMaxSteer, -kSteerLimit, kSteerLimit);
}

namespace detail {

// Throttle/brake for a pedestrian `gap` metres ahead of the bumper. Returns
// nullopt when no braking is needed yet (the caller then cruises). Emergency
// braking is only allowed for pedestrians already in the conflict zone.
inline std::optional<double> yield_control(double v, double gap, bool occupied, double* v_ref) {
  const double stop_dist = gap - kStopMargin;
  if (v > 0.05) {
    const double v_allow = std::sqrt(2.0 * kComfortDecel * std::max(stop_dist, 0.0));
    if (v > v_allow) {
      // Constant-deceleration profile to the stop point; if that needs more
      // than the comfort brake, eat into the margin before a full stop.
      const double need = v * v / (2.0 * std::max(stop_dist, 0.05)) / sim::kMaxBrake;
      if (need <= kBrakeLimit) return -need;
      if (!occupied) return std::nullopt;
      const double need_tight = v * v / (2.0 * std::max(gap - 0.5, 0.05)) / sim::kMaxBrake;
      return need_tight <= kBrakeLimit ? -kBrakeLimit : -1.0;
    }
  }
  if (stop_dist <= 0.5) return 0.0;
  *v_ref = std::min(*v_ref, std::sqrt(2.0 * kComfortDecel * stop_dist));
  return std::nullopt;
}

}  // namespace detail

inline double speed_control(const sim::WorldState& world, const sim::Route& route) {
  const double v = world.ego.speed;
  double v_ref = decision::kTargetSpeed;
  std::optional<double> cmd;
  if (const auto now = decision::nearest_conflict(world, route)) {
    cmd = detail::yield_control(v, now->gap, true, &v_ref);
  }
  if (!cmd) {
    if (const auto soon = decision::nearest_conflict(world, route, kAnticipation)) {
      cmd = detail::yield_control(v, soon->gap, false, &v_ref);
    }
  }
  if (cmd) return *cmd;
  return clip(kSpeedGain * (v_ref - v), -kBrakeLimit, kThrottleLimit);
}

inline sim::Action expert_action(const sim::WorldState& world, const sim::Route& route) {
  const double off = route.project(world.ego.pose.position).distance;
  if (off > decision::kOffRouteLimit) fail("expert_action: ego is ", off, " m off route");
  return {pure_pursuit_steer(world.ego, route), speed_control(world, route)};
}

inline sim::Action expert_action(const sim::WorldState& world) {
  return expert_action(world, world.route());
}

struct NoiseResult {
  sim::Action executed;
  bool perturbed = false;
};

// With probability p the executed steering gets U(-0.2, 0.2) added; the
// acceleration is never touched.
inline NoiseResult inject_noise(sim::Action intended, Rng& rng, double p = 0.1) {
  if (p < 0.0 || p > 1.0) fail("inject_noise: probability ", p, " outside [0, 1]");
  NoiseResult r{intended, false};
  if (uniform(rng, 0.0, 1.0) < p) {
    double n = 0.0;
    while (n == 0.0) n = uniform(rng, -0.2, 0.2);
    r.executed.steer = clip_unit(intended.steer + n);
    r.perturbed = true;
  }
  return r;
}

}  // namespace mtcil::expert
