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
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mtcil/common.hpp"
#include "mtcil/sim/geometry.hpp"
#include "mtcil/sim/scene.hpp"
#include "mtcil/sim/weather.hpp"

namespace mtcil::sim {

inline constexpr double kDt = 0.1;
inline constexpr int kMaxTicks = 1000;
inline constexpr double kMaxSteer = 0.5;  // rad at |steer| = 1
inline constexpr double kMaxSpeed = 15.0;
inline constexpr double kMaxBrake = 6.0;  // m/s^2 at accel = -1
inline constexpr double kMaxThrottle = 3.0;  // m/s^2 at accel = +1
inline constexpr double kPedestrianRadius = 0.35;
inline constexpr double kYieldRadius = 3.0;
inline constexpr double kGoalRadius = 2.0;
inline constexpr int kInvasionRefractory = 10;
inline constexpr int kInvasionLimit = 5;

// Steering and acceleration commands, each nominally in [-1, 1].
struct Action {
  double steer = 0.0;
  double accel = 0.0;
  friend bool operator==(const Action&, const Action&) = default;
};

inline Action clip_action(Action a) { return {clip_unit(a.steer), clip_unit(a.accel)}; }

struct EgoState {
  Pose2D pose;
  double speed = 0.0;
  double wheelbase = 2.5;
  Vec2 half_extents{2.25, 0.9};

  OrientedBox box() const { return {pose, half_extents}; }
  friend bool operator==(const EgoState&, const EgoState&) = default;
};

struct PedestrianState {
  int id = 0;
  Pose2D pose;
  double walk_speed = 0.0;
  int crosswalk_id = 0;
  double progress = 0.0;
  bool disrupted = false;
  double base_speed = 1.2;
  int direction = 1;     // +1 walks crosswalk a->b, -1 walks b->a
  double delay = 0.0;    // seconds left waiting at the curb
  friend bool operator==(const PedestrianState&, const PedestrianState&) = default;
};

struct WorldState {
  std::shared_ptr<const SceneSpec> scene;
  int route_id = 0;
  std::string weather{"ClearNoon"};
  EgoState ego;
  std::vector<PedestrianState> pedestrians;
  int tick = 0;
  std::uint64_t rng_seed = 0;
  int lane_invasion_count = 0;
  int last_invasion_tick = -1;
  int disruption_events = 0;  // rising edges of any pedestrian's disrupted flag

  const Route& route() const { return scene->route(route_id); }
};

enum class TerminalEvent { Collision, LaneInvasion, PoorEndPose, Timeout, Success };

inline std::string_view to_string(TerminalEvent e) {
  switch (e) {
    case TerminalEvent::Collision: return "Collision";
    case TerminalEvent::LaneInvasion: return "LaneInvasion";
    case TerminalEvent::PoorEndPose: return "PoorEndPose";
    case TerminalEvent::Timeout: return "Timeout";
    case TerminalEvent::Success: return "Success";
  }
  return "?";
}

inline TerminalEvent terminal_from_string(std::string_view s) {
  for (auto e : {TerminalEvent::Collision, TerminalEvent::LaneInvasion, TerminalEvent::PoorEndPose,
                 TerminalEvent::Timeout, TerminalEvent::Success})
    if (to_string(e) == s) return e;
  fail("unknown terminal event '", s, "'");
}

// Piecewise-linear pedal map: [-1, 0] -> [-6, 0] m/s^2, [0, 1] -> [0, 3] m/s^2.
inline double accel_map(double accel) {
  return accel >= 0.0 ? accel * kMaxThrottle : accel * kMaxBrake;
}

inline EgoState ego_step(const EgoState& ego, Action action, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) fail("ego_step: dt must be positive and finite, got ", dt);
  if (!std::isfinite(action.steer) || !std::isfinite(action.accel) || !ego.pose.position.finite() ||
      !std::isfinite(ego.pose.heading) || !std::isfinite(ego.speed)) {
    fail("ego_step: non-finite input");
  }
  action = clip_action(action);
  EgoState next = ego;
  const double v = ego.speed;
  next.pose.position = ego.pose.position + heading_vector(ego.pose.heading) * (v * dt);
  next.pose.heading =
      wrap_angle(ego.pose.heading + (v / ego.wheelbase) * std::tan(kMaxSteer * action.steer) * dt);
  next.speed = std::clamp(v + accel_map(action.accel) * dt, 0.0, kMaxSpeed);
  return next;
}

namespace detail {

inline Vec2 pedestrian_position(const Crosswalk& cw, int direction, double progress) {
  const double t = direction > 0 ? progress : 1.0 - progress;
  return cw.a + (cw.b - cw.a) * t;
}

inline double pedestrian_heading(const Crosswalk& cw, int direction) {
  const Vec2 d = direction > 0 ? cw.b - cw.a : cw.a - cw.b;
  return std::atan2(d.y, d.x);
}

}  // namespace detail

inline PedestrianState make_pedestrian(const SceneSpec& scene, int id, int crosswalk_id,
                                       int direction, double base_speed, double progress,
                                       double delay) {
  const Crosswalk& cw = scene.crosswalks.at(static_cast<std::size_t>(crosswalk_id));
  PedestrianState p;
  p.id = id;
  p.crosswalk_id = crosswalk_id;
  p.direction = direction;
  p.base_speed = base_speed;
  p.walk_speed = delay > 0.0 ? 0.0 : base_speed;
  p.progress = progress;
  p.delay = delay;
  p.pose = {detail::pedestrian_position(cw, direction, progress),
            detail::pedestrian_heading(cw, direction)};
  return p;
}

inline EgoState initial_ego(const Route& route) {
  EgoState ego;
  ego.pose = {route.waypoints.front().position, route.waypoints.front().direction};
  ego.speed = 0.0;
  return ego;
}

inline WorldState spawn_episode(std::shared_ptr<const SceneSpec> scene, int route_id,
                                const WeatherProfile& weather, std::uint64_t seed) {
  if (!scene) fail("spawn_episode: null scene");
  const Route& route = scene->route(route_id);
  WorldState w;
  w.scene = scene;
  w.route_id = route_id;
  w.weather = std::string(weather.name);
  w.rng_seed = seed;
  w.ego = initial_ego(route);

  Rng rng(derive_seed(seed, scene->scene_id, route_id, 0x70ed));
  const int count = uniform_int(rng, 20, 30);

  // The first pedestrian is timed to be on the exit crosswalk when the ego
  // arrives there at cruise speed, so every episode has an interaction.
  const Crosswalk& exit_cw = scene->crosswalks.at(static_cast<std::size_t>(route.exit_arm));
  const double s_cw = route.project((exit_cw.a + exit_cw.b) * 0.5).arc;
  const double t_arrive = 2.5 + s_cw / 5.56;
  {
    const int dir = uniform(rng, 0.0, 1.0) < 0.5 ? 1 : -1;
    const double speed = uniform(rng, 0.9, 1.5);
    const double crossing = exit_cw.length() / speed;
    const double delay = std::max(0.0, t_arrive - uniform(rng, 0.35, 0.6) * crossing);
    w.pedestrians.push_back(make_pedestrian(*scene, 0, exit_cw.id, dir, speed, 0.0, delay));
  }
  for (int i = 1; i < count; ++i) {
    const int cw = uniform_int(rng, 0, 3);
    const int dir = uniform(rng, 0.0, 1.0) < 0.5 ? 1 : -1;
    const double speed = uniform(rng, 0.8, 1.6);
    if (uniform(rng, 0.0, 1.0) < 0.3) {
      w.pedestrians.push_back(
          make_pedestrian(*scene, i, cw, dir, speed, uniform(rng, 0.05, 0.95), 0.0));
    } else {
      w.pedestrians.push_back(
          make_pedestrian(*scene, i, cw, dir, speed, 0.0, uniform(rng, 0.0, 30.0)));
    }
  }
  return w;
}

// Pedestrians walk their crosswalk at walk_speed. A pedestrian yields (slows
// toward zero) when a moving ego is within the yield radius, or when a stopped
// ego blocks the next metre of its path.
inline void pedestrians_step(WorldState& world, double dt) {
  if (!(dt > 0.0)) fail("pedestrians_step: dt must be positive");
  const OrientedBox ego_box = world.ego.box();
  const bool ego_moving = world.ego.speed > 0.5;
  for (auto& p : world.pedestrians) {
    const Crosswalk& cw = world.scene->crosswalks.at(static_cast<std::size_t>(p.crosswalk_id));
    if (p.delay > 0.0) {
      p.delay = std::max(0.0, p.delay - dt);
      p.disrupted = false;
      if (p.delay > 0.0) continue;
    }
    if (p.progress >= 1.0) {
      p.disrupted = false;
      p.walk_speed = 0.0;
      continue;
    }
    const Vec2 ahead = p.pose.position + heading_vector(p.pose.heading) * 1.0;
    const bool yielding = ego_moving && ego_box.distance_to(p.pose.position) < kYieldRadius;
    const bool blocked = ego_box.distance_to(ahead) < kPedestrianRadius + 0.25;
    if (yielding || blocked) {
      p.walk_speed = std::max(0.0, p.walk_speed - 3.0 * dt);
    } else {
      p.walk_speed = std::min(p.base_speed, p.walk_speed + 1.5 * dt);
    }
    const bool was = p.disrupted;
    p.disrupted = (yielding || blocked) && p.base_speed >= 0.5 && p.walk_speed < 0.2;
    if (p.disrupted && !was) ++world.disruption_events;
    p.progress = std::min(1.0, p.progress + p.walk_speed * dt / cw.length());
    p.pose.position = detail::pedestrian_position(cw, p.direction, p.progress);
  }
}

// True when any corner of the ego box is off the drivable surface or in a lane
// the route does not use (opposing carriageway or an unrelated arm).
inline bool ego_invading(const WorldState& world) {
  const SceneSpec& scene = *world.scene;
  const Route& route = world.route();
  for (const Vec2& c : world.ego.box().corners()) {
    if (!scene.drivable(c)) return true;
    const int arm = scene.arm_at(c);
    if (arm < 0) continue;
    const double lat = SceneSpec::inbound_lateral(arm, c);
    if (arm == route.approach_arm) {
      if (lat < 0.0) return true;
    } else if (arm == route.exit_arm) {
      if (lat > 0.0) return true;
    } else {
      return true;
    }
  }
  return false;
}

inline void update_lane_invasion(WorldState& world) {
  if (!ego_invading(world)) return;
  if (world.last_invasion_tick >= 0 &&
      world.tick - world.last_invasion_tick < kInvasionRefractory) {
    return;
  }
  ++world.lane_invasion_count;
  world.last_invasion_tick = world.tick;
}

// One simulation tick: ego, pedestrians, clock, lane-invasion bookkeeping.
inline void advance(WorldState& world, Action action, double dt = kDt) {
  world.ego = ego_step(world.ego, action, dt);
  pedestrians_step(world, dt);
  ++world.tick;
  update_lane_invasion(world);
}

struct EndPose {
  double heading_deviation_deg = 0.0;
  double lateral_offset = 0.0;
};

inline EndPose end_pose(const EgoState& ego, const Route& route) {
  const double dev = std::abs(wrap_angle(ego.pose.heading - route.goal_lane_direction));
  const double off =
      std::abs(cross(heading_vector(route.goal_lane_direction), ego.pose.position - route.goal));
  return {rad2deg(dev), off};
}

inline bool in_collision(const WorldState& world) {
  const OrientedBox box = world.ego.box();
  for (const auto& p : world.pedestrians)
    if (box.intersects_disc(p.pose.position, kPedestrianRadius)) return true;
  for (const auto& o : world.scene->obstacles)
    if (box.intersects_disc(o.center, o.radius)) return true;
  return false;
}

// Precedence: Collision > LaneInvasion > PoorEndPose/Success > Timeout.
inline std::optional<TerminalEvent> detect_terminal(const WorldState& world, const Route& route) {
  if (in_collision(world)) return TerminalEvent::Collision;
  if (world.lane_invasion_count > kInvasionLimit) return TerminalEvent::LaneInvasion;
  if (distance(world.ego.pose.position, route.goal) <= kGoalRadius) {
    const EndPose ep = end_pose(world.ego, route);
    if (ep.heading_deviation_deg > 15.0 || ep.lateral_offset > 1.0) {
      return TerminalEvent::PoorEndPose;
    }
    return TerminalEvent::Success;
  }
  if (world.tick >= kMaxTicks) return TerminalEvent::Timeout;
  return std::nullopt;
}

}  // namespace mtcil::sim
