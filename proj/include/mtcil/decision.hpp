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

#include <optional>
#include <string_view>

#include "mtcil/common.hpp"
#include "mtcil/sim/scene.hpp"
#include "mtcil/sim/world.hpp"

// Rule-based high-level command generator.
namespace mtcil::decision {

enum class LatCmd : int { FollowLane = 0, GoStraight = 1, TurnLeft = 2, TurnRight = 3 };
enum class LonCmd : int { Decelerate = 0, Maintain = 1, Accelerate = 2 };

inline constexpr int kNumLat = 4;
inline constexpr int kNumLon = 3;

struct CommandPair {
  LatCmd lat = LatCmd::FollowLane;
  LonCmd lon = LonCmd::Maintain;
  friend bool operator==(const CommandPair&, const CommandPair&) = default;
};

inline std::string_view to_string(LatCmd c) {
  switch (c) {
    case LatCmd::FollowLane: return "FollowLane";
    case LatCmd::GoStraight: return "GoStraight";
    case LatCmd::TurnLeft: return "TurnLeft";
    case LatCmd::TurnRight: return "TurnRight";
  }
  return "?";
}

inline std::string_view to_string(LonCmd c) {
  switch (c) {
    case LonCmd::Decelerate: return "Decelerate";
    case LonCmd::Maintain: return "Maintain";
    case LonCmd::Accelerate: return "Accelerate";
  }
  return "?";
}

inline LatCmd lat_from_index(int i) {
  if (i < 0 || i >= kNumLat) fail("invalid lateral command encoding ", i);
  return static_cast<LatCmd>(i);
}

inline LonCmd lon_from_index(int i) {
  if (i < 0 || i >= kNumLon) fail("invalid longitudinal command encoding ", i);
  return static_cast<LonCmd>(i);
}

inline constexpr double kTargetSpeed = 5.56;  // 20 km/h
inline constexpr double kSpeedMargin = 1.0;
inline constexpr double kConflictLookahead = 12.0;
inline constexpr double kConflictHalfWidth = 2.5;
inline constexpr double kIntersectionInflate = 2.0;
inline constexpr double kOffRouteLimit = 10.0;

class OffRouteError : public Error {
 public:
  using Error::Error;
};

inline LatCmd mission_command(sim::Mission m) {
  switch (m) {
    case sim::Mission::LeftTurn: return LatCmd::TurnLeft;
    case sim::Mission::RightTurn: return LatCmd::TurnRight;
    case sim::Mission::GoStraight: return LatCmd::GoStraight;
  }
  return LatCmd::FollowLane;
}

inline LatCmd lateral_command(const sim::WorldState& world, const sim::Route& route) {
  const sim::Vec2 p = world.ego.pose.position;
  const double off = route.project(p).distance;
  if (off > kOffRouteLimit) {
    throw OffRouteError("ego is " + std::to_string(off) + " m off route");
  }
  if (world.scene->in_intersection(p, kIntersectionInflate)) return mission_command(route.mission);
  return LatCmd::FollowLane;
}

// Closest pedestrian inside the conflict zone: the route corridor from the
// ego's front bumper up to the look-ahead, with the given half width.
struct Conflict {
  int pedestrian_id = -1;
  double gap = 0.0;  // arc distance from front bumper to the pedestrian's disc
};

// With a positive `anticipation` horizon (seconds) a walking pedestrian also
// counts when its position after walking that long at its current speed is in
// the zone.
inline std::optional<Conflict> nearest_conflict(const sim::WorldState& world,
                                                const sim::Route& route,
                                                double anticipation = 0.0) {
  const sim::Vec2 p = world.ego.pose.position;
  const auto ego_proj = route.project(p);
  const double front = ego_proj.arc + world.ego.half_extents.x;
  const double horizon = front + kConflictLookahead;
  const std::size_t first = ego_proj.segment;
  std::optional<Conflict> best;
  auto consider = [&](int id, sim::Vec2 q) {
    const auto proj = route.project(q, first, horizon);
    if (proj.distance > kConflictHalfWidth) return;
    if (proj.arc < front || proj.arc > horizon) return;
    const double gap = proj.arc - front - sim::kPedestrianRadius;
    if (!best || gap < best->gap) best = Conflict{id, gap};
  };
  for (const auto& ped : world.pedestrians) {
    if (sim::distance(ped.pose.position, p) > kConflictLookahead + 8.0) continue;
    consider(ped.id, ped.pose.position);
    if (anticipation > 0.0 && ped.progress < 1.0 && ped.delay <= 0.0 && ped.walk_speed > 0.0) {
      const double walk = ped.walk_speed * anticipation;
      const sim::Vec2 dir = sim::heading_vector(ped.pose.heading);
      for (double f : {0.5, 1.0}) consider(ped.id, ped.pose.position + dir * (walk * f));
    }
  }
  return best;
}

inline LonCmd longitudinal_command(const sim::WorldState& world, const sim::Route& route) {
  const double v = world.ego.speed;
  if (nearest_conflict(world, route) || v > kTargetSpeed + kSpeedMargin) return LonCmd::Decelerate;
  if (v < kTargetSpeed - kSpeedMargin) return LonCmd::Accelerate;
  return LonCmd::Maintain;
}

inline CommandPair decide(const sim::WorldState& world, const sim::Route& route) {
  return {lateral_command(world, route), longitudinal_command(world, route)};
}

inline CommandPair decide(const sim::WorldState& world) { return decide(world, world.route()); }

}  // namespace mtcil::decision
