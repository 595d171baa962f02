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
#include <string>
#include <string_view>
#include <vector>

#include "mtcil/common.hpp"
#include "mtcil/sim/geometry.hpp"

namespace mtcil::sim {

enum class Split { Train, Test };

inline std::string_view to_string(Split s) { return s == Split::Train ? "train" : "test"; }

enum class Mission { LeftTurn, GoStraight, RightTurn };

inline std::string_view to_string(Mission m) {
  switch (m) {
    case Mission::LeftTurn: return "LeftTurn";
    case Mission::GoStraight: return "GoStraight";
    case Mission::RightTurn: return "RightTurn";
  }
  return "?";
}

inline constexpr int kNumScenes = 6;
inline constexpr int kTotalRoutes = 40;

struct Waypoint {
  Vec2 position;
  double direction = 0.0;  // lane direction, radians
};

struct Route {
  int route_id = 0;
  Mission mission = Mission::GoStraight;
  int approach_arm = 0;
  int exit_arm = 0;
  std::vector<Waypoint> waypoints;
  std::vector<double> arc;  // cumulative arc length at each waypoint
  Vec2 goal;
  double goal_lane_direction = 0.0;

  double length() const { return arc.empty() ? 0.0 : arc.back(); }

  std::size_t nearest_index(Vec2 p) const {
    std::size_t best = 0;
    double best_d = 1e300;
    for (std::size_t i = 0; i < waypoints.size(); ++i) {
      const Vec2 d = waypoints[i].position - p;
      const double d2 = dot(d, d);
      if (d2 < best_d) {
        best_d = d2;
        best = i;
      }
    }
    return best;
  }

  // Projection of p onto the polyline: arc coordinate and unsigned distance.
  struct Projection {
    double arc = 0.0;
    double distance = 0.0;
    std::size_t segment = 0;
  };

  Projection project(Vec2 p, std::size_t first = 0, double max_arc = 1e300) const {
    Projection best{0.0, 1e300, first};
    for (std::size_t i = first; i + 1 < waypoints.size(); ++i) {
      if (arc[i] > max_arc) break;
      double t = 0.0;
      const double d = segment_distance(p, waypoints[i].position, waypoints[i + 1].position, &t);
      if (d < best.distance) {
        best.distance = d;
        best.arc = arc[i] + t * (arc[i + 1] - arc[i]);
        best.segment = i;
      }
    }
    return best;
  }

  Vec2 point_at(double s) const {
    if (waypoints.empty()) return {};
    if (s <= 0.0) return waypoints.front().position;
    for (std::size_t i = 0; i + 1 < waypoints.size(); ++i) {
      if (arc[i + 1] >= s) {
        const double seg = arc[i + 1] - arc[i];
        const double t = seg > 0.0 ? (s - arc[i]) / seg : 0.0;
        return waypoints[i].position + (waypoints[i + 1].position - waypoints[i].position) * t;
      }
    }
    return waypoints.back().position;
  }
};

struct Crosswalk {
  int id = 0;
  int arm = 0;
  Vec2 a;  // walking segment endpoints (sidewalk to sidewalk)
  Vec2 b;
  double width = 3.0;

  double length() const { return distance(a, b); }

  bool contains(Vec2 p) const {
    const Vec2 ab = b - a;
    const double len = ab.norm();
    const Vec2 u = ab * (1.0 / len);
    const Vec2 d = p - a;
    const double along = dot(d, u);
    const double across = cross(u, d);
    return along >= 0.0 && along <= len && std::abs(across) <= 0.5 * width;
  }
};

struct StaticObstacle {
  Vec2 center;
  double radius = 0.3;
};

// One four-way, unsignalised intersection centred on the origin. Arm k points
// outward along heading k*pi/2 (0 = east, 1 = south, 2 = west, 3 = north).
struct SceneSpec {
  int scene_id = 0;
  double lane_width = 3.5;
  int lanes_per_direction = 1;
  double curb_radius = 6.0;
  double arm_length = 60.0;
  std::vector<Crosswalk> crosswalks;
  std::vector<StaticObstacle> obstacles;
  std::vector<Route> routes;
  Split split = Split::Train;

  double road_half_width() const { return lane_width * lanes_per_direction; }
  // Half size of the square conflict area (road plus curb rounding).
  double box_half() const { return road_half_width() + curb_radius; }

  const Route& route(int route_id) const {
    for (const auto& r : routes)
      if (r.route_id == route_id) return r;
    fail("scene ", scene_id, " has no route ", route_id);
  }

  bool drivable(Vec2 p) const {
    const double h = road_half_width();
    const double ax = std::abs(p.x), ay = std::abs(p.y);
    if (ay <= h && ax <= arm_length) return true;
    if (ax <= h && ay <= arm_length) return true;
    const double b = box_half();
    if (ax <= b && ay <= b) {
      return std::hypot(b - ax, b - ay) >= curb_radius;
    }
    return false;
  }

  // Arm index if p lies beyond the conflict box along one of the arms.
  int arm_at(Vec2 p) const {
    const double b = box_half();
    for (int k = 0; k < 4; ++k) {
      const Vec2 d = heading_vector(k * kPi / 2.0);
      const double along = dot(p, d);
      const double across = std::abs(cross(d, p));
      if (along > b && across <= road_half_width() + 4.0) return k;
    }
    return -1;
  }

  // Lateral coordinate on arm k, positive on the inbound carriageway.
  static double inbound_lateral(int arm, Vec2 p) {
    const double inbound_heading = arm * kPi / 2.0 + kPi;
    return dot(p, right_normal(inbound_heading));
  }

  bool in_intersection(Vec2 p, double inflate) const {
    const double b = box_half() + inflate;
    return std::abs(p.x) <= b && std::abs(p.y) <= b;
  }
};

namespace detail {

struct SceneParams {
  double lane_width;
  int lanes;
  double curb;
  int routes;
  double approach;
  double exit;
  Split split;
};

inline constexpr std::array<SceneParams, kNumScenes> kSceneTable{{
    {3.50, 1, 6.0, 8, 25.0, 20.0, Split::Train},
    {3.75, 1, 7.0, 7, 24.0, 20.0, Split::Train},
    {3.50, 2, 6.0, 6, 26.0, 20.0, Split::Test},
    {3.25, 1, 6.5, 6, 25.0, 21.0, Split::Train},
    {3.50, 2, 5.5, 7, 24.0, 20.0, Split::Train},
    {3.60, 1, 7.0, 6, 25.0, 20.0, Split::Test},
}};

struct ArmMission {
  int arm;
  Mission mission;
};

// Interleaved so that any prefix stays balanced across missions and arms.
inline constexpr std::array<ArmMission, 12> kRouteOrder{{
    {0, Mission::LeftTurn}, {1, Mission::GoStraight}, {2, Mission::RightTurn},
    {3, Mission::LeftTurn}, {0, Mission::GoStraight}, {1, Mission::RightTurn},
    {2, Mission::LeftTurn}, {3, Mission::GoStraight}, {0, Mission::RightTurn},
    {1, Mission::LeftTurn}, {2, Mission::GoStraight}, {3, Mission::RightTurn},
}};

inline void append_line(std::vector<Waypoint>& out, Vec2 from, Vec2 to, double heading) {
  const double len = distance(from, to);
  const int n = std::max(1, static_cast<int>(std::ceil(len / 1.0)));
  for (int i = out.empty() ? 0 : 1; i <= n; ++i) {
    out.push_back({from + (to - from) * (static_cast<double>(i) / n), heading});
  }
}

// Quarter arc starting at `from` with `heading`; sign +1 turns right.
inline Vec2 append_arc(std::vector<Waypoint>& out, Vec2 from, double heading, double radius,
                       int sign) {
  const Vec2 side = sign > 0 ? right_normal(heading) : right_normal(heading) * -1.0;
  const Vec2 center = from + side * radius;
  const Vec2 r0 = from - center;
  const double sweep = kPi / 2.0;
  const int n = std::max(2, static_cast<int>(std::ceil(radius * sweep / 1.0)));
  Vec2 last = from;
  for (int i = 1; i <= n; ++i) {
    const double phi = sign * sweep * static_cast<double>(i) / n;
    last = center + rotate(r0, phi);
    out.push_back({last, wrap_angle(heading + phi)});
  }
  return last;
}

inline Route make_route(const SceneSpec& scene, int route_id, int arm, Mission mission,
                        double approach_len, double exit_len) {
  Route r;
  r.route_id = route_id;
  r.mission = mission;
  r.approach_arm = arm;
  const int lanes = scene.lanes_per_direction;
  const double lw = scene.lane_width;
  const double b = scene.box_half();
  const double in_heading = wrap_angle(arm * kPi / 2.0 + kPi);
  int exit_arm = (arm + 2) % 4;
  int lane_in = lanes - 1, lane_out = lanes - 1;
  if (mission == Mission::LeftTurn) {
    exit_arm = (arm + 1) % 4;
    lane_in = lane_out = 0;
  } else if (mission == Mission::RightTurn) {
    exit_arm = (arm + 3) % 4;
  }
  r.exit_arm = exit_arm;
  const double out_heading = wrap_angle(exit_arm * kPi / 2.0);
  const double off_in = (lane_in + 0.5) * lw;
  const double off_out = (lane_out + 0.5) * lw;

  const Vec2 arm_dir = heading_vector(arm * kPi / 2.0);
  const Vec2 lane_shift = right_normal(in_heading) * off_in;
  const Vec2 start = arm_dir * (b + approach_len) + lane_shift;
  const Vec2 entry = arm_dir * b + lane_shift;
  append_line(r.waypoints, start, entry, in_heading);

  const Vec2 exit_dir = heading_vector(exit_arm * kPi / 2.0);
  const Vec2 exit_shift = right_normal(out_heading) * off_out;
  const Vec2 exit_point = exit_dir * b + exit_shift;
  if (mission == Mission::GoStraight) {
    append_line(r.waypoints, entry, exit_point, in_heading);
  } else if (mission == Mission::RightTurn) {
    append_arc(r.waypoints, entry, in_heading, b - off_in, +1);
    r.waypoints.back().position = exit_point;
  } else {
    append_arc(r.waypoints, entry, in_heading, b + off_in, -1);
    r.waypoints.back().position = exit_point;
  }
  r.waypoints.back().direction = out_heading;
  append_line(r.waypoints, exit_point, exit_dir * (b + exit_len) + exit_shift, out_heading);

  r.arc.resize(r.waypoints.size());
  r.arc[0] = 0.0;
  for (std::size_t i = 1; i < r.waypoints.size(); ++i) {
    r.arc[i] = r.arc[i - 1] + distance(r.waypoints[i - 1].position, r.waypoints[i].position);
  }
  r.goal = r.waypoints.back().position;
  r.goal_lane_direction = out_heading;
  return r;
}

}  // namespace detail

inline SceneSpec build_scene(int scene_id) {
  if (scene_id < 0 || scene_id >= kNumScenes) fail("invalid scene id ", scene_id);
  const auto& p = detail::kSceneTable[static_cast<std::size_t>(scene_id)];
  SceneSpec s;
  s.scene_id = scene_id;
  s.lane_width = p.lane_width;
  s.lanes_per_direction = p.lanes;
  s.curb_radius = p.curb;
  s.split = p.split;

  const double h = s.road_half_width();
  const double b = s.box_half();
  const double cw_center = b + 2.0;
  for (int k = 0; k < 4; ++k) {
    const Vec2 d = heading_vector(k * kPi / 2.0);
    const Vec2 n = right_normal(k * kPi / 2.0);
    const double reach = h + 2.5;
    s.crosswalks.push_back({k, k, d * cw_center - n * reach, d * cw_center + n * reach, 3.0});
  }
  for (int sx : {-1, 1}) {
    for (int sy : {-1, 1}) {
      const double c = b - 0.3 * s.curb_radius;
      s.obstacles.push_back({{sx * c, sy * c}, 0.3});
    }
  }
  for (int i = 0; i < p.routes; ++i) {
    const auto& am = detail::kRouteOrder[static_cast<std::size_t>(i)];
    s.routes.push_back(
        detail::make_route(s, i, (am.arm + scene_id) % 4, am.mission, p.approach, p.exit));
  }
  return s;
}

inline bool is_train_scene(int scene_id) {
  return detail::kSceneTable.at(static_cast<std::size_t>(scene_id)).split == Split::Train;
}

}  // namespace mtcil::sim
