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
#include <cstdint>
#include <string>
#include <vector>

#include "mtcil/common.hpp"
#include "mtcil/sim/geometry.hpp"
#include "mtcil/sim/scene.hpp"
#include "mtcil/sim/world.hpp"

namespace mtcil::bench {

inline constexpr double kJerkThreshold = 0.9;

// Everything the control-quality metrics need from one episode. Per-step
// vectors all have length `steps`.
struct EpisodeResult {
  sim::TerminalEvent terminal = sim::TerminalEvent::Timeout;
  int steps = 0;
  std::vector<sim::Action> actions;
  std::vector<sim::Vec2> positions;   // ego location after each step
  std::vector<sim::Vec2> wp_current;  // nearest route waypoint to that location
  std::vector<sim::Vec2> wp_next;     // the waypoint after it
  int disruptions = 0;                // pedestrian disruption events
  sim::Pose2D final_pose;
  sim::Vec2 goal;
  double goal_lane_direction = 0.0;
  // Provenance of the run.
  int scene_id = 0;
  int route_id = 0;
  std::string weather;
  std::uint64_t seed = 0;
  std::string diagnostic;  // set when the episode was failed by the harness
};

// Appends one step's action and the post-step pose to the log.
inline void log_step(EpisodeResult& r, const sim::Route& route, sim::Action a, sim::Vec2 loc) {
  r.actions.push_back(a);
  r.positions.push_back(loc);
  std::size_t c = route.nearest_index(loc);
  std::size_t n = c + 1;
  if (n >= route.waypoints.size()) {
    n = c;
    c = c > 0 ? c - 1 : c;
  }
  r.wp_current.push_back(route.waypoints[c].position);
  r.wp_next.push_back(route.waypoints[n].position);
  r.steps = static_cast<int>(r.actions.size());
}

inline void require_results(const std::vector<EpisodeResult>& rs, const char* what) {
  if (rs.empty()) fail(what, ": needs at least one episode");
}

// Mean count per episode of steps with any |action| component > 0.9.
inline double ego_jerk(const std::vector<EpisodeResult>& rs) {
  require_results(rs, "ego_jerk");
  double total = 0.0;
  for (const auto& r : rs)
    for (const auto& a : r.actions)
      if (std::abs(a.steer) > kJerkThreshold || std::abs(a.accel) > kJerkThreshold) total += 1.0;
  return total / static_cast<double>(rs.size());
}

inline double other_jerk(const std::vector<EpisodeResult>& rs) {
  require_results(rs, "other_jerk");
  double total = 0.0;
  for (const auto& r : rs) total += r.disruptions;
  return total / static_cast<double>(rs.size());
}

// Per-step absolute distance from the segment line through the nearest and
// next waypoints, averaged per episode, then across episodes. Degenerate
// segments are skipped and counted in `skipped`.
inline double dev_waypoint(const std::vector<EpisodeResult>& rs, std::size_t* skipped = nullptr) {
  require_results(rs, "dev_waypoint");
  double total = 0.0;
  std::size_t skip = 0;
  for (const auto& r : rs) {
    double sum = 0.0;
    std::size_t used = 0;
    for (std::size_t t = 0; t < r.positions.size(); ++t) {
      const sim::Vec2 seg = r.wp_next[t] - r.wp_current[t];
      const double len = seg.norm();
      if (len <= 0.0) {
        ++skip;
        continue;
      }
      sum += std::abs(sim::cross(seg, r.positions[t] - r.wp_current[t])) / len;
      ++used;
    }
    if (used > 0) total += sum / static_cast<double>(used);
  }
  if (skipped) *skipped = skip;
  return total / static_cast<double>(rs.size());
}

inline double dev_destination(const std::vector<EpisodeResult>& rs) {
  require_results(rs, "dev_destination");
  double total = 0.0;
  for (const auto& r : rs) total += sim::distance(r.final_pose.position, r.goal);
  return total / static_cast<double>(rs.size());
}

// Final heading deviation from the goal lane direction, folded into [0, 180].
inline double heading_deviation_deg(double heading, double lane_direction) {
  return rad2deg(std::abs(sim::wrap_angle(heading - lane_direction)));
}

inline double heading_dev(const std::vector<EpisodeResult>& rs) {
  require_results(rs, "heading_dev");
  double total = 0.0;
  for (const auto& r : rs) total += heading_deviation_deg(r.final_pose.heading, r.goal_lane_direction);
  return total / static_cast<double>(rs.size());
}

inline double total_steps(const std::vector<EpisodeResult>& rs) {
  require_results(rs, "total_steps");
  double total = 0.0;
  for (const auto& r : rs) total += r.steps;
  return total / static_cast<double>(rs.size());
}

struct Rates {
  double SR = 0.0, PR = 0.0, TR = 0.0, LR = 0.0, CR = 0.0;
};

// Event frequencies. Each episode increments exactly one counter and the
// counts are divided once, so the five rates partition 1.
inline Rates rates(const std::vector<EpisodeResult>& rs) {
  require_results(rs, "rates");
  std::array<int, 5> c{};
  for (const auto& r : rs) {
    switch (r.terminal) {
      case sim::TerminalEvent::Success: ++c[0]; break;
      case sim::TerminalEvent::PoorEndPose: ++c[1]; break;
      case sim::TerminalEvent::Timeout: ++c[2]; break;
      case sim::TerminalEvent::LaneInvasion: ++c[3]; break;
      case sim::TerminalEvent::Collision: ++c[4]; break;
    }
  }
  const double n = static_cast<double>(rs.size());
  return {c[0] / n, c[1] / n, c[2] / n, c[3] / n, c[4] / n};
}

struct QualityMetrics {
  double ego_jerk = 0.0;
  double other_jerk = 0.0;
  double dev_waypoint = 0.0;
  double dev_destination = 0.0;
  double heading_dev = 0.0;
  double total_steps = 0.0;
};

inline QualityMetrics quality(const std::vector<EpisodeResult>& rs) {
  return {ego_jerk(rs), other_jerk(rs), dev_waypoint(rs), dev_destination(rs), heading_dev(rs), total_steps(rs)};
}

}  // namespace mtcil::bench
