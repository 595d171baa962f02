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

// Test-only reference implementations. Shared by the unit tests and the
// acceptance binary; nothing here may call into the metric code it checks.

#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "mtcil/bench/metrics.hpp"
#include "mtcil/sim/world.hpp"

namespace mtcil::oracle {

// Random episode logs with awkward corners: actions exactly at the jerk
// threshold, repeated waypoints, empty logs, headings far outside (-pi, pi].
inline std::vector<bench::EpisodeResult> synthetic_logs(std::uint64_t seed, int count) {
  Rng rng(seed);
  const sim::TerminalEvent events[] = {sim::TerminalEvent::Success, sim::TerminalEvent::PoorEndPose,
                                       sim::TerminalEvent::Timeout, sim::TerminalEvent::LaneInvasion,
                                       sim::TerminalEvent::Collision};
  std::vector<bench::EpisodeResult> out;
  for (int k = 0; k < count; ++k) {
    bench::EpisodeResult r;
    r.terminal = events[uniform_int(rng, 0, 4)];
    const int n = uniform_int(rng, 0, 5) == 0 ? 0 : uniform_int(rng, 1, 60);
    r.steps = n;
    for (int t = 0; t < n; ++t) {
      auto comp = [&] {
        switch (uniform_int(rng, 0, 5)) {
          case 0: return 0.9;
          case 1: return -0.9;
          default: return uniform(rng, -1.0, 1.0);
        }
      };
      r.actions.push_back({comp(), comp()});
      r.positions.push_back({uniform(rng, -40, 40), uniform(rng, -40, 40)});
      const sim::Vec2 a{uniform(rng, -40, 40), uniform(rng, -40, 40)};
      r.wp_current.push_back(a);
      r.wp_next.push_back(uniform_int(rng, 0, 9) == 0 ? a : sim::Vec2{uniform(rng, -40, 40), uniform(rng, -40, 40)});
    }
    r.disruptions = uniform_int(rng, 0, 4);
    r.final_pose = {{uniform(rng, -40, 40), uniform(rng, -40, 40)}, uniform(rng, -10.0, 10.0)};
    r.goal = {uniform(rng, -40, 40), uniform(rng, -40, 40)};
    r.goal_lane_direction = uniform(rng, -4.0, 4.0);
    out.push_back(std::move(r));
  }
  return out;
}

struct OracleMetrics {
  double ego_jerk = 0, other_jerk = 0, dev_waypoint = 0, dev_destination = 0, heading_dev = 0, total_steps = 0;
  std::map<std::string, double> rates;
};

// Brute force: distances through explicit foot-of-perpendicular points and
// angle differences through atan2 instead of wrapping.
inline OracleMetrics oracle_metrics(const std::vector<bench::EpisodeResult>& logs) {
  OracleMetrics m;
  std::map<std::string, int> counts{{"SR", 0}, {"PR", 0}, {"TR", 0}, {"LR", 0}, {"CR", 0}};
  for (const auto& r : logs) {
    for (const auto& a : r.actions) {
      if (std::max(std::fabs(a.steer), std::fabs(a.accel)) > 0.9) m.ego_jerk += 1;
    }
    m.other_jerk += r.disruptions;
    double dev = 0;
    int used = 0;
    for (std::size_t t = 0; t < r.positions.size(); ++t) {
      const double dx = r.wp_next[t].x - r.wp_current[t].x, dy = r.wp_next[t].y - r.wp_current[t].y;
      const double dd = dx * dx + dy * dy;
      if (dd == 0) continue;
      const double px = r.positions[t].x - r.wp_current[t].x, py = r.positions[t].y - r.wp_current[t].y;
      const double s = (px * dx + py * dy) / dd;
      const double fx = s * dx - px, fy = s * dy - py;
      dev += std::sqrt(fx * fx + fy * fy);
      ++used;
    }
    if (used) m.dev_waypoint += dev / used;
    m.dev_destination += std::hypot(r.final_pose.position.x - r.goal.x, r.final_pose.position.y - r.goal.y);
    const double d = r.final_pose.heading - r.goal_lane_direction;
    m.heading_dev += std::fabs(std::atan2(std::sin(d), std::cos(d))) * 180.0 / std::numbers::pi;
    m.total_steps += r.steps;
    const char* key = "";
    switch (r.terminal) {
      case sim::TerminalEvent::Success: key = "SR"; break;
      case sim::TerminalEvent::PoorEndPose: key = "PR"; break;
      case sim::TerminalEvent::Timeout: key = "TR"; break;
      case sim::TerminalEvent::LaneInvasion: key = "LR"; break;
      case sim::TerminalEvent::Collision: key = "CR"; break;
    }
    ++counts[key];
  }
  const double n = static_cast<double>(logs.size());
  for (double* v : {&m.ego_jerk, &m.other_jerk, &m.dev_waypoint, &m.dev_destination, &m.heading_dev, &m.total_steps}) {
    *v /= n;
  }
  for (const auto& [k, c] : counts) m.rates[k] = c / n;
  return m;
}

// Largest absolute difference between the library metrics and the oracle.
inline double metric_gap(const std::vector<bench::EpisodeResult>& logs) {
  const OracleMetrics o = oracle_metrics(logs);
  const bench::QualityMetrics q = bench::quality(logs);
  const bench::Rates r = bench::rates(logs);
  const double pairs[][2] = {{q.ego_jerk, o.ego_jerk},
                             {q.other_jerk, o.other_jerk},
                             {q.dev_waypoint, o.dev_waypoint},
                             {q.dev_destination, o.dev_destination},
                             {q.heading_dev, o.heading_dev},
                             {q.total_steps, o.total_steps},
                             {r.SR, o.rates.at("SR")},
                             {r.PR, o.rates.at("PR")},
                             {r.TR, o.rates.at("TR")},
                             {r.LR, o.rates.at("LR")},
                             {r.CR, o.rates.at("CR")}};
  double worst = 0;
  for (const auto& p : pairs) worst = std::max(worst, std::fabs(p[0] - p[1]));
  return worst;
}

// Constructed episodes, one per terminal event. Each drives the real world
// step function until detect_terminal fires.
using DriveFn = std::function<sim::Action(const sim::WorldState&)>;

inline sim::TerminalEvent drive(sim::WorldState w, const DriveFn& f, int* steps = nullptr) {
  const sim::Route& route = w.route();
  while (true) {
    if (const auto ev = sim::detect_terminal(w, route)) {
      if (steps) *steps = w.tick;
      return *ev;
    }
    sim::advance(w, f(w));
  }
}

inline sim::WorldState quiet_world(int scene, int route) {
  sim::WorldState w = sim::spawn_episode(sim::scene_ptr(scene), route, sim::weather_by_name("ClearNoon"), 1);
  w.pedestrians.clear();
  return w;
}

// Ego placed `back` metres before the goal along the goal lane, shifted
// sideways by `offset` and rotated by `yaw_deg`, rolling at 2 m/s.
inline sim::WorldState near_goal(int scene, int route, double back, double offset, double yaw_deg) {
  sim::WorldState w = quiet_world(scene, route);
  const sim::Route& r = w.route();
  const double dir = r.goal_lane_direction;
  const sim::Vec2 fwd = sim::heading_vector(dir);
  w.ego.pose.position = r.goal - fwd * back + sim::right_normal(dir) * offset;
  w.ego.pose.heading = sim::wrap_angle(dir + yaw_deg * std::numbers::pi / 180.0);
  w.ego.speed = 2.0;
  return w;
}

// Gentle cruise that never steers.
inline sim::Action roll(const sim::WorldState& w) { return {0.0, w.ego.speed < 2.0 ? 0.3 : 0.0}; }

}  // namespace mtcil::oracle
