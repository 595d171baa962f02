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

#include <cmath>

#include <gtest/gtest.h>

#include "mtcil/decision.hpp"
#include "mtcil/expert/expert.hpp"
#include "mtcil/sim/catalog.hpp"

using namespace mtcil;
using namespace mtcil::sim;
using decision::LatCmd;
using decision::LonCmd;

namespace {

const Route* find_route(const SceneSpec& s, Mission m) {
  for (const auto& r : s.routes)
    if (r.mission == m) return &r;
  return nullptr;
}

WorldState empty_world(int scene, int route) {
  WorldState w = spawn_episode(scene_ptr(scene), route, weather_by_name("ClearNoon"), 1);
  w.pedestrians.clear();
  return w;
}

// Places the ego on the route at arc s, facing along the route.
void place(WorldState& w, double s, double speed) {
  const Route& r = w.route();
  const Vec2 p = r.point_at(s);
  const Vec2 q = r.point_at(s + 0.5);
  w.ego.pose = {p, std::atan2(q.y - p.y, q.x - p.x)};
  w.ego.speed = speed;
}

// Arc length where the route first enters the inflated crossing box.
double entry_arc(const SceneSpec& s, const Route& r) {
  const double b = s.box_half() + 2.0;
  for (double a = 0.0; a < r.length(); a += 0.01) {
    const Vec2 p = r.point_at(a);
    if (std::abs(p.x) <= b && std::abs(p.y) <= b) return a;
  }
  return -1.0;
}

double exit_arc(const SceneSpec& s, const Route& r) {
  const double b = s.box_half() + 2.0;
  for (double a = r.length(); a > 0.0; a -= 0.01) {
    const Vec2 p = r.point_at(a);
    if (std::abs(p.x) <= b && std::abs(p.y) <= b) return a;
  }
  return -1.0;
}

PedestrianState pedestrian_at(const SceneSpec& s, Vec2 p) {
  PedestrianState ped = make_pedestrian(s, 0, 0, 1, 1.2, 0.5, 0.0);
  ped.pose.position = p;
  return ped;
}

// Brute-force conflict-zone membership: dense samples of the polyline,
// ahead of the front bumper and within the look-ahead.
bool oracle_conflict(const WorldState& w, Vec2 q) {
  const Route& r = w.route();
  double ego_arc = 0.0, best = 1e300;
  for (double a = 0.0; a <= r.length(); a += 0.005) {
    const double d = distance(r.point_at(a), w.ego.pose.position);
    if (d < best) best = d, ego_arc = a;
  }
  const double front = ego_arc + w.ego.half_extents.x;
  double q_arc = 0.0, q_off = 1e300;
  for (double a = front - 1.0; a <= front + 13.0; a += 0.005) {
    const double d = distance(r.point_at(a), q);
    if (d < q_off) q_off = d, q_arc = a;
  }
  return q_off <= 2.5 && q_arc >= front && q_arc <= front + 12.0;
}

}  // namespace

TEST(Lateral, FollowLaneBeforeEntry) {
  const auto s = scene_ptr(0);
  const Route* r = find_route(*s, Mission::LeftTurn);
  ASSERT_NE(r, nullptr);
  WorldState w = empty_world(0, r->route_id);
  place(w, entry_arc(*s, *r) - 15.0, 5.0);
  EXPECT_EQ(decision::lateral_command(w, *r), LatCmd::FollowLane);
}

TEST(Lateral, MissionInsideIntersection) {
  const auto s = scene_ptr(0);
  for (Mission m : {Mission::LeftTurn, Mission::GoStraight, Mission::RightTurn}) {
    const Route* r = find_route(*s, m);
    WorldState w = empty_world(0, r->route_id);
    place(w, 0.5 * (entry_arc(*s, *r) + exit_arc(*s, *r)), 5.0);
    EXPECT_EQ(decision::lateral_command(w, *r), decision::mission_command(m));
  }
  EXPECT_EQ(decision::mission_command(Mission::LeftTurn), LatCmd::TurnLeft);
}

TEST(Lateral, FollowLaneAfterExit) {
  const auto s = scene_ptr(0);
  const Route* r = find_route(*s, Mission::RightTurn);
  WorldState w = empty_world(0, r->route_id);
  place(w, exit_arc(*s, *r) + 3.0, 5.0);
  EXPECT_EQ(decision::lateral_command(w, *r), LatCmd::FollowLane);
}

TEST(Lateral, FarOffRouteIsAnError) {
  WorldState w = empty_world(0, 0);
  w.ego.pose.position = w.route().waypoints.front().position + right_normal(w.ego.pose.heading) * 10.5;
  EXPECT_THROW(decision::lateral_command(w, w.route()), decision::OffRouteError);
  w.ego.pose.position = w.route().waypoints.front().position + right_normal(w.ego.pose.heading) * 9.5;
  EXPECT_NO_THROW(decision::lateral_command(w, w.route()));
}

TEST(Longitudinal, TooFastDecelerates) {
  WorldState w = empty_world(0, 0);
  place(w, 5.0, 7.0);
  EXPECT_EQ(decision::longitudinal_command(w, w.route()), LonCmd::Decelerate);
}

TEST(Longitudinal, NearTargetMaintains) {
  WorldState w = empty_world(0, 0);
  place(w, 5.0, 5.5);
  EXPECT_EQ(decision::longitudinal_command(w, w.route()), LonCmd::Maintain);
}

TEST(Longitudinal, SlowAccelerates) {
  WorldState w = empty_world(0, 0);
  place(w, 5.0, 4.0);
  EXPECT_EQ(decision::longitudinal_command(w, w.route()), LonCmd::Accelerate);
}

TEST(Longitudinal, PedestrianOnCrosswalkAheadDecelerates) {
  const auto s = scene_ptr(0);
  const Route& r = s->route(1);
  WorldState w = empty_world(0, 1);
  // Crosswalk on the approach arm, 2 m outside the crossing box.
  const Crosswalk& cw = s->crosswalks.at(static_cast<std::size_t>(r.approach_arm));
  const Vec2 mid = (cw.a + cw.b) * 0.5;
  const double s_cw = r.project(mid).arc;
  const Vec2 on_lane = r.point_at(s_cw);
  ASSERT_TRUE(cw.contains(on_lane));
  place(w, s_cw - 8.0, 5.5);
  w.pedestrians = {pedestrian_at(*s, on_lane)};
  EXPECT_EQ(decision::longitudinal_command(w, r), LonCmd::Decelerate);
  w.pedestrians.clear();
  EXPECT_EQ(decision::longitudinal_command(w, r), LonCmd::Maintain);
}

TEST(Longitudinal, ConflictZoneMatchesBruteForce) {
  Rng rng(17);
  int inside = 0, outside = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const int scene = uniform_int(rng, 0, kNumScenes - 1);
    const auto s = scene_ptr(scene);
    const int route = uniform_int(rng, 0, static_cast<int>(s->routes.size()) - 1);
    WorldState w = empty_world(scene, route);
    const Route& r = w.route();
    place(w, uniform(rng, 0.0, r.length() - 20.0), 5.5);
    const Vec2 q = w.ego.pose.position + Vec2{uniform(rng, -18.0, 18.0), uniform(rng, -18.0, 18.0)};
    const bool expected = oracle_conflict(w, q);
    // Skip points within a hair of the zone boundary.
    bool near_edge = false;
    for (double dx : {-0.03, 0.03})
      for (double dy : {-0.03, 0.03}) near_edge = near_edge || oracle_conflict(w, q + Vec2{dx, dy}) != expected;
    if (near_edge) continue;
    w.pedestrians = {pedestrian_at(*s, q)};
    EXPECT_EQ(decision::nearest_conflict(w, r).has_value(), expected) << "trial " << trial;
    (expected ? inside : outside)++;
  }
  EXPECT_GT(inside, 10);
  EXPECT_GT(outside, 10);
}

TEST(Properties, MissionConsistencyInsideIntersection) {
  for (int i = 0; i < kNumScenes; ++i) {
    const auto s = scene_ptr(i);
    for (const auto& r : s->routes) {
      WorldState w = empty_world(i, r.route_id);
      const double b = s->box_half() + 2.0;
      for (double a = 0.0; a < r.length(); a += 0.5) {
        place(w, a, 5.0);
        const Vec2 p = w.ego.pose.position;
        const bool inside = std::abs(p.x) <= b && std::abs(p.y) <= b;
        const LatCmd c = decision::lateral_command(w, r);
        ASSERT_EQ(c, inside ? decision::mission_command(r.mission) : LatCmd::FollowLane)
            << "scene " << i << " route " << r.route_id << " arc " << a;
      }
    }
  }
}

TEST(Properties, DecisionIsPureAndTotal) {
  Rng rng(4);
  WorldState w = spawn_episode(scene_ptr(4), 3, weather_by_name("ClearNoon"), 8);
  for (int t = 0; t < 300; ++t) {
    const auto a = decision::decide(w);
    const auto b = decision::decide(w);
    ASSERT_EQ(a, b);
    ASSERT_GE(static_cast<int>(a.lat), 0);
    ASSERT_LT(static_cast<int>(a.lat), decision::kNumLat);
    ASSERT_GE(static_cast<int>(a.lon), 0);
    ASSERT_LT(static_cast<int>(a.lon), decision::kNumLon);
    advance(w, expert::expert_action(w));
    if (detect_terminal(w, w.route())) break;
  }
}

TEST(Commands, EncodingsFixed) {
  EXPECT_EQ(static_cast<int>(LatCmd::FollowLane), 0);
  EXPECT_EQ(static_cast<int>(LatCmd::GoStraight), 1);
  EXPECT_EQ(static_cast<int>(LatCmd::TurnLeft), 2);
  EXPECT_EQ(static_cast<int>(LatCmd::TurnRight), 3);
  EXPECT_EQ(static_cast<int>(LonCmd::Decelerate), 0);
  EXPECT_EQ(static_cast<int>(LonCmd::Maintain), 1);
  EXPECT_EQ(static_cast<int>(LonCmd::Accelerate), 2);
}
