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

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtcil/common.hpp"
#include "mtcil/sim/scene.hpp"
#include "mtcil/sim/weather.hpp"
#include "mtcil/sim/world.hpp"

// Versioned JSON export of every scene, route and weather so the CLI, the
// session server and the browser client agree on one protocol.
namespace mtcil::sim {

inline constexpr int kCatalogVersion = 1;

inline nlohmann::json to_json(Vec2 v) { return nlohmann::json::array({v.x, v.y}); }

inline nlohmann::json route_json(const Route& r) {
  nlohmann::json wps = nlohmann::json::array();
  for (const auto& w : r.waypoints) wps.push_back({w.position.x, w.position.y, w.direction});
  return {{"route_id", r.route_id},
          {"mission", to_string(r.mission)},
          {"approach_arm", r.approach_arm},
          {"exit_arm", r.exit_arm},
          {"goal", to_json(r.goal)},
          {"goal_lane_direction", r.goal_lane_direction},
          {"length", r.length()},
          {"waypoints", wps}};
}

inline nlohmann::json scene_json(const SceneSpec& s) {
  nlohmann::json cws = nlohmann::json::array();
  for (const auto& c : s.crosswalks) {
    cws.push_back({{"id", c.id}, {"arm", c.arm}, {"a", to_json(c.a)}, {"b", to_json(c.b)}, {"width", c.width}});
  }
  nlohmann::json obs = nlohmann::json::array();
  for (const auto& o : s.obstacles) obs.push_back({{"center", to_json(o.center)}, {"radius", o.radius}});
  nlohmann::json routes = nlohmann::json::array();
  for (const auto& r : s.routes) routes.push_back(route_json(r));
  return {{"scene_id", s.scene_id},
          {"split", to_string(s.split)},
          {"lane_width", s.lane_width},
          {"lanes_per_direction", s.lanes_per_direction},
          {"curb_radius", s.curb_radius},
          {"arm_length", s.arm_length},
          {"box_half", s.box_half()},
          {"crosswalks", cws},
          {"obstacles", obs},
          {"routes", routes}};
}

inline nlohmann::json catalog_json() {
  nlohmann::json scenes = nlohmann::json::array();
  for (int i = 0; i < kNumScenes; ++i) scenes.push_back(scene_json(build_scene(i)));
  nlohmann::json weathers = nlohmann::json::array();
  for (const auto& w : kWeathers) {
    weathers.push_back({{"name", w.name},
                        {"noise_sigma", w.noise_sigma},
                        {"channel_dropout_p", w.channel_dropout_p},
                        {"brightness_bias", w.brightness_bias},
                        {"split", to_string(w.split)}});
  }
  return {{"catalog_version", kCatalogVersion},
          {"dt", kDt},
          {"max_ticks", kMaxTicks},
          {"total_routes", kTotalRoutes},
          {"scenes", scenes},
          {"weathers", weathers}};
}

// Hex FNV-1a of the compact catalog dump; datasets record it so a reader can
// tell when the geometry they were collected on has changed.
inline std::string catalog_hash() {
  static const std::string h = [] {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(catalog_json().dump())));
    return std::string(buf);
  }();
  return h;
}

// Scenes are immutable once built; share one instance per id.
inline std::shared_ptr<const SceneSpec> scene_ptr(int scene_id) {
  static const std::vector<std::shared_ptr<const SceneSpec>> cache = [] {
    std::vector<std::shared_ptr<const SceneSpec>> v;
    for (int i = 0; i < kNumScenes; ++i) v.push_back(std::make_shared<const SceneSpec>(build_scene(i)));
    return v;
  }();
  if (scene_id < 0 || scene_id >= kNumScenes) fail("invalid scene id ", scene_id);
  return cache[static_cast<std::size_t>(scene_id)];
}

inline nlohmann::json world_json(const WorldState& w) {
  nlohmann::json peds = nlohmann::json::array();
  for (const auto& p : w.pedestrians) {
    peds.push_back({{"id", p.id},
                    {"x", p.pose.position.x},
                    {"y", p.pose.position.y},
                    {"heading", p.pose.heading},
                    {"walk_speed", p.walk_speed},
                    {"crosswalk_id", p.crosswalk_id},
                    {"progress", p.progress},
                    {"disrupted", p.disrupted},
                    {"base_speed", p.base_speed},
                    {"direction", p.direction},
                    {"delay", p.delay}});
  }
  return {{"scene_id", w.scene ? w.scene->scene_id : -1},
          {"route_id", w.route_id},
          {"weather", w.weather},
          {"tick", w.tick},
          {"rng_seed", w.rng_seed},
          {"lane_invasion_count", w.lane_invasion_count},
          {"last_invasion_tick", w.last_invasion_tick},
          {"disruption_events", w.disruption_events},
          {"ego",
           {{"x", w.ego.pose.position.x},
            {"y", w.ego.pose.position.y},
            {"heading", w.ego.pose.heading},
            {"speed", w.ego.speed}}},
          {"pedestrians", peds}};
}

}  // namespace mtcil::sim
