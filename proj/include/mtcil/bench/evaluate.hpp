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
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "mtcil/bench/metrics.hpp"
#include "mtcil/common.hpp"
#include "mtcil/decision.hpp"
#include "mtcil/expert/expert.hpp"
#include "mtcil/policy/model.hpp"
#include "mtcil/sim/catalog.hpp"
#include "mtcil/sim/render.hpp"
#include "mtcil/sim/weather.hpp"
#include "mtcil/sim/world.hpp"

namespace mtcil::bench {

// Anything that can drive: maps the current observation and commands to an
// action. The world is passed for privileged controllers (the expert); a
// learned policy must ignore it.
struct Controller {
  std::string tag;
  bool needs_observation = true;
  std::function<sim::Action(const sim::WorldState&, const sim::Observation&, decision::CommandPair)> act;
};

inline Controller expert_controller() {
  return {"Expert", false, [](const sim::WorldState& w, const sim::Observation&, decision::CommandPair) {
            return expert::expert_action(w);
          }};
}

inline Controller zero_controller() {
  return {"Zero", false, [](const sim::WorldState&, const sim::Observation&, decision::CommandPair) {
            return sim::Action{0.0, 0.0};
          }};
}

// The policy is shared, not copied, so many episodes can reuse one checkpoint.
inline Controller policy_controller(std::shared_ptr<const policy::Policy> p, std::string tag = {}) {
  if (tag.empty()) tag = p->config().tag();
  return {std::move(tag), true,
          [p](const sim::WorldState&, const sim::Observation& obs, decision::CommandPair c) {
            return p->act(obs, c);
          }};
}

// Closed loop: observe, command, act (clipped), step, check for a terminal
// event. A controller that throws or returns a non-finite action ends the
// episode as a Collision-equivalent failure with a diagnostic.
inline EpisodeResult run_episode(const Controller& ctl, int scene_id, int route_id,
                                 const sim::WeatherProfile& weather, std::uint64_t seed) {
  const auto scene = sim::scene_ptr(scene_id);
  const sim::Route& route = scene->route(route_id);
  sim::WorldState world = sim::spawn_episode(scene, route_id, weather, seed);
  Rng obs_rng(derive_seed(seed, scene_id, route_id, 0x0b5e));
  EpisodeResult r;
  r.scene_id = scene_id;
  r.route_id = route_id;
  r.weather = std::string(weather.name);
  r.seed = seed;
  r.goal = route.goal;
  r.goal_lane_direction = route.goal_lane_direction;
  sim::Observation obs;
  while (true) {
    if (const auto ev = sim::detect_terminal(world, route)) {
      r.terminal = *ev;
      break;
    }
    decision::CommandPair cmds;
    try {
      cmds = decision::decide(world, route);
    } catch (const decision::OffRouteError& e) {
      // Far off route the episode is already lost; score it as lane invasion.
      r.terminal = sim::TerminalEvent::LaneInvasion;
      r.diagnostic = e.what();
      break;
    }
    if (ctl.needs_observation) obs = sim::render_observation(world, weather, obs_rng);
    sim::Action a;
    try {
      a = ctl.act(world, obs, cmds);
    } catch (const Error& e) {
      r.terminal = sim::TerminalEvent::Collision;
      r.diagnostic = std::string("controller failed: ") + e.what();
      break;
    }
    if (!std::isfinite(a.steer) || !std::isfinite(a.accel)) {
      r.terminal = sim::TerminalEvent::Collision;
      r.diagnostic = "controller returned a non-finite action";
      break;
    }
    a = sim::clip_action(a);
    sim::advance(world, a);
    log_step(r, route, a, world.ego.pose.position);
  }
  r.disruptions = world.disruption_events;
  r.final_pose = world.ego.pose;
  return r;
}

// Evaluation conditions: train scenes with train weather, test scenes with
// train weather, test scenes with test weather.
enum class Condition { TT, tT, tt };

inline std::string_view to_string(Condition c) {
  switch (c) {
    case Condition::TT: return "TT";
    case Condition::tT: return "tT";
    case Condition::tt: return "tt";
  }
  return "?";
}

inline Condition condition_from_string(std::string_view s) {
  if (s == "TT") return Condition::TT;
  if (s == "tT") return Condition::tT;
  if (s == "tt") return Condition::tt;
  fail("unknown condition '", s, "' (expected TT, tT or tt)");
}

inline std::string_view condition_label(Condition c) {
  switch (c) {
    case Condition::TT: return "train-scene/train-weather";
    case Condition::tT: return "test-scene/train-weather";
    case Condition::tt: return "test-scene/test-weather";
  }
  return "?";
}

inline std::vector<int> condition_scenes(Condition c) {
  std::vector<int> out;
  for (int i = 0; i < sim::kNumScenes; ++i)
    if (sim::is_train_scene(i) == (c == Condition::TT)) out.push_back(i);
  return out;
}

inline std::vector<sim::WeatherProfile> condition_weathers(Condition c) {
  return sim::weathers_for(c == Condition::tt ? sim::Split::Test : sim::Split::Train);
}

struct EpisodeSpec {
  int scene_id;
  int route_id;
  std::string_view weather;
  std::uint64_t seed;
};

// Episode list for a condition, sorted by (scene, route, index). The weather
// of each episode is drawn uniformly from the condition's set.
inline std::vector<EpisodeSpec> condition_episodes(Condition c, int episodes_per_route, std::uint64_t seed) {
  if (episodes_per_route < 1) fail("episodes_per_route must be >= 1");
  const auto weathers = condition_weathers(c);
  std::vector<EpisodeSpec> out;
  for (int s : condition_scenes(c)) {
    const auto scene = sim::scene_ptr(s);
    for (const auto& route : scene->routes) {
      for (int e = 0; e < episodes_per_route; ++e) {
        const std::uint64_t es = derive_seed(seed, s, route.route_id, e, 0xe7a1);
        Rng pick(derive_seed(es, 0x3ea));
        const auto& w = weathers[static_cast<std::size_t>(uniform_int(pick, 0, static_cast<int>(weathers.size()) - 1))];
        out.push_back({s, route.route_id, w.name, es});
      }
    }
  }
  return out;
}

struct BenchmarkReport {
  std::string model_tag;
  Condition condition = Condition::TT;
  int episodes = 0;
  std::array<int, 5> counts{};  // Success, PoorEndPose, Timeout, LaneInvasion, Collision
  Rates rates;
  QualityMetrics metrics;
};

inline BenchmarkReport summarize_results(const std::vector<EpisodeResult>& rs, std::string tag, Condition c) {
  BenchmarkReport rep;
  rep.model_tag = std::move(tag);
  rep.condition = c;
  rep.episodes = static_cast<int>(rs.size());
  for (const auto& r : rs) {
    switch (r.terminal) {
      case sim::TerminalEvent::Success: ++rep.counts[0]; break;
      case sim::TerminalEvent::PoorEndPose: ++rep.counts[1]; break;
      case sim::TerminalEvent::Timeout: ++rep.counts[2]; break;
      case sim::TerminalEvent::LaneInvasion: ++rep.counts[3]; break;
      case sim::TerminalEvent::Collision: ++rep.counts[4]; break;
    }
  }
  rep.rates = rates(rs);
  rep.metrics = quality(rs);
  return rep;
}

struct EvaluateResult {
  BenchmarkReport report;
  std::vector<EpisodeResult> episodes;
};

using Progress = std::function<void(std::size_t done, std::size_t total)>;

inline EvaluateResult evaluate(const Controller& ctl, Condition c, int episodes_per_route, std::uint64_t seed,
                               const Progress& progress = {}) {
  const auto specs = condition_episodes(c, episodes_per_route, seed);
  EvaluateResult out;
  out.episodes.reserve(specs.size());
  for (const auto& s : specs) {
    out.episodes.push_back(run_episode(ctl, s.scene_id, s.route_id, sim::weather_by_name(s.weather), s.seed));
    if (progress) progress(out.episodes.size(), specs.size());
  }
  out.report = summarize_results(out.episodes, ctl.tag, c);
  return out;
}

}  // namespace mtcil::bench
