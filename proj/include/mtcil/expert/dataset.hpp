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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <boost/beast/core/detail/base64.hpp>
#include <json.hpp>

#include "mtcil/bench/metrics.hpp"
#include "mtcil/common.hpp"
#include "mtcil/decision.hpp"
#include "mtcil/expert/expert.hpp"
#include "mtcil/sim/catalog.hpp"
#include "mtcil/sim/render.hpp"
#include "mtcil/sim/weather.hpp"
#include "mtcil/sim/world.hpp"

namespace mtcil::expert {

enum class DataSplit { Train, Val, Test };

inline std::string_view to_string(DataSplit s) {
  switch (s) {
    case DataSplit::Train: return "train";
    case DataSplit::Val: return "val";
    case DataSplit::Test: return "test";
  }
  return "?";
}

inline DataSplit data_split_from_string(std::string_view s) {
  if (s == "train") return DataSplit::Train;
  if (s == "val") return DataSplit::Val;
  if (s == "test") return DataSplit::Test;
  fail("unknown data split '", s, "'");
}

struct SampleMeta {
  int scene_id = 0;
  int route_id = 0;
  std::string weather;
  int tick = 0;
  std::uint64_t seed = 0;
  friend bool operator==(const SampleMeta&, const SampleMeta&) = default;
};

// One (observation, label, commands) tuple. `action` is the clean intent
// used as the label; `executed` is what the world actually received.
struct Sample {
  sim::Observation obs;
  sim::Action action;
  sim::Action executed;
  bool perturbed = false;
  decision::CommandPair cmds;
  SampleMeta meta;
  friend bool operator==(const Sample&, const Sample&) = default;
};

struct TrajectoryQuality {
  int steps = 0;
  double ego_jerk = 0.0;
  double other_jerk = 0.0;
  double dev_waypoint = 0.0;
  double dev_destination = 0.0;
  double heading_dev = 0.0;
  friend bool operator==(const TrajectoryQuality&, const TrajectoryQuality&) = default;
};

// A full episode: per-tick intent/executed logs (kept so the run can be
// replayed exactly) plus the recorded samples.
struct Trajectory {
  int scene_id = 0;
  int route_id = 0;
  sim::Mission mission = sim::Mission::GoStraight;
  std::string weather;
  std::uint64_t seed = 0;
  DataSplit split = DataSplit::Train;
  sim::TerminalEvent terminal = sim::TerminalEvent::Timeout;
  TrajectoryQuality quality;
  std::vector<sim::Action> intended;
  std::vector<sim::Action> executed;
  std::vector<int> perturbed_ticks;
  std::vector<Sample> samples;
  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

struct Dataset {
  std::string catalog_hash = sim::catalog_hash();
  std::vector<Trajectory> trajectories;

  std::size_t frames() const {
    std::size_t n = 0;
    for (const auto& t : trajectories) n += t.samples.size();
    return n;
  }
  std::size_t count(DataSplit s) const {
    return static_cast<std::size_t>(
        std::count_if(trajectories.begin(), trajectories.end(), [s](const Trajectory& t) { return t.split == s; }));
  }
  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Quality gate thresholds for stored demonstrations.
inline constexpr double kMaxDevWaypoint = 0.8;

inline bool passes_quality_gate(const Trajectory& t) {
  return t.terminal == sim::TerminalEvent::Success && t.quality.ego_jerk == 0.0 &&
         t.quality.dev_waypoint <= kMaxDevWaypoint;
}

// Tick-by-tick demonstration recorder shared by scripted collection and the
// human session server. Each step: commands, observation (every
// `record_stride`-th tick), steering noise, world advance, terminal check.
class DemoRecorder {
 public:
  DemoRecorder(int scene_id, int route_id, const sim::WeatherProfile& weather, std::uint64_t seed, double noise_p,
               int record_stride = 1)
      : scene_(sim::scene_ptr(scene_id)),
        route_(&scene_->route(route_id)),
        weather_(weather),
        world_(sim::spawn_episode(scene_, route_id, weather, seed)),
        noise_p_(noise_p),
        stride_(record_stride),
        obs_rng_(derive_seed(seed, scene_id, route_id, 0x0b5e)),
        noise_rng_(derive_seed(seed, scene_id, route_id, 0x401e)) {
    if (record_stride < 1) fail("record_stride must be >= 1");
    if (noise_p < 0.0 || noise_p > 1.0) fail("noise probability ", noise_p, " outside [0, 1]");
    traj_.scene_id = scene_id;
    traj_.route_id = route_id;
    traj_.mission = route_->mission;
    traj_.weather = std::string(weather.name);
    traj_.seed = seed;
    log_.scene_id = scene_id;
    log_.route_id = route_id;
    log_.weather = traj_.weather;
    log_.seed = seed;
    log_.goal = route_->goal;
    log_.goal_lane_direction = route_->goal_lane_direction;
    terminal_ = sim::detect_terminal(world_, *route_);
  }

  const sim::WorldState& world() const { return world_; }
  const sim::Route& route() const { return *route_; }
  bool done() const { return terminal_.has_value(); }
  std::optional<sim::TerminalEvent> terminal() const { return terminal_; }

  // Commands for the current state; an ego far off route ends the episode.
  std::optional<decision::CommandPair> commands() const {
    try {
      return decision::decide(world_, *route_);
    } catch (const decision::OffRouteError&) {
      return std::nullopt;
    }
  }

  std::optional<sim::TerminalEvent> step(sim::Action intended) {
    if (done()) fail("DemoRecorder: episode already finished");
    intended = sim::clip_action(intended);
    const auto cmds = commands();
    if (!cmds) {
      terminal_ = sim::TerminalEvent::LaneInvasion;
      return terminal_;
    }
    const int tick = world_.tick;
    const NoiseResult nr = inject_noise(intended, noise_rng_, noise_p_);
    if (tick % stride_ == 0) {
      Sample s;
      s.obs = sim::render_observation(world_, weather_, obs_rng_);
      s.action = intended;
      s.executed = nr.executed;
      s.perturbed = nr.perturbed;
      s.cmds = *cmds;
      s.meta = {traj_.scene_id, traj_.route_id, traj_.weather, tick, traj_.seed};
      traj_.samples.push_back(std::move(s));
    }
    traj_.intended.push_back(intended);
    traj_.executed.push_back(nr.executed);
    if (nr.perturbed) traj_.perturbed_ticks.push_back(tick);
    sim::advance(world_, nr.executed);
    bench::log_step(log_, *route_, nr.executed, world_.ego.pose.position);
    terminal_ = sim::detect_terminal(world_, *route_);
    return terminal_;
  }

  // Closes the episode (a still-running one is scored as a timeout) and
  // returns the trajectory with its quality summary.
  Trajectory finish() {
    traj_.terminal = terminal_.value_or(sim::TerminalEvent::Timeout);
    log_.terminal = traj_.terminal;
    log_.disruptions = world_.disruption_events;
    log_.final_pose = world_.ego.pose;
    const std::vector<bench::EpisodeResult> one{log_};
    traj_.quality = {log_.steps,
                     bench::ego_jerk(one),
                     bench::other_jerk(one),
                     bench::dev_waypoint(one),
                     bench::dev_destination(one),
                     bench::heading_dev(one)};
    return traj_;
  }

  const bench::EpisodeResult& log() const { return log_; }

 private:
  std::shared_ptr<const sim::SceneSpec> scene_;
  const sim::Route* route_;
  sim::WeatherProfile weather_;
  sim::WorldState world_;
  double noise_p_;
  int stride_;
  Rng obs_rng_;
  Rng noise_rng_;
  Trajectory traj_;
  bench::EpisodeResult log_;
  std::optional<sim::TerminalEvent> terminal_;
};

struct CollectOptions {
  std::vector<int> scenes{0, 1, 3, 4};
  int episodes_per_route = 5;
  double noise_p = 0.1;
  std::uint64_t seed = 0;
  int record_stride = 1;  // keep a sample every k-th tick
  double min_success_rate = 0.5;
};

struct CollectStats {
  int episodes = 0;
  int successes = 0;
  int kept = 0;
};

// The weather for a collection episode is uniform over the Noon profiles.
inline const sim::WeatherProfile& collection_weather(std::uint64_t episode_seed) {
  static const auto noon = sim::weathers_for(sim::Split::Train);
  Rng pick(derive_seed(episode_seed, 0x3ea));
  return sim::weather_by_name(noon[static_cast<std::size_t>(uniform_int(pick, 0, static_cast<int>(noon.size()) - 1))].name);
}

inline std::uint64_t collection_seed(std::uint64_t seed, int scene, int route, int episode) {
  return derive_seed(seed, scene, route, episode, 0xc011);
}

inline Trajectory run_expert_demo(int scene_id, int route_id, std::uint64_t episode_seed, double noise_p,
                                  int record_stride) {
  DemoRecorder rec(scene_id, route_id, collection_weather(episode_seed), episode_seed, noise_p, record_stride);
  while (!rec.done()) {
    // Off route the recorder ends the episode itself; the action is unused.
    const sim::Action a = rec.commands() ? expert_action(rec.world(), rec.route()) : sim::Action{};
    rec.step(a);
  }
  return rec.finish();
}

// Splits within train scenes: a seeded shuffle sends round(n/6) trajectories
// to validation, giving 5:1. Test-scene trajectories are tagged test.
inline void assign_splits(Dataset& d, std::uint64_t seed) {
  std::vector<std::size_t> train_idx;
  for (std::size_t i = 0; i < d.trajectories.size(); ++i) {
    auto& t = d.trajectories[i];
    if (sim::is_train_scene(t.scene_id)) {
      t.split = DataSplit::Train;
      train_idx.push_back(i);
    } else {
      t.split = DataSplit::Test;
    }
  }
  Rng rng(derive_seed(seed, 0x5b1));
  for (std::size_t i = train_idx.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(train_idx[i - 1], train_idx[j]);
  }
  const std::size_t n_val = static_cast<std::size_t>(std::llround(train_idx.size() / 6.0));
  for (std::size_t k = 0; k < n_val; ++k) d.trajectories[train_idx[k]].split = DataSplit::Val;
}

using CollectProgress = std::function<void(int scene, int done, int total)>;

// Scripted-expert collection. Only Success episodes that pass the quality
// gate are stored. Aborts when the expert itself fails too often on a scene,
// which means the environment is misconfigured.
inline Dataset collect(const CollectOptions& opt, CollectStats* stats = nullptr,
                       const CollectProgress& progress = {}) {
  if (opt.scenes.empty()) fail("collect: no scenes given");
  if (opt.episodes_per_route < 1) fail("collect: episodes_per_route must be >= 1");
  Dataset d;
  CollectStats st;
  for (int scene : opt.scenes) {
    const auto sp = sim::scene_ptr(scene);
    int total = 0, ok = 0;
    const int per_scene = static_cast<int>(sp->routes.size()) * opt.episodes_per_route;
    for (const auto& route : sp->routes) {
      for (int e = 0; e < opt.episodes_per_route; ++e) {
        Trajectory t = run_expert_demo(scene, route.route_id, collection_seed(opt.seed, scene, route.route_id, e),
                                       opt.noise_p, opt.record_stride);
        ++total;
        if (t.terminal == sim::TerminalEvent::Success) ++ok;
        if (passes_quality_gate(t)) d.trajectories.push_back(std::move(t));
        if (progress) progress(scene, total, per_scene);
      }
    }
    if (static_cast<double>(ok) < opt.min_success_rate * total) {
      fail("collect: expert succeeded on only ", ok, "/", total, " episodes of scene ", scene,
           "; the environment looks misconfigured");
    }
    st.episodes += total;
    st.successes += ok;
  }
  st.kept = static_cast<int>(d.trajectories.size());
  assign_splits(d, opt.seed);
  if (stats) *stats = st;
  return d;
}

// Replays the clean labels open loop from the episode start (no noise) and
// reports how that run ends.
inline sim::TerminalEvent replay_labels(const Trajectory& t) {
  const auto scene = sim::scene_ptr(t.scene_id);
  const sim::Route& route = scene->route(t.route_id);
  sim::WorldState w = sim::spawn_episode(scene, t.route_id, sim::weather_by_name(t.weather), t.seed);
  for (const auto& a : t.intended) {
    if (const auto ev = sim::detect_terminal(w, route)) return *ev;
    sim::advance(w, a);
  }
  // Past the log, hold still until something ends the episode.
  while (true) {
    if (const auto ev = sim::detect_terminal(w, route)) return *ev;
    sim::advance(w, {0.0, 0.0});
  }
}

// Re-simulates the executed actions and checks every stored sample's
// commands against the decision module on the reconstructed state.
inline bool replay_commands_agree(const Trajectory& t) {
  const auto scene = sim::scene_ptr(t.scene_id);
  const sim::Route& route = scene->route(t.route_id);
  sim::WorldState w = sim::spawn_episode(scene, t.route_id, sim::weather_by_name(t.weather), t.seed);
  std::size_t next = 0;
  for (std::size_t tick = 0; tick < t.executed.size(); ++tick) {
    while (next < t.samples.size() && t.samples[next].meta.tick == static_cast<int>(tick)) {
      if (!(decision::decide(w, route) == t.samples[next].cmds)) return false;
      ++next;
    }
    sim::advance(w, t.executed[tick]);
  }
  return next == t.samples.size();
}

// ---- JSON Lines persistence ----

inline constexpr int kDatasetSchemaVersion = 1;

namespace detail {

inline std::string b64_encode(const std::vector<std::uint8_t>& bytes) {
  namespace b64 = boost::beast::detail::base64;
  std::string out(b64::encoded_size(bytes.size()), '\0');
  out.resize(b64::encode(out.data(), bytes.data(), bytes.size()));
  return out;
}

inline std::vector<std::uint8_t> b64_decode(const std::string& s) {
  namespace b64 = boost::beast::detail::base64;
  if (s.size() % 4 != 0) fail("base64 payload length ", s.size(), " is not a multiple of 4");
  std::vector<std::uint8_t> out(b64::decoded_size(s.size()));
  const auto [written, read] = b64::decode(out.data(), s.data(), s.size());
  if (read != s.size()) fail("invalid base64 payload");
  out.resize(written);
  return out;
}

inline nlohmann::json actions_json(const std::vector<sim::Action>& v) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& x : v) {
    a.push_back(x.steer);
    a.push_back(x.accel);
  }
  return a;
}

inline std::vector<sim::Action> actions_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() % 2 != 0) fail("action log must be a flat array of pairs");
  std::vector<sim::Action> out;
  for (std::size_t i = 0; i < j.size(); i += 2) out.push_back({j[i].get<double>(), j[i + 1].get<double>()});
  return out;
}

inline decision::LatCmd lat_from_string(std::string_view s) {
  for (int i = 0; i < decision::kNumLat; ++i)
    if (decision::to_string(static_cast<decision::LatCmd>(i)) == s) return static_cast<decision::LatCmd>(i);
  fail("unknown lateral command '", s, "'");
}

inline decision::LonCmd lon_from_string(std::string_view s) {
  for (int i = 0; i < decision::kNumLon; ++i)
    if (decision::to_string(static_cast<decision::LonCmd>(i)) == s) return static_cast<decision::LonCmd>(i);
  fail("unknown longitudinal command '", s, "'");
}

inline sim::Mission mission_from_string(std::string_view s) {
  for (auto m : {sim::Mission::LeftTurn, sim::Mission::GoStraight, sim::Mission::RightTurn})
    if (sim::to_string(m) == s) return m;
  fail("unknown mission '", s, "'");
}

inline nlohmann::json quality_json(const TrajectoryQuality& q) {
  return {{"steps", q.steps},
          {"ego_jerk", q.ego_jerk},
          {"other_jerk", q.other_jerk},
          {"dev_waypoint", q.dev_waypoint},
          {"dev_destination", q.dev_destination},
          {"heading_dev", q.heading_dev}};
}

}  // namespace detail

inline nlohmann::json trajectory_line(const Trajectory& t, std::size_t index) {
  return {{"type", "trajectory"},
          {"index", index},
          {"scene_id", t.scene_id},
          {"route_id", t.route_id},
          {"mission", sim::to_string(t.mission)},
          {"weather", t.weather},
          {"seed", t.seed},
          {"split", to_string(t.split)},
          {"terminal", sim::to_string(t.terminal)},
          {"quality", detail::quality_json(t.quality)},
          {"intended", detail::actions_json(t.intended)},
          {"executed", detail::actions_json(t.executed)},
          {"perturbed_ticks", t.perturbed_ticks},
          {"samples", t.samples.size()}};
}

inline nlohmann::json sample_line(const Sample& s, std::size_t traj_index) {
  return {{"type", "sample"},
          {"trajectory", traj_index},
          {"scene_id", s.meta.scene_id},
          {"route_id", s.meta.route_id},
          {"weather", s.meta.weather},
          {"tick", s.meta.tick},
          {"seed", s.meta.seed},
          {"action", {s.action.steer, s.action.accel}},
          {"executed", {s.executed.steer, s.executed.accel}},
          {"perturbed", s.perturbed},
          {"cmds", {{"lat", decision::to_string(s.cmds.lat)}, {"lon", decision::to_string(s.cmds.lon)}}},
          {"ego_speed", s.obs.ego_speed},
          {"raster", detail::b64_encode(s.obs.raster)}};
}

inline void write_dataset(std::ostream& os, const Dataset& d) {
  const nlohmann::json header = {{"type", "header"},
                                 {"schema_version", kDatasetSchemaVersion},
                                 {"catalog_hash", d.catalog_hash},
                                 {"trajectories", d.trajectories.size()},
                                 {"frames", d.frames()}};
  os << header.dump() << '\n';
  for (std::size_t i = 0; i < d.trajectories.size(); ++i) {
    const auto& t = d.trajectories[i];
    os << trajectory_line(t, i).dump() << '\n';
    for (const auto& s : t.samples) os << sample_line(s, i).dump() << '\n';
  }
  if (!os) fail("dataset write failed");
}

struct ReadOptions {
  bool check_catalog = true;
};

// Any malformed, truncated or inconsistent line is reported with its 1-based
// line number.
inline Dataset read_dataset(std::istream& is, const ReadOptions& opt = {}) {
  Dataset d;
  std::string line;
  std::size_t lineno = 0;
  std::size_t expected_traj = 0, expected_frames = 0;
  std::size_t pending_samples = 0;
  auto at = [&](const std::string& msg) -> Error {
    return Error("dataset line " + std::to_string(lineno) + ": " + msg);
  };
  bool have_header = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) throw at("empty line");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      const std::string type = j.at("type").get<std::string>();
      if (!have_header) {
        if (type != "header") throw at("expected header line");
        const int v = j.at("schema_version").get<int>();
        if (v != kDatasetSchemaVersion) {
          throw at("schema version " + std::to_string(v) + " unsupported (reader is v" +
                   std::to_string(kDatasetSchemaVersion) + ")");
        }
        d.catalog_hash = j.at("catalog_hash").get<std::string>();
        if (opt.check_catalog && d.catalog_hash != sim::catalog_hash()) {
          throw at("catalog hash " + d.catalog_hash + " does not match this build (" + sim::catalog_hash() + ")");
        }
        expected_traj = j.at("trajectories").get<std::size_t>();
        expected_frames = j.at("frames").get<std::size_t>();
        have_header = true;
      } else if (type == "trajectory") {
        if (pending_samples != 0) throw at("previous trajectory is missing samples");
        if (j.at("index").get<std::size_t>() != d.trajectories.size()) throw at("trajectory index out of order");
        Trajectory t;
        t.scene_id = j.at("scene_id").get<int>();
        t.route_id = j.at("route_id").get<int>();
        t.mission = detail::mission_from_string(j.at("mission").get<std::string>());
        t.weather = j.at("weather").get<std::string>();
        sim::weather_by_name(t.weather);
        t.seed = j.at("seed").get<std::uint64_t>();
        t.split = data_split_from_string(j.at("split").get<std::string>());
        t.terminal = sim::terminal_from_string(j.at("terminal").get<std::string>());
        const auto& q = j.at("quality");
        t.quality = {q.at("steps").get<int>(),          q.at("ego_jerk").get<double>(),
                     q.at("other_jerk").get<double>(),  q.at("dev_waypoint").get<double>(),
                     q.at("dev_destination").get<double>(), q.at("heading_dev").get<double>()};
        t.intended = detail::actions_from_json(j.at("intended"));
        t.executed = detail::actions_from_json(j.at("executed"));
        t.perturbed_ticks = j.at("perturbed_ticks").get<std::vector<int>>();
        pending_samples = j.at("samples").get<std::size_t>();
        d.trajectories.push_back(std::move(t));
      } else if (type == "sample") {
        if (d.trajectories.empty() || pending_samples == 0) throw at("sample without an open trajectory");
        if (j.at("trajectory").get<std::size_t>() != d.trajectories.size() - 1) throw at("sample trajectory mismatch");
        Sample s;
        s.meta = {j.at("scene_id").get<int>(), j.at("route_id").get<int>(), j.at("weather").get<std::string>(),
                  j.at("tick").get<int>(), j.at("seed").get<std::uint64_t>()};
        const auto& a = j.at("action");
        const auto& e = j.at("executed");
        s.action = {a.at(0).get<double>(), a.at(1).get<double>()};
        s.executed = {e.at(0).get<double>(), e.at(1).get<double>()};
        if (std::abs(s.action.steer) > 1.0 || std::abs(s.action.accel) > 1.0) throw at("action outside [-1, 1]");
        s.perturbed = j.at("perturbed").get<bool>();
        s.cmds = {detail::lat_from_string(j.at("cmds").at("lat").get<std::string>()),
                  detail::lon_from_string(j.at("cmds").at("lon").get<std::string>())};
        s.obs.ego_speed = j.at("ego_speed").get<double>();
        s.obs.raster = detail::b64_decode(j.at("raster").get<std::string>());
        if (s.obs.raster.size() != static_cast<std::size_t>(sim::kRasterSize)) {
          throw at("raster has " + std::to_string(s.obs.raster.size()) + " cells, expected " +
                   std::to_string(sim::kRasterSize));
        }
        d.trajectories.back().samples.push_back(std::move(s));
        --pending_samples;
      } else {
        throw at("unknown record type '" + type + "'");
      }
    } catch (const nlohmann::json::exception& ex) {
      throw at(ex.what());
    } catch (const Error& ex) {
      const std::string msg = ex.what();
      if (msg.rfind("dataset line ", 0) == 0) throw;
      throw at(msg);
    }
  }
  ++lineno;
  if (!have_header) throw at("missing header (empty file)");
  if (pending_samples != 0) throw at("truncated: last trajectory is missing samples");
  if (d.trajectories.size() != expected_traj) throw at("truncated: header promised more trajectories");
  if (d.frames() != expected_frames) throw at("truncated: frame count does not match header");
  return d;
}

inline void save_dataset(const std::string& path, const Dataset& d) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail("cannot open '", path, "' for writing");
  write_dataset(os, d);
}

inline Dataset load_dataset(const std::string& path, const ReadOptions& opt = {}) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail("cannot open dataset '", path, "'");
  return read_dataset(is, opt);
}

// Appends trajectories to an existing file by rewriting it; creates the file
// when missing.
inline void append_trajectories(const std::string& path, const std::vector<Trajectory>& ts) {
  Dataset d;
  if (std::ifstream probe(path); probe.good() && probe.peek() != std::ifstream::traits_type::eof()) {
    d = read_dataset(probe);
  }
  for (const auto& t : ts) d.trajectories.push_back(t);
  save_dataset(path, d);
}

// ---- dataset summary ----

struct CategoryCount {
  std::size_t frames = 0;
  std::size_t trajectories = 0;
  friend bool operator==(const CategoryCount&, const CategoryCount&) = default;
};

struct DatasetSummary {
  std::map<std::string, CategoryCount> by_scene;
  std::map<std::string, CategoryCount> by_mission;
  std::map<std::string, CategoryCount> by_lat;
  std::map<std::string, CategoryCount> by_lon;
  std::size_t total_frames = 0;
  std::size_t total_trajectories = 0;
};

inline DatasetSummary summarize(const Dataset& d) {
  DatasetSummary s;
  for (int i = 0; i < sim::kNumScenes; ++i) s.by_scene["Scene " + std::to_string(i)];
  for (auto m : {sim::Mission::LeftTurn, sim::Mission::GoStraight, sim::Mission::RightTurn})
    s.by_mission[std::string(sim::to_string(m))];
  for (int i = 0; i < decision::kNumLat; ++i) s.by_lat[std::string(decision::to_string(static_cast<decision::LatCmd>(i)))];
  for (int i = 0; i < decision::kNumLon; ++i) s.by_lon[std::string(decision::to_string(static_cast<decision::LonCmd>(i)))];
  for (const auto& t : d.trajectories) {
    const std::size_t n = t.samples.size();
    auto& sc = s.by_scene["Scene " + std::to_string(t.scene_id)];
    sc.frames += n;
    ++sc.trajectories;
    auto& mc = s.by_mission[std::string(sim::to_string(t.mission))];
    mc.frames += n;
    ++mc.trajectories;
    std::map<std::string, std::size_t> lat, lon;
    for (const auto& smp : t.samples) {
      ++lat[std::string(decision::to_string(smp.cmds.lat))];
      ++lon[std::string(decision::to_string(smp.cmds.lon))];
    }
    for (const auto& [k, c] : lat) {
      s.by_lat[k].frames += c;
      ++s.by_lat[k].trajectories;
    }
    for (const auto& [k, c] : lon) {
      s.by_lon[k].frames += c;
      ++s.by_lon[k].trajectories;
    }
    s.total_frames += n;
    ++s.total_trajectories;
  }
  return s;
}

inline nlohmann::json summary_json(const DatasetSummary& s) {
  auto table = [](const std::map<std::string, CategoryCount>& m) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, c] : m) j[k] = {{"frames", c.frames}, {"trajectories", c.trajectories}};
    return j;
  };
  return {{"by_scene", table(s.by_scene)},
          {"by_mission", table(s.by_mission)},
          {"by_lat", table(s.by_lat)},
          {"by_lon", table(s.by_lon)},
          {"total_frames", s.total_frames},
          {"total_trajectories", s.total_trajectories}};
}

}  // namespace mtcil::expert
