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

// Command-line front end. Every subcommand ends with one line
//   RESULT {...}
// so scripts can parse the outcome without scraping the human output.

#include <csignal>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <pthread.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "mtcil/bench/evaluate.hpp"
#include "mtcil/bench/report.hpp"
#include "mtcil/expert/dataset.hpp"
#include "mtcil/policy/check.hpp"
#include "mtcil/policy/train.hpp"
#include "mtcil/service/server.hpp"
#include "mtcil/sim/catalog.hpp"

namespace {

using nlohmann::json;
using namespace mtcil;

void result(const std::string& cmd, json body) {
  body["cmd"] = cmd;
  std::cout << "RESULT " << body.dump() << std::endl;
}

void require_file(const std::string& path) {
  if (!std::filesystem::is_regular_file(path)) fail("no such file: ", path);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct CollectArgs {
  std::vector<int> scenes{0, 1, 3, 4};
  int episodes_per_route = 5;
  double noise_p = 0.1;
  int record_stride = 1;
  std::uint64_t seed = 1;
  std::string out;
};

int run_collect(const CollectArgs& a) {
  expert::CollectOptions opt;
  opt.scenes = a.scenes;
  opt.episodes_per_route = a.episodes_per_route;
  opt.noise_p = a.noise_p;
  opt.record_stride = a.record_stride;
  opt.seed = a.seed;
  expert::CollectStats st;
  const auto t0 = std::chrono::steady_clock::now();
  const expert::Dataset d = expert::collect(opt, &st, [](int scene, int done, int total) {
    if (done == total) std::fprintf(stderr, "scene %d: %d episodes\n", scene, total);
  });
  expert::save_dataset(a.out, d);
  std::size_t ticks = 0, perturbed = 0;
  for (const auto& t : d.trajectories) {
    ticks += t.executed.size();
    perturbed += t.perturbed_ticks.size();
  }
  const auto summary = expert::summarize(d);
  std::cout << expert::summary_json(summary).dump(2) << '\n';
  result("collect", {{"ok", true},
                     {"episodes", st.episodes},
                     {"successes", st.successes},
                     {"kept", st.kept},
                     {"trajectories", d.trajectories.size()},
                     {"frames", d.frames()},
                     {"perturbation_rate", ticks ? static_cast<double>(perturbed) / ticks : 0.0},
                     {"seconds", seconds_since(t0)},
                     {"out", a.out}});
  return 0;
}

struct TrainArgs {
  std::string config, dataset, out;
  std::uint64_t seed = 7;
};

int run_train(const TrainArgs& a) {
  require_file(a.config);
  require_file(a.dataset);
  const policy::ModelConfig cfg = policy::load_config(a.config);
  const expert::Dataset d = expert::load_dataset(a.dataset);
  const auto t0 = std::chrono::steady_clock::now();
  const policy::TrainResult r = policy::train(d, cfg, a.seed, [](const policy::EpochRecord& e) {
    std::fprintf(stderr, "epoch %3d  train %.5f  val %.5f  val_mse %.5f  lr %.1e  s_lat %.3f  s_lon %.3f\n", e.epoch,
                 e.train_loss, e.val_loss, e.val_mse, e.lr, e.s_lat, e.s_lon);
  });
  policy::save_policy(a.out, cfg, r);
  const json side = policy::sidecar_json(cfg, r);
  result("train", {{"ok", true},
                   {"tag", cfg.tag()},
                   {"epochs", r.history.size()},
                   {"best_epoch", r.best_epoch},
                   {"best_val_loss", r.best_val_loss},
                   {"best_val_mse", r.history.at(static_cast<std::size_t>(r.best_epoch - 1)).val_mse},
                   {"baseline_val_mse", r.baseline_val_mse},
                   {"s_lat", side["s_lat"]},
                   {"s_lon", side["s_lon"]},
                   {"seconds", seconds_since(t0)},
                   {"out", a.out}});
  return 0;
}

struct EvaluateArgs {
  std::string checkpoint;
  bool expert = false;
  std::string condition{"TT"};
  int episodes_per_route = 2;
  std::uint64_t seed = 99;
  std::string report;
  std::string tag;
};

int run_evaluate(const EvaluateArgs& a) {
  if (a.expert == !a.checkpoint.empty()) fail("evaluate: give exactly one of --checkpoint or --expert");
  const bench::Condition c = bench::condition_from_string(a.condition);
  bench::Controller ctl;
  if (a.expert) {
    ctl = bench::expert_controller();
  } else {
    require_file(a.checkpoint);
    ctl = bench::policy_controller(std::make_shared<const policy::Policy>(policy::load_policy(a.checkpoint)));
  }
  if (!a.tag.empty()) ctl.tag = a.tag;
  const auto t0 = std::chrono::steady_clock::now();
  const bench::EvaluateResult ev = bench::evaluate(ctl, c, a.episodes_per_route, a.seed);
  std::cout << bench::render_report(ev.report);
  const json rep = bench::report_json(ev.report);
  if (!a.report.empty()) {
    std::ofstream os(a.report);
    if (!os) fail("cannot open '", a.report, "' for writing");
    os << rep.dump(2) << '\n';
  }
  json body = {{"ok", true}, {"seconds", seconds_since(t0)}, {"report", a.report}};
  body["model_tag"] = rep["model_tag"];
  body["condition"] = rep["condition"];
  body["episodes"] = rep["episodes"];
  body["rates"] = rep["rates"];
  result("evaluate", body);
  return 0;
}

int run_report(const std::vector<std::string>& files) {
  std::vector<bench::BenchmarkReport> reps;
  for (const auto& f : files) {
    require_file(f);
    std::ifstream is(f);
    json j;
    try {
      is >> j;
    } catch (const json::exception& e) {
      fail("report '", f, "': ", e.what());
    }
    try {
      reps.push_back(bench::report_from_json(j));
    } catch (const json::exception& e) {
      fail("report '", f, "': ", e.what());
    }
  }
  std::cout << bench::render_report(reps);
  result("report", {{"ok", true}, {"reports", reps.size()}});
  return 0;
}

struct ServeArgs {
  service::ServerOptions opt;
  bool spectate = false;
  double duration = 0.0;  // seconds; 0 runs until SIGINT/SIGTERM
};

int run_serve(ServeArgs a) {
  a.opt.mode = a.spectate ? service::DriveMode::Spectate : service::DriveMode::Human;
  // Block the stop signals before any thread starts so only sigwait sees them.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  service::SessionServer server(a.opt);
  std::fprintf(stderr, "listening on ws://%s:%u\n", a.opt.address.c_str(), server.port());
  std::thread loop([&server] { server.run(); });
  if (a.duration > 0.0) {
    timespec ts{};
    ts.tv_sec = static_cast<time_t>(a.duration);
    ts.tv_nsec = static_cast<long>((a.duration - static_cast<double>(ts.tv_sec)) * 1e9);
    sigtimedwait(&set, nullptr, &ts);
  } else {
    int sig = 0;
    sigwait(&set, &sig);
  }
  server.stop();
  loop.join();
  const service::ServerStats st = server.stats();
  result("serve", {{"ok", true},
                   {"port", server.port()},
                   {"sessions", st.sessions},
                   {"refused", st.refused},
                   {"episodes_started", st.episodes_started},
                   {"episodes_ended", st.episodes_ended},
                   {"episodes_discarded", st.episodes_discarded},
                   {"trajectories_appended", st.trajectories_appended},
                   {"out", a.opt.out_path}});
  return 0;
}

int run_gradcheck(const std::string& config, std::size_t coords) {
  std::vector<policy::ModelConfig> cfgs;
  if (config.empty()) {
    cfgs = policy::full_model_configs();
  } else {
    require_file(config);
    cfgs.push_back(policy::load_config(config));
  }
  nn::GradCheckOptions opt = policy::model_check_options();
  opt.max_coords_per_tensor = coords;
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::size_t total = 0;
  json per = json::array();
  for (const auto& c : cfgs) {
    const auto r = policy::model_grad_check(c, 3, opt);
    std::printf("%-18s max_rel_error %.3e  worst %s[%zu]  coords %zu\n", c.name.c_str(), r.max_rel_error,
                r.worst_param.c_str(), r.worst_index, r.coords_checked);
    worst = std::max(worst, r.max_rel_error);
    total += r.coords_checked;
    per.push_back({{"name", c.name}, {"max_rel_error", r.max_rel_error}, {"worst_param", r.worst_param}});
  }
  const bool pass = worst < 1e-5;
  result("gradcheck", {{"ok", pass},
                       {"max_rel_error", worst},
                       {"coords_checked", total},
                       {"configs", per},
                       {"seconds", seconds_since(t0)}});
  return pass ? 0 : 1;
}

int run_summary(const std::string& dataset) {
  require_file(dataset);
  const expert::Dataset d = expert::load_dataset(dataset);
  const json s = expert::summary_json(expert::summarize(d));
  std::cout << s.dump(2) << '\n';
  result("summary", {{"ok", true}, {"trajectories", d.trajectories.size()}, {"frames", d.frames()}});
  return 0;
}

int run_catalog() {
  std::cout << sim::catalog_json().dump(2) << '\n';
  result("catalog", {{"ok", true}, {"hash", sim::catalog_hash()}, {"version", sim::kCatalogVersion}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mtcil: multi-task conditional imitation learning on a desk-scale driving benchmark"};
  app.require_subcommand(1);

  CollectArgs ca;
  auto* collect = app.add_subcommand("collect", "record scripted-expert demonstrations");
  collect->add_option("--scenes", ca.scenes, "scene ids")->delimiter(',');
  collect->add_option("--episodes-per-route", ca.episodes_per_route)->check(CLI::PositiveNumber);
  collect->add_option("--noise-prob", ca.noise_p, "steering noise probability")->check(CLI::Range(0.0, 1.0));
  collect->add_option("--record-stride", ca.record_stride, "keep every k-th tick as a sample")
      ->check(CLI::PositiveNumber);
  collect->add_option("--seed", ca.seed);
  collect->add_option("--out", ca.out, "output JSONL")->required();

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "train a policy");
  train->add_option("--config", ta.config, "model config TOML")->required();
  train->add_option("--dataset", ta.dataset)->required();
  train->add_option("--out", ta.out, "checkpoint path")->required();
  train->add_option("--seed", ta.seed);

  EvaluateArgs ea;
  auto* evaluate = app.add_subcommand("evaluate", "closed-loop benchmark");
  evaluate->add_option("--checkpoint", ea.checkpoint);
  evaluate->add_flag("--expert", ea.expert, "drive with the scripted expert");
  evaluate->add_option("--condition", ea.condition, "TT, tT or tt");
  evaluate->add_option("--episodes-per-route", ea.episodes_per_route)->check(CLI::PositiveNumber);
  evaluate->add_option("--seed", ea.seed);
  evaluate->add_option("--report", ea.report, "write the JSON report here");
  evaluate->add_option("--tag", ea.tag, "model tag shown in the report");

  std::vector<std::string> report_files;
  auto* report = app.add_subcommand("report", "render JSON reports as a table");
  report->add_option("reports", report_files)->required();

  ServeArgs sa;
  auto* serve = app.add_subcommand("serve", "WebSocket session server for human demonstrations");
  serve->add_option("--address", sa.opt.address);
  serve->add_option("--port", sa.opt.port);
  serve->add_option("--scene", sa.opt.episode.scene);
  serve->add_option("--route", sa.opt.episode.route);
  serve->add_option("--weather", sa.opt.episode.weather);
  serve->add_option("--seed", sa.opt.episode.seed);
  serve->add_option("--out", sa.opt.out_path, "append recorded demos to this JSONL");
  serve->add_option("--noise-prob", sa.opt.noise_p)->check(CLI::Range(0.0, 1.0));
  serve->add_option("--tick-ms", sa.opt.tick_ms)->check(CLI::PositiveNumber);
  serve->add_flag("--spectate", sa.spectate, "the expert drives; control messages are ignored");
  serve->add_option("--duration", sa.duration, "stop after this many seconds");

  std::string gc_config;
  std::size_t gc_coords = policy::model_check_options().max_coords_per_tensor;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of the policy loss");
  gradcheck->add_option("--config", gc_config, "model config TOML (default: full-model configurations)");
  gradcheck->add_option("--coords", gc_coords, "coordinates sampled per large tensor (0 = all)");

  std::string sum_dataset;
  auto* summary = app.add_subcommand("summary", "dataset statistics by scene, mission and command");
  summary->add_option("--dataset", sum_dataset)->required();

  auto* catalog = app.add_subcommand("catalog", "print the scene catalog and its hash");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    const CLI::App* sub = nullptr;
    for (const auto* s : app.get_subcommands()) sub = s;
    std::cerr << (sub ? sub->help() : app.help());
    std::cout << "RESULT " << json{{"cmd", sub ? sub->get_name() : "mtcil"}, {"ok", false}, {"error", e.what()}}.dump()
              << std::endl;
    return 2;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    if (*collect) return run_collect(ca);
    if (*train) return run_train(ta);
    if (*evaluate) return run_evaluate(ea);
    if (*report) return run_report(report_files);
    if (*serve) return run_serve(sa);
    if (*gradcheck) return run_gradcheck(gc_config, gc_coords);
    if (*summary) return run_summary(sum_dataset);
    if (*catalog) return run_catalog();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    result(name, {{"ok", false}, {"error", e.what()}});
    return 1;
  }
  return 1;
}
