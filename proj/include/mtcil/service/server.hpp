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

// WebSocket session server for human demonstrations. One session at a time;
// the episode loop, message ingress and writes all run on a single
// io_context thread, so session state is never touched concurrently.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <json.hpp>

#include "mtcil/bench/metrics.hpp"
#include "mtcil/bench/report.hpp"
#include "mtcil/common.hpp"
#include "mtcil/decision.hpp"
#include "mtcil/expert/dataset.hpp"
#include "mtcil/expert/expert.hpp"
#include "mtcil/sim/scene.hpp"
#include "mtcil/sim/weather.hpp"
#include "mtcil/sim/world.hpp"

namespace mtcil::service {

// ---- wire protocol ----

struct ControlMsg {
  double steer = 0.0;
  double accel = 0.0;
};

struct StartMsg {
  int scene = 0;
  int route = 0;
  std::string weather{"ClearNoon"};
  std::uint64_t seed = 0;
};

using ClientMsg = std::variant<ControlMsg, StartMsg>;

inline double finite_number(const nlohmann::json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_number()) fail("field '", key, "' must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) fail("field '", key, "' must be finite");
  return d;
}

// Parses and validates one client frame. Scene, route and weather of a start
// message are checked against the catalog here, before anything is spawned.
inline ClientMsg parse_client_message(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail("malformed JSON: ", e.what());
  }
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) fail("message needs a string 'type'");
  const std::string type = j["type"].get<std::string>();
  try {
    if (type == "control") return ControlMsg{finite_number(j, "steer"), finite_number(j, "accel")};
    if (type == "start") {
      StartMsg s;
      s.scene = j.at("scene").get<int>();
      s.route = j.at("route").get<int>();
      s.weather = j.value("weather", std::string("ClearNoon"));
      s.seed = j.value("seed", std::uint64_t{0});
      const auto scene = sim::scene_ptr(s.scene);
      (void)scene->route(s.route);
      (void)sim::weather_by_name(s.weather);
      return s;
    }
  } catch (const nlohmann::json::exception& e) {
    fail("bad '", type, "' message: ", e.what());
  }
  fail("unknown message type '", type, "'");
}

inline nlohmann::json state_message(const sim::WorldState& w, const sim::Route& route,
                                    const std::optional<decision::CommandPair>& cmds) {
  nlohmann::json peds = nlohmann::json::array();
  for (const auto& p : w.pedestrians) {
    peds.push_back({{"id", p.id}, {"x", p.pose.position.x}, {"y", p.pose.position.y}, {"disrupted", p.disrupted}});
  }
  nlohmann::json path = nlohmann::json::array();
  for (const auto& wp : route.waypoints) path.push_back({wp.position.x, wp.position.y});
  nlohmann::json c = nullptr;
  if (cmds) c = {{"lat", decision::to_string(cmds->lat)}, {"lon", decision::to_string(cmds->lon)}};
  return {{"type", "state"},
          {"tick", w.tick},
          {"ego",
           {{"x", w.ego.pose.position.x},
            {"y", w.ego.pose.position.y},
            {"heading", w.ego.pose.heading},
            {"speed", w.ego.speed}}},
          {"pedestrians", std::move(peds)},
          {"cmds", std::move(c)},
          {"route", std::move(path)}};
}

inline nlohmann::json episode_end_message(const bench::EpisodeResult& r, bool recorded) {
  return {{"type", "episode_end"},
          {"terminal", sim::to_string(r.terminal)},
          {"steps", r.steps},
          {"recorded", recorded},
          {"metrics", bench::metrics_json(bench::quality({r}))}};
}

inline nlohmann::json error_message(const std::string& what) { return {{"type", "error"}, {"message", what}}; }

inline nlohmann::json busy_message() {
  return {{"type", "busy"}, {"message", "a session is already active"}};
}

// ---- server ----

enum class DriveMode { Human, Spectate };

struct ServerOptions {
  std::string address{"127.0.0.1"};
  unsigned short port = 0;  // 0 picks a free port
  StartMsg episode;         // spawned on connect
  std::string out_path;     // empty: nothing is recorded
  double noise_p = 0.1;
  int tick_ms = 100;
  DriveMode mode = DriveMode::Human;
};

struct ServerStats {
  int sessions = 0;
  int refused = 0;
  int episodes_started = 0;
  int episodes_ended = 0;
  int episodes_discarded = 0;
  int trajectories_appended = 0;
};

class SessionServer {
  using tcp = boost::asio::ip::tcp;
  using Socket = boost::beast::websocket::stream<tcp::socket>;

 public:
  explicit SessionServer(ServerOptions opt)
      : opt_(std::move(opt)), acceptor_(ioc_) {
    if (opt_.tick_ms < 1) fail("tick_ms must be >= 1");
    if (opt_.noise_p < 0.0 || opt_.noise_p > 1.0) fail("noise probability outside [0, 1]");
    (void)parse_client_message(nlohmann::json{{"type", "start"},
                                              {"scene", opt_.episode.scene},
                                              {"route", opt_.episode.route},
                                              {"weather", opt_.episode.weather},
                                              {"seed", opt_.episode.seed}}
                                   .dump());
    const tcp::endpoint ep(boost::asio::ip::make_address(opt_.address), opt_.port);
    boost::system::error_code ec;
    acceptor_.open(ep.protocol(), ec);
    if (!ec) acceptor_.set_option(boost::asio::socket_base::reuse_address(true), ec);
    if (!ec) acceptor_.bind(ep, ec);
    if (!ec) acceptor_.listen(boost::asio::socket_base::max_listen_connections, ec);
    if (ec) fail("cannot listen on ", opt_.address, ":", opt_.port, ": ", ec.message());
    port_ = acceptor_.local_endpoint().port();
  }

  unsigned short port() const { return port_; }

  // Blocks until stop().
  void run() {
    accept_next();
    ioc_.run();
  }

  void stop() {
    boost::asio::post(ioc_, [this] {
      boost::system::error_code ec;
      acceptor_.close(ec);
      if (auto s = active_.lock()) s->shutdown();
    });
  }

  ServerStats stats() const {
    std::lock_guard<std::mutex> lk(stats_mu_);
    return stats_;
  }

 private:
  class Session;

  template <typename F>
  void update_stats(F f) {
    std::lock_guard<std::mutex> lk(stats_mu_);
    f(stats_);
  }

  void accept_next() {
    acceptor_.async_accept([this](boost::system::error_code ec, tcp::socket sock) {
      if (ec) return;  // acceptor closed
      auto ws = std::make_shared<Socket>(std::move(sock));
      ws->async_accept([this, ws](boost::system::error_code aec) {
        if (aec) return;
        if (active_.lock()) {
          refuse(ws);
          return;
        }
        auto s = std::make_shared<Session>(*this, ws);
        active_ = s;
        update_stats([](ServerStats& st) { ++st.sessions; });
        s->start();
      });
      accept_next();
    });
  }

  void refuse(const std::shared_ptr<Socket>& ws) {
    update_stats([](ServerStats& st) { ++st.refused; });
    auto text = std::make_shared<std::string>(busy_message().dump());
    ws->text(true);
    ws->async_write(boost::asio::buffer(*text), [ws, text](boost::system::error_code, std::size_t) {
      ws->async_close(boost::beast::websocket::close_code::try_again_later, [ws](boost::system::error_code) {});
    });
  }

  class Session : public std::enable_shared_from_this<Session> {
   public:
    Session(SessionServer& server, std::shared_ptr<Socket> ws)
        : server_(server), ws_(std::move(ws)), timer_(server.ioc_) {}

    void start() {
      ws_->text(true);
      spawn(server_.opt_.episode);
      read_next();
      next_tick_ = std::chrono::steady_clock::now();
      schedule_tick();
    }

    void shutdown() {
      if (closed_) return;
      close_session();
      ws_->async_close(boost::beast::websocket::close_code::going_away,
                       [self = shared_from_this()](boost::system::error_code) {});
    }

   private:
    void read_next() {
      ws_->async_read(buf_, [self = shared_from_this()](boost::system::error_code ec, std::size_t) {
        if (ec) {
          self->close_session();
          return;
        }
        self->inbox_.push_back(boost::beast::buffers_to_string(self->buf_.data()));
        self->buf_.consume(self->buf_.size());
        self->read_next();
      });
    }

    // Absolute deadlines keep the cadence free of drift.
    void schedule_tick() {
      next_tick_ += std::chrono::milliseconds(server_.opt_.tick_ms);
      timer_.expires_at(next_tick_);
      timer_.async_wait([self = shared_from_this()](boost::system::error_code ec) {
        if (ec || self->closed_) return;
        self->tick();
        self->schedule_tick();
      });
    }

    void tick() {
      std::optional<StartMsg> restart;
      while (!inbox_.empty()) {
        const std::string text = std::move(inbox_.front());
        inbox_.pop_front();
        try {
          const ClientMsg m = parse_client_message(text);
          if (const auto* c = std::get_if<ControlMsg>(&m)) {
            if (server_.opt_.mode == DriveMode::Human) held_ = sim::clip_action({c->steer, c->accel});
          } else {
            restart = std::get<StartMsg>(m);
          }
        } catch (const Error& e) {
          send(error_message(e.what()));
        }
      }
      if (restart) {
        if (rec_) discard();
        spawn(*restart);
        return;
      }
      if (!rec_) return;  // idle between episodes
      sim::Action a = held_;
      if (server_.opt_.mode == DriveMode::Spectate && rec_->commands()) {
        a = expert::expert_action(rec_->world(), rec_->route());
      }
      rec_->step(a);
      if (rec_->done()) {
        end_episode();
      } else {
        send(state_message(rec_->world(), rec_->route(), rec_->commands()));
      }
    }

    void spawn(const StartMsg& s) {
      rec_.emplace(s.scene, s.route, sim::weather_by_name(s.weather), s.seed, server_.opt_.noise_p);
      held_ = {};
      server_.update_stats([](ServerStats& st) { ++st.episodes_started; });
      send(state_message(rec_->world(), rec_->route(), rec_->commands()));
    }

    void end_episode() {
      expert::Trajectory t = rec_->finish();
      bool keep = !server_.opt_.out_path.empty() && expert::passes_quality_gate(t);
      if (keep) {
        try {
          t.split = expert::DataSplit::Train;
          expert::append_trajectories(server_.opt_.out_path, {t});
        } catch (const Error& e) {
          send(error_message(std::string("recording failed: ") + e.what()));
          keep = false;
        }
      }
      send(episode_end_message(rec_->log(), keep));
      server_.update_stats([keep](ServerStats& st) {
        ++st.episodes_ended;
        if (keep) ++st.trajectories_appended;
      });
      rec_.reset();
    }

    void discard() {
      rec_.reset();
      server_.update_stats([](ServerStats& st) { ++st.episodes_discarded; });
    }

    // A dropped client loses its running episode.
    void close_session() {
      if (closed_) return;
      closed_ = true;
      timer_.cancel();
      if (rec_) discard();
      server_.active_.reset();
    }

    void send(const nlohmann::json& msg) {
      if (closed_) return;
      outbox_.push_back(msg.dump());
      if (!writing_) write_next();
    }

    void write_next() {
      writing_ = true;
      ws_->async_write(boost::asio::buffer(outbox_.front()),
                       [self = shared_from_this()](boost::system::error_code ec, std::size_t) {
                         self->outbox_.pop_front();
                         if (ec) {
                           self->outbox_.clear();
                           self->writing_ = false;
                           self->close_session();
                           return;
                         }
                         if (self->outbox_.empty()) {
                           self->writing_ = false;
                         } else {
                           self->write_next();
                         }
                       });
    }

    SessionServer& server_;
    std::shared_ptr<Socket> ws_;
    boost::asio::steady_timer timer_;
    std::chrono::steady_clock::time_point next_tick_;
    boost::beast::flat_buffer buf_;
    std::deque<std::string> inbox_;
    std::deque<std::string> outbox_;
    bool writing_ = false;
    bool closed_ = false;
    std::optional<expert::DemoRecorder> rec_;
    sim::Action held_{};
  };

  ServerOptions opt_;
  boost::asio::io_context ioc_;
  tcp::acceptor acceptor_;
  unsigned short port_ = 0;
  std::weak_ptr<Session> active_;
  mutable std::mutex stats_mu_;
  ServerStats stats_;
};

}  // namespace mtcil::service
