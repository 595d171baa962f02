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
#include <optional>
#include <string>
#include <vector>

#include "mtcil/common.hpp"
#include "mtcil/decision.hpp"
#include "mtcil/nn/ops.hpp"
#include "mtcil/nn/params.hpp"
#include "mtcil/nn/tape.hpp"
#include "mtcil/policy/config.hpp"
#include "mtcil/sim/render.hpp"
#include "mtcil/sim/world.hpp"

namespace mtcil::policy {

inline constexpr int kImageFeature = 128;
inline constexpr int kSpeedFeature = 16;
inline constexpr int kFeature = kImageFeature + kSpeedFeature;
inline constexpr int kHeadWidth = 64;
inline constexpr double kSpeedInputScale = 0.2;  // m/s -> roughly unit range

enum class Mode { Train, Eval };

// A minibatch already converted to network inputs.
struct Batch {
  nn::Tensor raster;  // [N, 5, 48, 48] in [0, 1]
  nn::Tensor speed;   // [N, 1] in m/s
  std::vector<decision::CommandPair> cmds;

  int size() const { return raster.rows(); }
};

inline Batch make_batch(const std::vector<const sim::Observation*>& obs,
                        const std::vector<decision::CommandPair>& cmds) {
  if (obs.size() != cmds.size()) fail("make_batch: ", obs.size(), " observations vs ", cmds.size(), " commands");
  const int n = static_cast<int>(obs.size());
  Batch b;
  b.raster = nn::Tensor({n, sim::kChannels, sim::kGrid, sim::kGrid});
  b.speed = nn::Tensor({n, 1});
  b.cmds = cmds;
  for (int i = 0; i < n; ++i) {
    const auto& r = obs[static_cast<std::size_t>(i)]->raster;
    if (r.size() != static_cast<std::size_t>(sim::kRasterSize)) fail("make_batch: bad raster size");
    double* dst = &b.raster.data[static_cast<std::size_t>(i) * sim::kRasterSize];
    for (int k = 0; k < sim::kRasterSize; ++k) dst[k] = r[static_cast<std::size_t>(k)] / 255.0;
    b.speed[static_cast<std::size_t>(i)] = obs[static_cast<std::size_t>(i)]->ego_speed;
  }
  return b;
}

struct PredictedVars {
  nn::Var steer;  // [N, 1], raw
  nn::Var accel;  // [N, 1], raw
  std::optional<nn::Var> speed;  // [N, 1] when the speed head is on
};

struct PredictedControls {
  double steer = 0.0;
  double accel = 0.0;
  std::optional<double> speed_pred;
};

namespace detail {

inline void add_dense(nn::ParamStore& ps, Rng& rng, const std::string& name, int in, int out, double gain) {
  nn::Tensor w({out, in});
  const double sd = gain / std::sqrt(static_cast<double>(in));
  for (double& v : w.data) v = sd * normal(rng);
  ps.add(name + ".w", std::move(w));
  ps.add(name + ".b", nn::Tensor({out}));
}

inline void add_conv(nn::ParamStore& ps, Rng& rng, const std::string& name, int in, int out) {
  nn::Tensor w({out, in, 3, 3});
  const double sd = std::sqrt(2.0 / (9.0 * in));
  for (double& v : w.data) v = sd * normal(rng);
  ps.add(name + ".w", std::move(w));
  ps.add(name + ".b", nn::Tensor({out}));
}

inline nn::Var dense(nn::Tape& t, nn::Var x, const std::string& name) {
  return nn::linear(t, x, t.param(name + ".w"), t.param(name + ".b"));
}

inline nn::Var conv(nn::Tape& t, nn::Var x, const std::string& name, int stride) {
  return nn::conv3x3(t, x, t.param(name + ".w"), t.param(name + ".b"), stride);
}

// Small encoder layer plan: 5 -> 8 -> 16 -> 16 channels, 48 -> 24 -> 12 -> 6.
inline constexpr int kSmallChannels[4] = {sim::kChannels, 8, 16, 16};
inline constexpr int kDeepWidth = 16;
inline constexpr int kFlat = 16 * 6 * 6;

inline std::string lat_prefix(int k) { return "lat" + std::to_string(k); }
inline std::string lon_prefix(int k) { return "lon" + std::to_string(k); }
inline std::string branch_prefix(int k) { return "branch" + std::to_string(k); }

}  // namespace detail

// Parameter names follow the module layout: enc.*, meas.*, lat{k}.*,
// lon{k}.*, branch{k}.* (single-branch mode), speed.*, s_lat, s_lon.
inline nn::ParamStore init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  nn::ParamStore ps;
  Rng rng(derive_seed(seed, 0x1417));
  const double relu_gain = std::sqrt(2.0);
  if (cfg.encoder == EncoderKind::Small) {
    for (int i = 0; i < 3; ++i) {
      detail::add_conv(ps, rng, "enc.conv" + std::to_string(i + 1), detail::kSmallChannels[i],
                       detail::kSmallChannels[i + 1]);
    }
  } else {
    detail::add_conv(ps, rng, "enc.conv1", sim::kChannels, detail::kDeepWidth);
    for (int i = 2; i <= 6; ++i) {
      detail::add_conv(ps, rng, "enc.conv" + std::to_string(i), detail::kDeepWidth, detail::kDeepWidth);
    }
  }
  detail::add_dense(ps, rng, "enc.fc", detail::kFlat, kImageFeature, relu_gain);
  detail::add_dense(ps, rng, "meas.fc1", 1, kSpeedFeature, relu_gain);
  detail::add_dense(ps, rng, "meas.fc2", kSpeedFeature, kSpeedFeature, relu_gain);
  detail::add_dense(ps, rng, "meas.fc3", kSpeedFeature, kSpeedFeature, relu_gain);
  auto head = [&](const std::string& p, int outputs) {
    detail::add_dense(ps, rng, p + ".fc1", kFeature, kHeadWidth, relu_gain);
    detail::add_dense(ps, rng, p + ".fc2", kHeadWidth, kHeadWidth, relu_gain);
    detail::add_dense(ps, rng, p + ".out", kHeadWidth, outputs, 0.1);
  };
  if (cfg.control_mode == ControlMode::MultiTask) {
    for (int k = 0; k < decision::kNumLat; ++k) head(detail::lat_prefix(k), 1);
    for (int k = 0; k < decision::kNumLon; ++k) head(detail::lon_prefix(k), 1);
  } else {
    for (int k = 0; k < decision::kNumLat; ++k) head(detail::branch_prefix(k), 2);
  }
  if (cfg.speed_branch) {
    detail::add_dense(ps, rng, "speed.fc1", kImageFeature, kHeadWidth, relu_gain);
    detail::add_dense(ps, rng, "speed.out", kHeadWidth, 1, 0.1);
  }
  if (cfg.loss_mode == LossMode::Uncertainty) {
    ps.add("s_lat", nn::Tensor({1}));
    ps.add("s_lon", nn::Tensor({1}));
  }
  return ps;
}

struct Features {
  nn::Var image;     // [N, 128]
  nn::Var combined;  // [N, 144]
};

// Shared perception + measurement encoders.
inline Features encode(nn::Tape& t, const Batch& batch, const ModelConfig& cfg, Mode mode, Rng& rng) {
  const bool train = mode == Mode::Train;
  nn::Var x = t.constant(batch.raster);
  if (cfg.encoder == EncoderKind::Small) {
    for (int i = 1; i <= 3; ++i) x = nn::relu(t, detail::conv(t, x, "enc.conv" + std::to_string(i), 2));
  } else {
    // Three stages, each a strided conv followed by a residual conv.
    x = nn::relu(t, detail::conv(t, x, "enc.conv1", 2));
    x = nn::add(t, x, nn::relu(t, detail::conv(t, x, "enc.conv2", 1)));
    x = nn::relu(t, detail::conv(t, x, "enc.conv3", 2));
    x = nn::add(t, x, nn::relu(t, detail::conv(t, x, "enc.conv4", 1)));
    x = nn::relu(t, detail::conv(t, x, "enc.conv5", 2));
    x = nn::add(t, x, nn::relu(t, detail::conv(t, x, "enc.conv6", 1)));
  }
  nn::Var img = nn::relu(t, detail::dense(t, nn::flatten(t, x), "enc.fc"));
  img = nn::dropout(t, img, cfg.dropout_p, train, rng);

  nn::Tensor sp = batch.speed;
  for (double& v : sp.data) v *= kSpeedInputScale;
  nn::Var m = t.constant(std::move(sp));
  for (const char* layer : {"meas.fc1", "meas.fc2", "meas.fc3"}) m = nn::relu(t, detail::dense(t, m, layer));
  return {img, nn::concat(t, {img, m})};
}

namespace detail {

inline nn::Var head_mlp(nn::Tape& t, nn::Var x, const std::string& p, double dropout_p, bool train, Rng& rng) {
  x = nn::dropout(t, nn::relu(t, dense(t, x, p + ".fc1")), dropout_p, train, rng);
  x = nn::relu(t, dense(t, x, p + ".fc2"));
  return dense(t, x, p + ".out");
}

// Routes each row through the branch selected by its command and reassembles
// the outputs in batch order. Branches with no rows are never touched.
inline nn::Var routed(nn::Tape& t, nn::Var feat, const std::vector<int>& which, int branches,
                      std::string (*prefix)(int),
                      double dropout_p, bool train, Rng& rng) {
  const int n = static_cast<int>(which.size());
  std::optional<nn::Var> out;
  for (int k = 0; k < branches; ++k) {
    std::vector<int> idx;
    for (int i = 0; i < n; ++i)
      if (which[static_cast<std::size_t>(i)] == k) idx.push_back(i);
    if (idx.empty()) continue;
    nn::Var y = head_mlp(t, nn::gather_rows(t, feat, idx), prefix(k), dropout_p, train, rng);
    y = nn::scatter_rows(t, y, idx, n);
    out = out ? nn::add(t, *out, y) : y;
  }
  return *out;
}

}  // namespace detail

inline PredictedVars policy_forward(nn::Tape& t, const Batch& batch, const ModelConfig& cfg, Mode mode, Rng& rng) {
  if (batch.size() < 1) fail("policy_forward: empty batch");
  if (static_cast<int>(batch.cmds.size()) != batch.size()) fail("policy_forward: command count mismatch");
  std::vector<int> lat, lon;
  for (const auto& c : batch.cmds) {
    lat.push_back(static_cast<int>(decision::lat_from_index(static_cast<int>(c.lat))));
    lon.push_back(static_cast<int>(decision::lon_from_index(static_cast<int>(c.lon))));
  }
  const bool train = mode == Mode::Train;
  const Features f = encode(t, batch, cfg, mode, rng);
  PredictedVars out;
  if (cfg.control_mode == ControlMode::MultiTask) {
    out.steer = detail::routed(t, f.combined, lat, decision::kNumLat, detail::lat_prefix, cfg.dropout_p,
                               train, rng);
    out.accel = detail::routed(t, f.combined, lon, decision::kNumLon, detail::lon_prefix, cfg.dropout_p,
                               train, rng);
  } else {
    const nn::Var both = detail::routed(t, f.combined, lat, decision::kNumLat, detail::branch_prefix,
                                        cfg.dropout_p, train, rng);
    out.steer = nn::column(t, both, 0);
    out.accel = nn::column(t, both, 1);
  }
  if (cfg.speed_branch) {
    nn::Var s = nn::relu(t, detail::dense(t, f.image, "speed.fc1"));
    out.speed = detail::dense(t, s, "speed.out");
  }
  return out;
}

// Inference wrapper bundling a config with its parameters.
class Policy {
 public:
  Policy(ModelConfig cfg, nn::ParamStore params) : cfg_(std::move(cfg)), params_(std::move(params)) {
    cfg_.validate();
  }

  const ModelConfig& config() const { return cfg_; }
  const nn::ParamStore& params() const { return params_; }
  nn::ParamStore& params() { return params_; }

  PredictedControls predict(const sim::Observation& obs, decision::CommandPair cmds) const {
    const Batch b = make_batch({&obs}, {cmds});
    nn::Tape t(&params_);
    Rng unused(0);
    const PredictedVars v = policy_forward(t, b, cfg_, Mode::Eval, unused);
    PredictedControls p{t.value(v.steer)[0], t.value(v.accel)[0], std::nullopt};
    if (v.speed) p.speed_pred = t.value(*v.speed)[0];
    return p;
  }

  // Actuation clips the raw outputs into the valid command range.
  sim::Action act(const sim::Observation& obs, decision::CommandPair cmds) const {
    const PredictedControls p = predict(obs, cmds);
    return act_from(p);
  }

  static sim::Action act_from(const PredictedControls& p) {
    if (!std::isfinite(p.steer) || !std::isfinite(p.accel)) fail("policy produced a non-finite action");
    return {clip_unit(p.steer), clip_unit(p.accel)};
  }

 private:
  ModelConfig cfg_;
  nn::ParamStore params_;
};

}  // namespace mtcil::policy
