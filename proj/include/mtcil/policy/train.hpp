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
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtcil/common.hpp"
#include "mtcil/expert/dataset.hpp"
#include "mtcil/nn/params.hpp"
#include "mtcil/nn/schedule.hpp"
#include "mtcil/policy/config.hpp"
#include "mtcil/policy/loss.hpp"
#include "mtcil/policy/model.hpp"

namespace mtcil::policy {

// Samples of one split, thinned to every frame_stride-th sample of each
// trajectory.
inline std::vector<const expert::Sample*> select_samples(const expert::Dataset& d, expert::DataSplit split,
                                                         int frame_stride) {
  if (frame_stride < 1) fail("frame_stride must be >= 1");
  std::vector<const expert::Sample*> out;
  for (const auto& t : d.trajectories) {
    if (t.split != split) continue;
    for (std::size_t i = 0; i < t.samples.size(); i += static_cast<std::size_t>(frame_stride)) {
      out.push_back(&t.samples[i]);
    }
  }
  return out;
}

inline Targets make_targets(const std::vector<const expert::Sample*>& s) {
  const int n = static_cast<int>(s.size());
  Targets y{nn::Tensor({n, 1}), nn::Tensor({n, 1}), nn::Tensor({n, 1})};
  for (int i = 0; i < n; ++i) {
    const auto& smp = *s[static_cast<std::size_t>(i)];
    y.steer[static_cast<std::size_t>(i)] = smp.action.steer;
    y.accel[static_cast<std::size_t>(i)] = smp.action.accel;
    y.speed[static_cast<std::size_t>(i)] = smp.obs.ego_speed;
  }
  return y;
}

inline Batch batch_of(const std::vector<const expert::Sample*>& s) {
  std::vector<const sim::Observation*> obs;
  std::vector<decision::CommandPair> cmds;
  for (const auto* p : s) {
    obs.push_back(&p->obs);
    cmds.push_back(p->cmds);
  }
  return make_batch(obs, cmds);
}

inline constexpr double kAugNoise = 0.02;
inline constexpr double kAugDropout = 0.05;
inline constexpr double kAugBrightness = 0.1;
inline constexpr double kAugContrast = 0.1;

// Photometric augmentation of a raster batch: contrast scale, brightness
// shift, Gaussian noise and per-cell dropout, clipped back to [0, 1].
inline void augment(nn::Tensor& raster, Rng& rng) {
  const int n = raster.rows();
  const std::size_t per = raster.row_size();
  for (int i = 0; i < n; ++i) {
    const double contrast = 1.0 + uniform(rng, -kAugContrast, kAugContrast);
    const double bias = uniform(rng, -kAugBrightness, kAugBrightness);
    double* p = &raster.data[static_cast<std::size_t>(i) * per];
    for (std::size_t k = 0; k < per; ++k) {
      double v = p[k] * contrast + bias + kAugNoise * normal(rng);
      if (uniform(rng, 0.0, 1.0) < kAugDropout) v = 0.0;
      p[k] = std::clamp(v, 0.0, 1.0);
    }
  }
}

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_mse = 0.0;  // 1/2 mean r_lat^2 + 1/2 mean r_lon^2 on validation
  double lr = 0.0;
  double s_lat = 0.0;
  double s_lon = 0.0;
};

struct TrainResult {
  nn::ParamStore params;  // best-validation snapshot
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_val_loss = 0.0;
  double baseline_val_mse = 0.0;  // predict-zero controller on validation
  std::size_t train_samples = 0;
  std::size_t val_samples = 0;
};

struct Evaluation {
  double loss = 0.0;
  double mse = 0.0;
};

// Eval-mode loss over a sample set, in chunks of `chunk`.
inline Evaluation evaluate_loss(const nn::ParamStore& params, const ModelConfig& cfg,
                                const std::vector<const expert::Sample*>& samples, std::size_t chunk = 120) {
  if (samples.empty()) fail("evaluate_loss: no samples");
  double loss = 0.0, mse = 0.0;
  Rng unused(0);
  for (std::size_t start = 0; start < samples.size(); start += chunk) {
    const std::vector<const expert::Sample*> part(samples.begin() + static_cast<std::ptrdiff_t>(start),
                                                  samples.begin() + static_cast<std::ptrdiff_t>(std::min(samples.size(), start + chunk)));
    nn::Tape t(&params);
    const Batch b = batch_of(part);
    const Targets y = make_targets(part);
    const PredictedVars p = policy_forward(t, b, cfg, Mode::Eval, unused);
    const double w = static_cast<double>(part.size());
    loss += w * t.value(model_loss(t, p, y, cfg))[0];
    mse += w * t.value(hloss(t, {p.steer, p.accel, std::nullopt}, y, 0.5, 0.5))[0];
  }
  const double n = static_cast<double>(samples.size());
  return {loss / n, mse / n};
}

inline double zero_baseline_mse(const std::vector<const expert::Sample*>& samples) {
  if (samples.empty()) fail("zero_baseline_mse: no samples");
  double s = 0.0;
  for (const auto* p : samples) s += 0.5 * p->action.steer * p->action.steer + 0.5 * p->action.accel * p->action.accel;
  return s / static_cast<double>(samples.size());
}

using EpochCallback = std::function<void(const EpochRecord&)>;

// Minibatch Adam on shuffled training samples, plateau lr schedule on the
// validation loss, early stop after max_lr_cuts cuts, best-validation
// checkpoint returned.
inline TrainResult train(const expert::Dataset& data, const ModelConfig& cfg, std::uint64_t seed,
                         const EpochCallback& on_epoch = {}) {
  cfg.validate();
  const auto train_set = select_samples(data, expert::DataSplit::Train, cfg.frame_stride);
  const auto val_set = select_samples(data, expert::DataSplit::Val, cfg.frame_stride);
  if (train_set.empty()) fail("train: dataset has no training samples");
  if (val_set.empty()) fail("train: dataset has no validation samples");

  TrainResult res;
  res.train_samples = train_set.size();
  res.val_samples = val_set.size();
  res.baseline_val_mse = zero_baseline_mse(val_set);
  nn::ParamStore params = init_params(cfg, seed);
  Rng shuffle_rng(derive_seed(seed, 0x5f1e));
  Rng drop_rng(derive_seed(seed, 0xd209));
  Rng aug_rng(derive_seed(seed, 0xa06));
  nn::PlateauSchedule schedule;
  double lr = cfg.initial_lr;
  res.best_val_loss = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle_rng() % i)]);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      std::vector<const expert::Sample*> part;
      for (std::size_t k = start; k < std::min(order.size(), start + bs); ++k) part.push_back(train_set[order[k]]);
      Batch b = batch_of(part);
      if (cfg.augmentation) augment(b.raster, aug_rng);
      const Targets y = make_targets(part);
      nn::Tape t(&params);
      const PredictedVars p = policy_forward(t, b, cfg, Mode::Train, drop_rng);
      const nn::Var loss = model_loss(t, p, y, cfg);
      loss_sum += t.value(loss)[0] * static_cast<double>(part.size());
      const nn::Grads g = t.backward(loss);
      nn::adam_step(params, g, lr);
    }
    const Evaluation ev = evaluate_loss(params, cfg, val_set);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.val_loss = ev.loss;
    rec.val_mse = ev.mse;
    rec.lr = lr;
    if (params.contains("s_lat")) {
      rec.s_lat = params.get("s_lat")[0];
      rec.s_lon = params.get("s_lon")[0];
    }
    res.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (ev.loss < res.best_val_loss) {
      res.best_val_loss = ev.loss;
      res.best_epoch = epoch;
      res.params = params;
    }
    lr = schedule.step(ev.loss, lr);
    if (schedule.cuts() >= cfg.max_lr_cuts && cfg.max_lr_cuts > 0) break;
  }
  return res;
}

inline nlohmann::json history_json(const std::vector<EpochRecord>& h) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& r : h) {
    a.push_back({{"epoch", r.epoch},
                 {"train_loss", r.train_loss},
                 {"val_loss", r.val_loss},
                 {"val_mse", r.val_mse},
                 {"lr", r.lr},
                 {"s_lat", r.s_lat},
                 {"s_lon", r.s_lon}});
  }
  return a;
}

// JSON sidecar written next to a checkpoint.
inline nlohmann::json sidecar_json(const ModelConfig& cfg, const TrainResult& r) {
  const bool u = r.params.contains("s_lat");
  return {{"checkpoint_version", nn::kCheckpointVersion},
          {"config", to_json(cfg)},
          {"tag", cfg.tag()},
          {"s_lat", u ? r.params.get("s_lat")[0] : 0.0},
          {"s_lon", u ? r.params.get("s_lon")[0] : 0.0},
          {"best_epoch", r.best_epoch},
          {"best_val_loss", r.best_val_loss},
          {"baseline_val_mse", r.baseline_val_mse},
          {"train_samples", r.train_samples},
          {"val_samples", r.val_samples},
          {"history", history_json(r.history)}};
}

inline std::string sidecar_path(const std::string& checkpoint) { return checkpoint + ".json"; }

inline void save_policy(const std::string& path, const ModelConfig& cfg, const TrainResult& r) {
  nn::save_checkpoint(path, r.params);
  std::ofstream os(sidecar_path(path));
  if (!os) fail("cannot open '", sidecar_path(path), "' for writing");
  os << sidecar_json(cfg, r).dump(2) << '\n';
}

// Loads a checkpoint plus the config recorded in its sidecar.
inline Policy load_policy(const std::string& path) {
  std::ifstream is(sidecar_path(path));
  if (!is) fail("missing checkpoint sidecar '", sidecar_path(path), "'");
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    fail("sidecar '", sidecar_path(path), "': ", e.what());
  }
  ModelConfig cfg = config_from_json(j.at("config"));
  nn::ParamStore params = nn::load_checkpoint(path);
  const nn::ParamStore expected = init_params(cfg, 0);
  for (const auto& [name, p] : expected) {
    if (!params.contains(name)) fail("checkpoint '", path, "' lacks parameter '", name, "'");
    if (params.get(name).shape != p.value.shape) fail("checkpoint '", path, "': shape mismatch for '", name, "'");
  }
  if (params.size() != expected.size()) fail("checkpoint '", path, "' has parameters the config does not use");
  return Policy(std::move(cfg), std::move(params));
}

}  // namespace mtcil::policy
