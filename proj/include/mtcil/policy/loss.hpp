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

#include "mtcil/common.hpp"
#include "mtcil/nn/ops.hpp"
#include "mtcil/nn/tape.hpp"
#include "mtcil/policy/config.hpp"
#include "mtcil/policy/model.hpp"

namespace mtcil::policy {

inline constexpr double kSpeedLossWeight = 0.05;

// Batch targets as [N, 1] tensors.
struct Targets {
  nn::Tensor steer;
  nn::Tensor accel;
  nn::Tensor speed;
};

namespace detail {

inline nn::Var mean_sq(nn::Tape& t, nn::Var pred, const nn::Tensor& target) {
  return nn::mean(t, nn::square(t, nn::sub(t, pred, t.constant(target))));
}

inline nn::Var with_speed_term(nn::Tape& t, nn::Var loss, const PredictedVars& pred, const Targets& y) {
  if (!pred.speed) return loss;
  const nn::Var l1 = nn::mean(t, nn::abs(t, nn::sub(t, *pred.speed, t.constant(y.speed))));
  return nn::add(t, loss, nn::scale(t, l1, kSpeedLossWeight));
}

}  // namespace detail

// Uncertainty-weighted loss with s = log sigma^2:
//   1/2 e^{-s_lat} mean r_lat^2 + 1/2 e^{-s_lon} mean r_lon^2 + 1/2 (s_lat + s_lon)
inline nn::Var uloss(nn::Tape& t, const PredictedVars& pred, const Targets& y, nn::Var s_lat, nn::Var s_lon) {
  const nn::Var lat = detail::mean_sq(t, pred.steer, y.steer);
  const nn::Var lon = detail::mean_sq(t, pred.accel, y.accel);
  const nn::Var wl = nn::exp(t, nn::scale(t, s_lat, -1.0));
  const nn::Var wo = nn::exp(t, nn::scale(t, s_lon, -1.0));
  nn::Var loss = nn::add(t, nn::scale(t, nn::mul(t, wl, lat), 0.5), nn::scale(t, nn::mul(t, wo, lon), 0.5));
  loss = nn::add(t, loss, nn::scale(t, nn::add(t, s_lat, s_lon), 0.5));
  return detail::with_speed_term(t, loss, pred, y);
}

inline nn::Var uloss(nn::Tape& t, const PredictedVars& pred, const Targets& y) {
  return uloss(t, pred, y, t.param("s_lat"), t.param("s_lon"));
}

// Hand-weighted baseline: w_lat mean r_lat^2 + w_lon mean r_lon^2.
inline nn::Var hloss(nn::Tape& t, const PredictedVars& pred, const Targets& y, double w_lat, double w_lon) {
  if (w_lat < 0.0 || w_lon < 0.0) fail("hloss: weights must be >= 0");
  const nn::Var lat = detail::mean_sq(t, pred.steer, y.steer);
  const nn::Var lon = detail::mean_sq(t, pred.accel, y.accel);
  const nn::Var loss = nn::add(t, nn::scale(t, lat, w_lat), nn::scale(t, lon, w_lon));
  return detail::with_speed_term(t, loss, pred, y);
}

inline nn::Var model_loss(nn::Tape& t, const PredictedVars& pred, const Targets& y, const ModelConfig& cfg) {
  if (cfg.loss_mode == LossMode::Uncertainty) {
    if (cfg.control_mode != ControlMode::MultiTask) fail("uloss requires MultiTask mode");
    return uloss(t, pred, y);
  }
  return hloss(t, pred, y, cfg.w_lat, cfg.w_lon);
}

}  // namespace mtcil::policy
