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

// Finite-difference check of the whole policy loss, used by the CLI and the
// acceptance run.

#include <cstdint>
#include <vector>

#include "mtcil/common.hpp"
#include "mtcil/decision.hpp"
#include "mtcil/nn/gradcheck.hpp"
#include "mtcil/policy/config.hpp"
#include "mtcil/policy/loss.hpp"
#include "mtcil/policy/model.hpp"
#include "mtcil/sim/render.hpp"

namespace mtcil::policy {

struct Probe {
  std::vector<sim::Observation> obs;
  Batch batch;
  Targets targets;
};

// Four random samples whose command pairs touch every lateral and every
// longitudinal branch.
inline Probe make_probe(std::uint64_t seed) {
  using decision::LatCmd;
  using decision::LonCmd;
  const std::vector<decision::CommandPair> cmds{{LatCmd::FollowLane, LonCmd::Decelerate},
                                                {LatCmd::GoStraight, LonCmd::Maintain},
                                                {LatCmd::TurnLeft, LonCmd::Accelerate},
                                                {LatCmd::TurnRight, LonCmd::Decelerate}};
  Rng rng(derive_seed(seed, 0x9b0));
  Probe p;
  p.obs.resize(cmds.size());
  for (auto& o : p.obs) {
    for (auto& v : o.raster) v = static_cast<std::uint8_t>(rng() & 0xff);
    o.ego_speed = uniform(rng, 0.0, 8.0);
  }
  std::vector<const sim::Observation*> ptrs;
  for (const auto& o : p.obs) ptrs.push_back(&o);
  p.batch = make_batch(ptrs, cmds);
  const int n = static_cast<int>(cmds.size());
  p.targets = {nn::Tensor({n, 1}), nn::Tensor({n, 1}), nn::Tensor({n, 1})};
  for (std::size_t i = 0; i < cmds.size(); ++i) {
    p.targets.steer[i] = uniform(rng, -1.0, 1.0);
    p.targets.accel[i] = uniform(rng, -1.0, 1.0);
    p.targets.speed[i] = p.obs[i].ego_speed;
  }
  return p;
}

// Training-mode loss with dropout masks frozen by reseeding on every call.
inline nn::Objective model_objective(const ModelConfig& cfg, const Probe& probe, std::uint64_t seed) {
  return [cfg, &probe, seed](nn::Tape& t) {
    Rng rng(derive_seed(seed, 0xd0));
    const PredictedVars p = policy_forward(t, probe.batch, cfg, Mode::Train, rng);
    return model_loss(t, p, probe.targets, cfg);
  };
}

// With random rasters many ReLU inputs sit within 1e-4 of a kink, so the
// whole-model check uses a finer step. Large tensors are sampled.
inline nn::GradCheckOptions model_check_options() {
  nn::GradCheckOptions o;
  o.h = 1e-6;
  o.max_coords_per_tensor = 64;
  return o;
}

// Non-zero starting values for s_lat and s_lon so their gradients are not
// trivially symmetric.
inline nn::GradCheckResult model_grad_check(const ModelConfig& cfg, std::uint64_t seed,
                                            const nn::GradCheckOptions& opt = model_check_options()) {
  cfg.validate();
  nn::ParamStore params = init_params(cfg, seed);
  if (params.contains("s_lat")) {
    params.lookup("s_lat").value[0] = 0.3;
    params.lookup("s_lon").value[0] = -0.2;
  }
  const Probe probe = make_probe(seed);
  return nn::grad_check(model_objective(cfg, probe, seed), params, opt);
}

// Configurations that together cover both encoders, all seven branches, the
// speed head and both uncertainty parameters.
inline std::vector<ModelConfig> full_model_configs() {
  std::vector<ModelConfig> out;
  for (EncoderKind e : {EncoderKind::Small, EncoderKind::Deep}) {
    ModelConfig c;
    c.name = e == EncoderKind::Small ? "gradcheck_small" : "gradcheck_deep";
    c.encoder = e;
    c.control_mode = ControlMode::MultiTask;
    c.loss_mode = LossMode::Uncertainty;
    c.speed_branch = true;
    out.push_back(c);
  }
  return out;
}

}  // namespace mtcil::policy
