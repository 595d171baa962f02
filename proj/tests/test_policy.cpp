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
#include <filesystem>

#include <gtest/gtest.h>

#include "mtcil/expert/dataset.hpp"
#include "mtcil/policy/check.hpp"
#include "mtcil/policy/train.hpp"

using namespace mtcil;
using namespace mtcil::policy;
using decision::LatCmd;
using decision::LonCmd;

namespace {

PredictedVars fixed_predictions(nn::Tape& t, const std::vector<double>& steer, const std::vector<double>& accel) {
  const int n = static_cast<int>(steer.size());
  return {t.constant(nn::Tensor({n, 1}, steer)), t.constant(nn::Tensor({n, 1}, accel)), std::nullopt};
}

Targets zero_targets(int n) { return {nn::Tensor({n, 1}), nn::Tensor({n, 1}), nn::Tensor({n, 1})}; }

double scalar(nn::Tape& t, nn::Var v) { return t.value(v)[0]; }

ModelConfig config(ControlMode c, LossMode l) {
  ModelConfig cfg;
  cfg.control_mode = c;
  cfg.loss_mode = l;
  return cfg;
}

const expert::Dataset& small_dataset() {
  static const expert::Dataset d = [] {
    expert::CollectOptions opt;
    opt.scenes = {0};
    opt.episodes_per_route = 3;
    opt.seed = 5;
    opt.record_stride = 4;
    return expert::collect(opt);
  }();
  return d;
}

}  // namespace

TEST(Loss, UlossExample) {
  nn::ParamStore ps;
  ps.add("s_lat", nn::Tensor({1}));
  ps.add("s_lon", nn::Tensor({1}));
  nn::Tape t(&ps);
  const auto p = fixed_predictions(t, {0.2}, {0.1});
  EXPECT_NEAR(scalar(t, uloss(t, p, zero_targets(1))), 0.025, 1e-15);
}

TEST(Loss, HlossExample) {
  nn::Tape t;
  const auto p = fixed_predictions(t, {0.2, -0.2}, {0.1, 0.3});
  // 0.3 * 0.04 + 0.7 * (0.01 + 0.09) / 2
  EXPECT_NEAR(scalar(t, hloss(t, p, zero_targets(2), 0.3, 0.7)), 0.047, 1e-15);
  EXPECT_THROW(hloss(t, p, zero_targets(2), -0.1, 0.5), Error);
}

TEST(Loss, UlossEqualsHalfHlossAtZeroLogVariance) {
  Rng rng(9);
  for (int k = 0; k < 1000; ++k) {
    nn::ParamStore ps;
    ps.add("s_lat", nn::Tensor({1}));
    ps.add("s_lon", nn::Tensor({1}));
    nn::Tape t(&ps);
    const int n = uniform_int(rng, 1, 6);
    std::vector<double> a(n), b(n);
    for (int i = 0; i < n; ++i) a[i] = uniform(rng, -2, 2), b[i] = uniform(rng, -2, 2);
    const auto p = fixed_predictions(t, a, b);
    Targets y = zero_targets(n);
    for (int i = 0; i < n; ++i) y.steer[i] = uniform(rng, -1, 1), y.accel[i] = uniform(rng, -1, 1);
    ASSERT_NEAR(scalar(t, uloss(t, p, y)), scalar(t, hloss(t, p, y, 0.5, 0.5)), 1e-12);
  }
}

TEST(Loss, LogVarianceGradientVanishesAtFixedPoint) {
  // dL/ds = 1/2 - 1/2 e^{-s} mse, zero at s = log(mse).
  const double mse_lat = (0.3 * 0.3 + 0.5 * 0.5) / 2, mse_lon = 0.2 * 0.2;
  nn::ParamStore ps;
  ps.add("s_lat", nn::Tensor({1}, {std::log(mse_lat)}));
  ps.add("s_lon", nn::Tensor({1}, {std::log(mse_lon)}));
  nn::Tape t(&ps);
  const auto p = fixed_predictions(t, {0.3, -0.5}, {0.2, -0.2});
  const nn::Grads g = t.backward(uloss(t, p, zero_targets(2)));
  EXPECT_NEAR(g.at("s_lat")[0], 0.0, 1e-14);
  EXPECT_NEAR(g.at("s_lon")[0], 0.0, 1e-14);
}

TEST(Loss, AdamFindsLogVarianceFixedPoint) {
  const double mse = 0.04;
  nn::ParamStore ps;
  ps.add("s_lat", nn::Tensor({1}));
  ps.add("s_lon", nn::Tensor({1}));
  for (int i = 0; i < 4000; ++i) {
    nn::Tape t(&ps);
    const auto p = fixed_predictions(t, {0.2}, {0.2});
    nn::Grads g = t.backward(uloss(t, p, zero_targets(1)));
    nn::adam_step(ps, g, 1e-2);
  }
  EXPECT_NEAR(ps.get("s_lat")[0], std::log(mse), 0.01 * std::abs(std::log(mse)));
  EXPECT_NEAR(ps.get("s_lon")[0], std::log(mse), 0.01 * std::abs(std::log(mse)));
}

TEST(Loss, SpeedTermIsL1) {
  nn::Tape t;
  PredictedVars p = fixed_predictions(t, {0.0, 0.0}, {0.0, 0.0});
  p.speed = t.constant(nn::Tensor({2, 1}, {3.0, 1.0}));
  Targets y = zero_targets(2);
  y.speed = nn::Tensor({2, 1}, {2.0, 4.0});
  EXPECT_NEAR(scalar(t, hloss(t, p, y, 0.5, 0.5)), kSpeedLossWeight * 2.0, 1e-15);
}

TEST(Loss, UncertaintyNeedsMultiTask) {
  ModelConfig cfg = config(ControlMode::SingleBranch, LossMode::Uncertainty);
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(Model, OutputShapes) {
  for (auto enc : {EncoderKind::Small, EncoderKind::Deep}) {
    for (auto cm : {ControlMode::MultiTask, ControlMode::SingleBranch}) {
      ModelConfig cfg = config(cm, cm == ControlMode::MultiTask ? LossMode::Uncertainty : LossMode::Hard);
      cfg.encoder = enc;
      cfg.speed_branch = true;
      const nn::ParamStore ps = init_params(cfg, 1);
      const Probe probe = make_probe(2);
      nn::Tape t(&ps);
      Rng rng(0);
      const PredictedVars v = policy_forward(t, probe.batch, cfg, Mode::Eval, rng);
      EXPECT_EQ(t.value(v.steer).shape, (nn::Shape{4, 1}));
      EXPECT_EQ(t.value(v.accel).shape, (nn::Shape{4, 1}));
      ASSERT_TRUE(v.speed.has_value());
      EXPECT_EQ(t.value(*v.speed).shape, (nn::Shape{4, 1}));
    }
  }
}

TEST(Model, ParameterLayout) {
  const auto mt = init_params(config(ControlMode::MultiTask, LossMode::Uncertainty), 0);
  for (int k = 0; k < 4; ++k) EXPECT_TRUE(mt.contains("lat" + std::to_string(k) + ".out.w"));
  for (int k = 0; k < 3; ++k) EXPECT_TRUE(mt.contains("lon" + std::to_string(k) + ".out.w"));
  EXPECT_TRUE(mt.contains("s_lat"));
  EXPECT_EQ(mt.get("s_lat")[0], 0.0);
  const auto cil = init_params(config(ControlMode::SingleBranch, LossMode::Hard), 0);
  EXPECT_TRUE(cil.contains("branch3.out.w"));
  EXPECT_FALSE(cil.contains("lat0.out.w"));
  EXPECT_FALSE(cil.contains("s_lat"));
}

TEST(Model, EvalIsDeterministic) {
  const ModelConfig cfg = config(ControlMode::MultiTask, LossMode::Uncertainty);
  const Policy pol(cfg, init_params(cfg, 4));
  const Probe probe = make_probe(8);
  const auto a = pol.predict(probe.obs[0], probe.batch.cmds[0]);
  const auto b = pol.predict(probe.obs[0], probe.batch.cmds[0]);
  EXPECT_EQ(a.steer, b.steer);
  EXPECT_EQ(a.accel, b.accel);
  EXPECT_FALSE(init_params(cfg, 4).same_values(init_params(cfg, 5)));
  EXPECT_TRUE(init_params(cfg, 4).same_values(init_params(cfg, 4)));
}

TEST(Model, BranchIsolation) {
  // A batch of only (TurnLeft, Maintain) must leave every other branch with a
  // zero gradient, and the selected ones with a non-zero one.
  const ModelConfig cfg = config(ControlMode::MultiTask, LossMode::Uncertainty);
  const nn::ParamStore ps = init_params(cfg, 3);
  Probe probe = make_probe(1);
  for (auto& c : probe.batch.cmds) c = {LatCmd::TurnLeft, LonCmd::Maintain};
  nn::Tape t(&ps);
  Rng rng(0);
  const nn::Grads g = t.backward(model_loss(t, policy_forward(t, probe.batch, cfg, Mode::Train, rng), probe.targets, cfg));
  auto norm = [&](const std::string& prefix) {
    double s = 0.0;
    for (const auto& [name, gr] : g)
      if (name.rfind(prefix, 0) == 0)
        for (double v : gr.data) s += std::abs(v);
    return s;
  };
  EXPECT_GT(norm("lat2."), 0.0);
  EXPECT_GT(norm("lon1."), 0.0);
  EXPECT_GT(norm("enc."), 0.0);
  for (const char* p : {"lat0.", "lat1.", "lat3.", "lon0.", "lon2."}) EXPECT_EQ(norm(p), 0.0) << p;
}

TEST(Model, OutputDependsOnlyOnSelectedBranch) {
  const ModelConfig cfg = config(ControlMode::MultiTask, LossMode::Uncertainty);
  nn::ParamStore ps = init_params(cfg, 3);
  const Probe probe = make_probe(1);
  const decision::CommandPair c{LatCmd::GoStraight, LonCmd::Accelerate};
  const auto before = Policy(cfg, ps).predict(probe.obs[0], c);
  for (double& v : ps.get("lat0.out.w").data) v += 1.0;
  for (double& v : ps.get("lon1.out.b").data) v += 1.0;
  const auto after = Policy(cfg, ps).predict(probe.obs[0], c);
  EXPECT_EQ(before.steer, after.steer);
  EXPECT_EQ(before.accel, after.accel);
}

TEST(Model, ActClipsToUnitRange) {
  EXPECT_EQ(Policy::act_from({1.7, -3.0, std::nullopt}).steer, 1.0);
  EXPECT_EQ(Policy::act_from({1.7, -3.0, std::nullopt}).accel, -1.0);
  EXPECT_EQ(Policy::act_from({0.25, 0.5, std::nullopt}).steer, 0.25);
  EXPECT_THROW(Policy::act_from({std::nan(""), 0.0, std::nullopt}), Error);
}

TEST(Model, SmallGradCheck) {
  ModelConfig cfg = config(ControlMode::MultiTask, LossMode::Uncertainty);
  cfg.speed_branch = true;
  nn::GradCheckOptions opt = model_check_options();
  opt.max_coords_per_tensor = 6;
  EXPECT_LT(model_grad_check(cfg, 1, opt).max_rel_error, 1e-5);
}

TEST(Config, TomlRoundTrip) {
  const ModelConfig c = config_from_toml_string(R"(
name = "cil"
encoder = "Deep"
control_mode = "SingleBranch"
loss_mode = "Hard"
dropout_p = 0.2
batch_size = 40
)");
  EXPECT_EQ(c.name, "cil");
  EXPECT_EQ(c.encoder, EncoderKind::Deep);
  EXPECT_EQ(c.control_mode, ControlMode::SingleBranch);
  EXPECT_EQ(c.batch_size, 40);
  EXPECT_EQ(c.initial_lr, 2e-4);
  EXPECT_EQ(c.tag(), "RN+CIL");
  const ModelConfig back = config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
}

#ifdef MTCIL_CONFIG_DIR
TEST(Config, ShippedRecipesLoad) {
  const std::string dir = MTCIL_CONFIG_DIR;
  const ModelConfig mt = load_config(dir + "/mt_uloss.toml");
  const ModelConfig hl = load_config(dir + "/mt_hloss.toml");
  const ModelConfig cil = load_config(dir + "/cil.toml");
  EXPECT_EQ(mt.tag(), "CN+MT+uLoss");
  EXPECT_EQ(hl.loss_mode, LossMode::Hard);
  EXPECT_EQ(cil.control_mode, ControlMode::SingleBranch);
  EXPECT_FALSE(cil.speed_branch);
  // Identical optimisation settings across the three.
  for (const ModelConfig* c : {&hl, &cil}) {
    EXPECT_EQ(c->initial_lr, mt.initial_lr);
    EXPECT_EQ(c->batch_size, mt.batch_size);
    EXPECT_EQ(c->dropout_p, mt.dropout_p);
    EXPECT_EQ(c->max_epochs, mt.max_epochs);
  }
}
#endif

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(config_from_toml_string("bogus = 1"), Error);
  EXPECT_THROW(config_from_toml_string("batch_size = 0"), Error);
  EXPECT_THROW(config_from_toml_string("dropout_p = 1.0"), Error);
  EXPECT_THROW(config_from_toml_string("encoder = \"Huge\""), Error);
  EXPECT_THROW(config_from_toml_string("batch_size = \"x\""), Error);
  EXPECT_THROW(config_from_toml_string("name = "), Error);
  EXPECT_THROW(load_config("/nonexistent/model.toml"), Error);
}

TEST(Config, Defaults) {
  const ModelConfig c;
  EXPECT_EQ(c.tag(), "CN+MT+uLoss");
  EXPECT_EQ(c.batch_size, 120);
  EXPECT_EQ(c.dropout_p, 0.5);
  EXPECT_EQ(c.initial_lr, 2e-4);
}

TEST(Augment, StaysInUnitRange) {
  Rng rng(1);
  nn::Tensor r({2, 5, 8, 8});
  for (double& v : r.data) v = uniform(rng, 0.0, 1.0);
  const nn::Tensor orig = r;
  augment(r, rng);
  EXPECT_NE(r, orig);
  for (double v : r.data) {
    ASSERT_GE(v, 0.0);
    ASSERT_LE(v, 1.0);
  }
}

TEST(Train, BeatsZeroBaselineAndIsDeterministic) {
  const auto& d = small_dataset();
  ModelConfig cfg;
  cfg.max_epochs = 3;
  cfg.initial_lr = 1e-3;
  cfg.batch_size = 32;
  const TrainResult a = train(d, cfg, 7);
  ASSERT_EQ(a.history.size(), 3u);
  EXPECT_GT(a.train_samples, 0u);
  EXPECT_GT(a.val_samples, 0u);
  const auto val = select_samples(d, expert::DataSplit::Val, 1);
  const double mse = evaluate_loss(a.params, cfg, val).mse;
  EXPECT_LT(mse, a.baseline_val_mse);
  EXPECT_NEAR(a.baseline_val_mse, zero_baseline_mse(val), 1e-12);

  const TrainResult b = train(d, cfg, 7);
  EXPECT_TRUE(a.params.same_values(b.params));
  EXPECT_EQ(history_json(a.history), history_json(b.history));
}

TEST(Train, EmptySplitIsAnError) {
  expert::Dataset d = small_dataset();
  for (auto& t : d.trajectories) t.split = expert::DataSplit::Train;
  EXPECT_THROW(train(d, ModelConfig{}, 1), Error);
}

TEST(Train, SaveLoadRoundTrip) {
  const auto& d = small_dataset();
  ModelConfig cfg = config(ControlMode::SingleBranch, LossMode::Hard);
  cfg.name = "cil";
  cfg.max_epochs = 1;
  const TrainResult r = train(d, cfg, 2);
  const std::string path = (std::filesystem::temp_directory_path() / "mtcil_test_policy.ckpt").string();
  save_policy(path, cfg, r);
  const Policy p = load_policy(path);
  EXPECT_TRUE(p.params().same_values(r.params));
  EXPECT_EQ(p.config().tag(), "CN+CIL");
  const auto& obs = d.trajectories.front().samples.front().obs;
  const auto cmds = d.trajectories.front().samples.front().cmds;
  EXPECT_EQ(p.predict(obs, cmds).steer, Policy(cfg, r.params).predict(obs, cmds).steer);

  // A checkpoint whose parameters do not fit the sidecar config is refused.
  nn::save_checkpoint(path, init_params(config(ControlMode::MultiTask, LossMode::Uncertainty), 0));
  EXPECT_THROW(load_policy(path), Error);
  std::filesystem::remove(path);
  std::filesystem::remove(sidecar_path(path));
}
