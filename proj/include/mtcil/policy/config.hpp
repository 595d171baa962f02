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

#include <set>
#include <string>
#include <string_view>

#include <json.hpp>
#include <toml.hpp>

#include "mtcil/common.hpp"

namespace mtcil::policy {

enum class EncoderKind { Small, Deep };
enum class ControlMode { SingleBranch, MultiTask };
enum class LossMode { Hard, Uncertainty };

inline std::string_view to_string(EncoderKind e) { return e == EncoderKind::Small ? "Small" : "Deep"; }
inline std::string_view to_string(ControlMode c) {
  return c == ControlMode::SingleBranch ? "SingleBranch" : "MultiTask";
}
inline std::string_view to_string(LossMode l) { return l == LossMode::Hard ? "Hard" : "Uncertainty"; }

inline EncoderKind encoder_from_string(std::string_view s) {
  if (s == "Small") return EncoderKind::Small;
  if (s == "Deep") return EncoderKind::Deep;
  fail("unknown encoder '", s, "' (expected Small or Deep)");
}
inline ControlMode control_from_string(std::string_view s) {
  if (s == "SingleBranch") return ControlMode::SingleBranch;
  if (s == "MultiTask") return ControlMode::MultiTask;
  fail("unknown control_mode '", s, "' (expected SingleBranch or MultiTask)");
}
inline LossMode loss_from_string(std::string_view s) {
  if (s == "Hard") return LossMode::Hard;
  if (s == "Uncertainty") return LossMode::Uncertainty;
  fail("unknown loss_mode '", s, "' (expected Hard or Uncertainty)");
}

struct ModelConfig {
  std::string name = "mt_uloss";
  EncoderKind encoder = EncoderKind::Small;
  ControlMode control_mode = ControlMode::MultiTask;
  LossMode loss_mode = LossMode::Uncertainty;
  double w_lat = 0.5;  // Hard loss weights
  double w_lon = 0.5;
  bool speed_branch = false;
  bool augmentation = false;
  double dropout_p = 0.5;
  int batch_size = 120;
  double initial_lr = 2e-4;
  // Budget knobs: training stops after max_epochs or two lr cuts, and uses
  // every frame_stride-th sample of each trajectory.
  int max_epochs = 100;
  int max_lr_cuts = 2;
  int frame_stride = 1;

  void validate() const {
    if (name.empty()) fail("model config: name must be non-empty");
    if (loss_mode == LossMode::Uncertainty && control_mode != ControlMode::MultiTask) {
      fail("model config: Uncertainty loss requires MultiTask control mode");
    }
    if (w_lat < 0.0 || w_lon < 0.0) fail("model config: loss weights must be >= 0");
    if (!(dropout_p >= 0.0 && dropout_p < 1.0)) fail("model config: dropout_p must be in [0, 1)");
    if (batch_size < 1) fail("model config: batch_size must be >= 1");
    if (!(initial_lr > 0.0)) fail("model config: initial_lr must be > 0");
    if (max_epochs < 1) fail("model config: max_epochs must be >= 1");
    if (max_lr_cuts < 0) fail("model config: max_lr_cuts must be >= 0");
    if (frame_stride < 1) fail("model config: frame_stride must be >= 1");
  }

  // Short label used in reports, e.g. "CN+MT+uLoss".
  std::string tag() const {
    std::string t = encoder == EncoderKind::Small ? "CN" : "RN";
    t += control_mode == ControlMode::MultiTask ? "+MT" : "+CIL";
    if (control_mode == ControlMode::MultiTask) t += loss_mode == LossMode::Uncertainty ? "+uLoss" : "+hLoss";
    if (speed_branch) t += "+S";
    if (augmentation) t += "+Aug";
    return t;
  }
};

inline nlohmann::json to_json(const ModelConfig& c) {
  return {{"name", c.name},
          {"encoder", to_string(c.encoder)},
          {"control_mode", to_string(c.control_mode)},
          {"loss_mode", to_string(c.loss_mode)},
          {"w_lat", c.w_lat},
          {"w_lon", c.w_lon},
          {"speed_branch", c.speed_branch},
          {"augmentation", c.augmentation},
          {"dropout_p", c.dropout_p},
          {"batch_size", c.batch_size},
          {"initial_lr", c.initial_lr},
          {"max_epochs", c.max_epochs},
          {"max_lr_cuts", c.max_lr_cuts},
          {"frame_stride", c.frame_stride}};
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.name = j.at("name").get<std::string>();
  c.encoder = encoder_from_string(j.at("encoder").get<std::string>());
  c.control_mode = control_from_string(j.at("control_mode").get<std::string>());
  c.loss_mode = loss_from_string(j.at("loss_mode").get<std::string>());
  c.w_lat = j.at("w_lat").get<double>();
  c.w_lon = j.at("w_lon").get<double>();
  c.speed_branch = j.at("speed_branch").get<bool>();
  c.augmentation = j.at("augmentation").get<bool>();
  c.dropout_p = j.at("dropout_p").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.initial_lr = j.at("initial_lr").get<double>();
  c.max_epochs = j.at("max_epochs").get<int>();
  c.max_lr_cuts = j.at("max_lr_cuts").get<int>();
  c.frame_stride = j.at("frame_stride").get<int>();
  c.validate();
  return c;
}

// TOML keys mirror the struct fields; omitted keys keep their defaults and
// unknown keys are rejected so typos do not silently train the wrong model.
inline ModelConfig config_from_toml(const toml::table& tbl) {
  static const std::set<std::string> known{
      "name",       "encoder",      "control_mode", "loss_mode",  "w_lat",     "w_lon",       "speed_branch",
      "augmentation", "dropout_p", "batch_size",   "initial_lr", "max_epochs", "max_lr_cuts", "frame_stride"};
  for (const auto& [k, _] : tbl) {
    if (!known.count(std::string(k.str()))) fail("model config: unknown key '", k.str(), "'");
  }
  auto str = [&](const char* key, std::string dflt) -> std::string {
    const auto* n = tbl.get(key);
    if (!n) return dflt;
    if (!n->is_string()) fail("model config: '", key, "' must be a string");
    return n->value<std::string>().value();
  };
  auto num = [&](const char* key, double dflt) -> double {
    const auto* n = tbl.get(key);
    if (!n) return dflt;
    if (!n->is_number()) fail("model config: '", key, "' must be a number");
    return n->value<double>().value();
  };
  auto integer = [&](const char* key, int dflt) -> int {
    const auto* n = tbl.get(key);
    if (!n) return dflt;
    if (!n->is_integer()) fail("model config: '", key, "' must be an integer");
    return static_cast<int>(n->value<std::int64_t>().value());
  };
  auto boolean = [&](const char* key, bool dflt) -> bool {
    const auto* n = tbl.get(key);
    if (!n) return dflt;
    if (!n->is_boolean()) fail("model config: '", key, "' must be a boolean");
    return n->value<bool>().value();
  };
  ModelConfig c;
  c.name = str("name", c.name);
  c.encoder = encoder_from_string(str("encoder", std::string(to_string(c.encoder))));
  c.control_mode = control_from_string(str("control_mode", std::string(to_string(c.control_mode))));
  c.loss_mode = loss_from_string(str("loss_mode", std::string(to_string(c.loss_mode))));
  c.w_lat = num("w_lat", c.w_lat);
  c.w_lon = num("w_lon", c.w_lon);
  c.speed_branch = boolean("speed_branch", c.speed_branch);
  c.augmentation = boolean("augmentation", c.augmentation);
  c.dropout_p = num("dropout_p", c.dropout_p);
  c.batch_size = integer("batch_size", c.batch_size);
  c.initial_lr = num("initial_lr", c.initial_lr);
  c.max_epochs = integer("max_epochs", c.max_epochs);
  c.max_lr_cuts = integer("max_lr_cuts", c.max_lr_cuts);
  c.frame_stride = integer("frame_stride", c.frame_stride);
  c.validate();
  return c;
}

inline ModelConfig config_from_toml_string(std::string_view text) {
  try {
    return config_from_toml(toml::parse(text));
  } catch (const toml::parse_error& e) {
    fail("model config: TOML parse error: ", e.description());
  }
}

inline ModelConfig load_config(const std::string& path) {
  try {
    return config_from_toml(toml::parse_file(path));
  } catch (const toml::parse_error& e) {
    fail("model config '", path, "': ", e.description());
  }
}

}  // namespace mtcil::policy
