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

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "mtcil/common.hpp"
#include "mtcil/sim/scene.hpp"

namespace mtcil::sim {

// Weather is modelled as an observation-noise regime applied to the raster.
struct WeatherProfile {
  std::string_view name;
  double noise_sigma = 0.0;
  double channel_dropout_p = 0.0;
  double brightness_bias = 0.0;
  Split split = Split::Train;

  bool is_identity() const {
    return noise_sigma == 0.0 && channel_dropout_p == 0.0 && brightness_bias == 0.0;
  }
};

// Each Sunset entry is strictly harsher than the Noon entry four slots above.
inline constexpr std::array<WeatherProfile, 8> kWeathers{{
    {"ClearNoon", 0.00, 0.00, 0.00, Split::Train},
    {"CloudyNoon", 0.03, 0.01, -0.03, Split::Train},
    {"WetNoon", 0.05, 0.02, -0.05, Split::Train},
    {"HardRainNoon", 0.08, 0.03, -0.08, Split::Train},
    {"ClearSunset", 0.04, 0.02, -0.06, Split::Test},
    {"CloudySunset", 0.06, 0.03, -0.08, Split::Test},
    {"WetSunset", 0.08, 0.04, -0.10, Split::Test},
    {"HardRainSunset", 0.10, 0.05, -0.12, Split::Test},
}};

inline const WeatherProfile& weather_by_name(std::string_view name) {
  for (const auto& w : kWeathers)
    if (w.name == name) return w;
  fail("unknown weather '", name, "'");
}

inline std::vector<WeatherProfile> weathers_for(Split split) {
  std::vector<WeatherProfile> out;
  for (const auto& w : kWeathers)
    if (w.split == split) out.push_back(w);
  return out;
}

}  // namespace mtcil::sim
