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
#include <cmath>
#include <cstdint>
#include <vector>

#include "mtcil/common.hpp"
#include "mtcil/sim/geometry.hpp"
#include "mtcil/sim/scene.hpp"
#include "mtcil/sim/weather.hpp"
#include "mtcil/sim/world.hpp"

namespace mtcil::sim {

inline constexpr int kChannels = 5;
inline constexpr int kGrid = 48;
inline constexpr double kCellSize = 0.5;
inline constexpr int kRasterSize = kChannels * kGrid * kGrid;

enum Channel : int { kDrivable = 0, kLaneMarkings = 1, kCrosswalks = 2, kPedestrians = 3, kRoute = 4 };

// Ego-centric semantic raster, channel-major, row 0 farthest ahead. Cells
// hold 8-bit intensity levels; value() maps them onto [0, 1].
struct Observation {
  std::vector<std::uint8_t> raster = std::vector<std::uint8_t>(kRasterSize, 0);
  double ego_speed = 0.0;

  static constexpr std::size_t index(int channel, int row, int col) {
    return (static_cast<std::size_t>(channel) * kGrid + static_cast<std::size_t>(row)) * kGrid +
           static_cast<std::size_t>(col);
  }
  double value(int channel, int row, int col) const {
    return raster[index(channel, row, col)] / 255.0;
  }
  friend bool operator==(const Observation&, const Observation&) = default;
};

// Ego-frame coordinates (forward, right) of a point given in fractional
// row/column units; integers are cell centres. The ego sits at the bottom
// centre of the grid facing up.
inline Vec2 grid_to_local(double row, double col) {
  return {(kGrid - 0.5 - row) * kCellSize, (col - (kGrid / 2.0 - 0.5)) * kCellSize};
}

inline Vec2 cell_center_local(int row, int col) { return grid_to_local(row, col); }

// Each cell is sampled on a kSuper x kSuper grid and stores the covered
// fraction, so sub-cell offsets of the route and of pedestrians stay visible.
inline constexpr int kSuper = 4;
inline constexpr double kPedestrianDiscRadius = 0.6;  // m, drawn larger than the body
inline constexpr double kRouteDiscRadius = 0.75;

namespace detail {

inline constexpr int kFine = kGrid * kSuper;

inline double sub_offset(int k) { return (k + 0.5) / kSuper - 0.5; }

inline bool on_lane_marking(const SceneSpec& s, Vec2 p) {
  const double b = s.box_half();
  const double h = s.road_half_width();
  const double tol = 0.3;
  auto near_line = [&](double lateral) {
    if (std::abs(lateral) > h + tol) return false;
    const double k = std::round(lateral / s.lane_width);
    return std::abs(lateral - k * s.lane_width) <= tol;
  };
  if (std::abs(p.x) > b && std::abs(p.x) <= s.arm_length && near_line(p.y)) return true;
  if (std::abs(p.y) > b && std::abs(p.y) <= s.arm_length && near_line(p.x)) return true;
  return false;
}

using FinePlane = std::vector<std::uint8_t>;

inline void stamp_disc(FinePlane& plane, const Pose2D& ego, Vec2 world, double radius) {
  const Vec2 l = to_local(ego, world);
  // Disc centre in fine-grid index units.
  const double rc = ((kGrid - 0.5 - l.x / kCellSize) + 0.5) * kSuper - 0.5;
  const double cc = ((l.y / kCellSize + (kGrid / 2.0 - 0.5)) + 0.5) * kSuper - 0.5;
  const double rf = radius / kCellSize * kSuper;
  const int r0 = std::max(0, static_cast<int>(std::floor(rc - rf)));
  const int r1 = std::min(kFine - 1, static_cast<int>(std::ceil(rc + rf)));
  const int c0 = std::max(0, static_cast<int>(std::floor(cc - rf)));
  const int c1 = std::min(kFine - 1, static_cast<int>(std::ceil(cc + rf)));
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      const double dr = r - rc, dc = c - cc;
      if (dr * dr + dc * dc <= rf * rf) plane[static_cast<std::size_t>(r * kFine + c)] = 1;
    }
  }
}

inline void downsample(const FinePlane& fine, float* out) {
  constexpr float inv = 1.0f / (kSuper * kSuper);
  for (int r = 0; r < kGrid; ++r) {
    for (int c = 0; c < kGrid; ++c) {
      int n = 0;
      for (int i = 0; i < kSuper; ++i)
        for (int j = 0; j < kSuper; ++j) n += fine[static_cast<std::size_t>((r * kSuper + i) * kFine + c * kSuper + j)];
      out[r * kGrid + c] = static_cast<float>(n) * inv;
    }
  }
}

}  // namespace detail

// Noise-free semantic render in [0, 1], channel-major.
inline std::vector<float> render_clean(const WorldState& world) {
  const SceneSpec& scene = *world.scene;
  const Pose2D& ego = world.ego.pose;
  std::vector<float> out(kRasterSize, 0.0f);
  constexpr float w = 1.0f / (kSuper * kSuper);
  for (int r = 0; r < kGrid; ++r) {
    for (int c = 0; c < kGrid; ++c) {
      const std::size_t cell = static_cast<std::size_t>(r * kGrid + c);
      int drivable = 0, marking = 0, crossing = 0;
      for (int i = 0; i < kSuper; ++i) {
        for (int j = 0; j < kSuper; ++j) {
          const Vec2 p = to_world(ego, grid_to_local(r + detail::sub_offset(i), c + detail::sub_offset(j)));
          drivable += scene.drivable(p);
          marking += detail::on_lane_marking(scene, p);
          for (const auto& cw : scene.crosswalks) {
            if (cw.contains(p)) {
              ++crossing;
              break;
            }
          }
        }
      }
      out[kDrivable * kGrid * kGrid + cell] = static_cast<float>(drivable) * w;
      out[kLaneMarkings * kGrid * kGrid + cell] = static_cast<float>(marking) * w;
      out[kCrosswalks * kGrid * kGrid + cell] = static_cast<float>(crossing) * w;
    }
  }
  detail::FinePlane peds(static_cast<std::size_t>(detail::kFine * detail::kFine), 0);
  for (const auto& p : world.pedestrians) {
    const Vec2 l = to_local(ego, p.pose.position);
    if (l.x < -1.0 || l.x > kGrid * kCellSize + 1.0 || std::abs(l.y) > kGrid * kCellSize) continue;
    detail::stamp_disc(peds, ego, p.pose.position, kPedestrianDiscRadius);
  }
  detail::FinePlane route(peds.size(), 0);
  const Route& rt = world.route();
  const std::size_t first = rt.nearest_index(ego.position);
  for (std::size_t i = first; i < rt.waypoints.size(); ++i) {
    const Vec2 l = to_local(ego, rt.waypoints[i].position);
    if (l.x > kGrid * kCellSize + 2.0 || std::abs(l.y) > kGrid * kCellSize) {
      if (rt.arc[i] - rt.arc[first] > 40.0) break;
      continue;
    }
    detail::stamp_disc(route, ego, rt.waypoints[i].position, kRouteDiscRadius);
  }
  detail::downsample(peds, out.data() + kPedestrians * kGrid * kGrid);
  detail::downsample(route, out.data() + kRoute * kGrid * kGrid);
  return out;
}

inline std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

// Weather applies additive Gaussian noise, per-cell dropout and a brightness
// bias, then clips back to [0, 1].
inline Observation render_observation(const WorldState& world, const WeatherProfile& weather,
                                      Rng& rng) {
  const std::vector<float> clean = render_clean(world);
  Observation obs;
  obs.ego_speed = world.ego.speed;
  if (weather.is_identity()) {
    for (std::size_t i = 0; i < clean.size(); ++i) obs.raster[i] = quantize(clean[i]);
    return obs;
  }
  for (std::size_t i = 0; i < clean.size(); ++i) {
    double v = clean[i];
    if (weather.noise_sigma > 0.0) v += weather.noise_sigma * normal(rng);
    if (weather.channel_dropout_p > 0.0 && uniform(rng, 0.0, 1.0) < weather.channel_dropout_p) {
      v = 0.0;
    }
    v += weather.brightness_bias;
    obs.raster[i] = quantize(v);
  }
  return obs;
}

}  // namespace mtcil::sim
