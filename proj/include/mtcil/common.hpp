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
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mtcil {

// All recoverable failures in the library surface as mtcil::Error.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename... Args>
[[noreturn]] inline void fail(Args&&... parts) {
  std::ostringstream oss;
  (oss << ... << std::forward<Args>(parts));
  throw Error(oss.str());
}

inline double clip(double v, double lo, double hi) { return std::clamp(v, lo, hi); }
inline double clip_unit(double v) { return std::clamp(v, -1.0, 1.0); }

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double deg2rad(double d) { return d * kPi / 180.0; }
inline constexpr double rad2deg(double r) { return r * 180.0 / kPi; }

// splitmix64 finalizer; used to derive independent stream seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

template <typename... Ts>
inline std::uint64_t derive_seed(std::uint64_t base, Ts... parts) {
  std::uint64_t s = mix_seed(base);
  ((s = mix_seed(s ^ static_cast<std::uint64_t>(parts))), ...);
  return s;
}

using Rng = std::mt19937_64;

// Uniform double in [lo, hi) built directly from the engine's bits so the
// stream is identical across standard library implementations.
inline double uniform(Rng& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

inline int uniform_int(Rng& rng, int lo, int hi_inclusive) {
  const auto span = static_cast<std::uint64_t>(hi_inclusive - lo + 1);
  return lo + static_cast<int>(rng() % span);
}

// Box-Muller standard normal.
inline double normal(Rng& rng) {
  double u1 = uniform(rng, 0.0, 1.0);
  const double u2 = uniform(rng, 0.0, 1.0);
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace mtcil
