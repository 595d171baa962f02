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
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "mtcil/common.hpp"
#include "mtcil/nn/params.hpp"
#include "mtcil/nn/tape.hpp"

namespace mtcil::nn {

// Builds the scalar objective on a fresh tape bound to the store. Must be
// deterministic (freeze dropout masks by reseeding inside).
using Objective = std::function<Var(Tape&)>;

struct GradCheckOptions {
  double h = 1e-4;
  // Tensors larger than this get a seeded random subset of coordinates
  // checked; 0 means check everything.
  std::size_t max_coords_per_tensor = 0;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  std::size_t coords_checked = 0;
};

inline double evaluate_objective(const Objective& f, ParamStore& params) {
  Tape tape(&params);
  const Var y = f(tape);
  const Tensor& v = tape.value(y);
  if (v.size() != 1) fail("grad_check: objective must be scalar, got ", shape_str(v.shape));
  return v[0];
}

// Central differences against the tape gradient, per coordinate:
// |analytic - numeric| / max(1, |analytic|).
inline GradCheckResult grad_check(const Objective& f, ParamStore& params, const GradCheckOptions& opt = {}) {
  Grads analytic;
  {
    Tape tape(&params);
    analytic = tape.backward(f(tape));
  }
  GradCheckResult res;
  Rng rng(derive_seed(opt.seed, 0x67c));
  for (auto& [name, p] : params) {
    Tensor& value = p.value;
    std::vector<std::size_t> coords(value.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (opt.max_coords_per_tensor > 0 && coords.size() > opt.max_coords_per_tensor) {
      // Partial Fisher-Yates keeps the pick independent of library shuffles.
      for (std::size_t i = 0; i < opt.max_coords_per_tensor; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng() % (coords.size() - i));
        std::swap(coords[i], coords[j]);
      }
      coords.resize(opt.max_coords_per_tensor);
    }
    const Tensor& g = analytic.at(name);
    for (std::size_t i : coords) {
      const double orig = value[i];
      value[i] = orig + opt.h;
      const double fp = evaluate_objective(f, params);
      value[i] = orig - opt.h;
      const double fm = evaluate_objective(f, params);
      value[i] = orig;
      const double numeric = (fp - fm) / (2.0 * opt.h);
      const double err = std::abs(g[i] - numeric) / std::max(1.0, std::abs(g[i]));
      ++res.coords_checked;
      if (err > res.max_rel_error || res.worst_param.empty()) {
        res.max_rel_error = std::max(err, res.max_rel_error);
        res.worst_param = name;
        res.worst_index = i;
      }
    }
  }
  return res;
}

}  // namespace mtcil::nn
