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

#include <cstddef>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "mtcil/common.hpp"

namespace mtcil::nn {

using Shape = std::vector<int>;

inline std::size_t numel(const Shape& s) {
  std::size_t n = 1;
  for (int d : s) {
    if (d < 0) fail("negative dimension in shape");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream oss;
  oss << '[';
  for (std::size_t i = 0; i < s.size(); ++i) oss << (i ? ", " : "") << s[i];
  oss << ']';
  return oss.str();
}

// Dense row-major float64 tensor. Images are NCHW.
struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0) : shape(std::move(s)), data(numel(shape), fill) {}
  Tensor(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != numel(shape)) {
      fail("tensor data length ", data.size(), " does not match shape ", shape_str(shape));
    }
  }

  static Tensor scalar(double v) { return Tensor({1}, std::vector<double>{v}); }

  std::size_t size() const { return data.size(); }
  int dim(std::size_t i) const { return shape.at(i); }
  int rows() const { return shape.empty() ? 0 : shape[0]; }
  // Elements per leading-dimension row.
  std::size_t row_size() const { return shape.empty() || shape[0] == 0 ? 0 : data.size() / shape[0]; }

  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape != b.shape) {
    fail(op, ": shape mismatch ", shape_str(a.shape), " vs ", shape_str(b.shape));
  }
}

}  // namespace mtcil::nn
