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

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "mtcil/common.hpp"
#include "mtcil/nn/tensor.hpp"

namespace mtcil::nn {

struct Param {
  Tensor value;
  Tensor m;  // Adam first moment
  Tensor v;  // Adam second moment
};

using Grads = std::map<std::string, Tensor>;

// Named parameters plus optimizer state. Iteration order is the key order,
// which keeps every traversal deterministic.
class ParamStore {
 public:
  Tensor& add(const std::string& name, Tensor init) {
    if (params_.count(name)) fail("parameter '", name, "' already exists");
    if (!init.all_finite()) fail("parameter '", name, "' initialised with non-finite values");
    Param p;
    p.m = Tensor(init.shape);
    p.v = Tensor(init.shape);
    p.value = std::move(init);
    return params_.emplace(name, std::move(p)).first->second.value;
  }

  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  Tensor& get(const std::string& name) { return lookup(name).value; }
  const Tensor& get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) fail("unknown parameter '", name, "'");
    return it->second.value;
  }
  Param& lookup(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) fail("unknown parameter '", name, "'");
    return it->second;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [k, _] : params_) out.push_back(k);
    return out;
  }
  std::size_t size() const { return params_.size(); }
  std::size_t total_count() const {
    std::size_t n = 0;
    for (const auto& [_, p] : params_) n += p.value.size();
    return n;
  }

  long step() const { return step_; }
  void set_step(long s) { step_ = s; }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  // Equality over names and values only; optimizer state is not compared.
  bool same_values(const ParamStore& o) const {
    if (params_.size() != o.params_.size()) return false;
    auto a = params_.begin();
    auto b = o.params_.begin();
    for (; a != params_.end(); ++a, ++b) {
      if (a->first != b->first || !(a->second.value == b->second.value)) return false;
    }
    return true;
  }

 private:
  std::map<std::string, Param> params_;
  long step_ = 0;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam. Only parameters present in `grads` are touched, which
// lets callers optimise a subset while the rest stay frozen.
inline void adam_step(ParamStore& params, const Grads& grads, double lr, const AdamConfig& cfg = {}) {
  if (!(lr >= 0.0) || !std::isfinite(lr)) fail("adam_step: learning rate must be finite and >= 0");
  for (const auto& [name, g] : grads) {
    if (!g.all_finite()) fail("adam_step: non-finite gradient for '", name, "'");
    Param& p = params.lookup(name);
    require_same_shape(p.value, g, "adam_step");
  }
  const long t = params.step() + 1;
  params.set_step(t);
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (const auto& [name, g] : grads) {
    Param& p = params.lookup(name);
    for (std::size_t i = 0; i < g.size(); ++i) {
      p.m[i] = cfg.beta1 * p.m[i] + (1.0 - cfg.beta1) * g[i];
      p.v[i] = cfg.beta2 * p.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double mhat = p.m[i] / bc1;
      const double vhat = p.v[i] / bc2;
      p.value[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

// Checkpoint layout (all integers little-endian):
//   "MTCILCKP" | u32 version | u32 count | count x {u32 name_len, name,
//   u32 ndim, ndim x u32 dims, numel x f64 payload}
inline constexpr char kCheckpointMagic[8] = {'M', 'T', 'C', 'I', 'L', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <typename T>
void put_le(std::ostream& os, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get_le(std::istream& is) {
  unsigned char buf[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(T))) fail("checkpoint truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

}  // namespace detail

inline void write_checkpoint(std::ostream& os, const ParamStore& params) {
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::put_le<std::uint32_t>(os, kCheckpointVersion);
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, p] : params) {
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(p.value.shape.size()));
    for (int d : p.value.shape) detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(d));
    for (double v : p.value.data) detail::put_le<double>(os, v);
  }
  if (!os) fail("checkpoint write failed");
}

inline ParamStore read_checkpoint(std::istream& is) {
  char magic[sizeof(kCheckpointMagic)];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    fail("not a checkpoint file (bad magic)");
  }
  const auto version = detail::get_le<std::uint32_t>(is);
  if (version != kCheckpointVersion) {
    fail("checkpoint version ", version, " unsupported (expected ", kCheckpointVersion, ")");
  }
  const auto count = detail::get_le<std::uint32_t>(is);
  ParamStore out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = detail::get_le<std::uint32_t>(is);
    if (len > 4096) fail("checkpoint: implausible name length ", len);
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) fail("checkpoint truncated");
    const auto ndim = detail::get_le<std::uint32_t>(is);
    if (ndim > 8) fail("checkpoint: implausible rank ", ndim, " for '", name, "'");
    Shape shape;
    for (std::uint32_t d = 0; d < ndim; ++d) shape.push_back(static_cast<int>(detail::get_le<std::uint32_t>(is)));
    Tensor t(shape);
    for (double& v : t.data) v = detail::get_le<double>(is);
    out.add(name, std::move(t));
  }
  return out;
}

inline void save_checkpoint(const std::string& path, const ParamStore& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail("cannot open '", path, "' for writing");
  write_checkpoint(os, params);
}

inline ParamStore load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail("cannot open checkpoint '", path, "'");
  return read_checkpoint(is);
}

}  // namespace mtcil::nn
