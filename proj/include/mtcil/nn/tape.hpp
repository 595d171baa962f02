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

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "mtcil/common.hpp"
#include "mtcil/nn/params.hpp"
#include "mtcil/nn/tensor.hpp"

namespace mtcil::nn {

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Records one forward pass. backward() may be called once; afterwards the
// tape only serves values.
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Tensor& grad_out)>;

  explicit Tape(const ParamStore* params = nullptr) : params_(params) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor t) {
    if (!t.all_finite()) fail("constant: non-finite input");
    return push(std::move(t), false, nullptr);
  }

  // Leaf bound to a stored parameter; repeated requests share one node.
  Var param(const std::string& name) {
    if (!params_) fail("tape has no parameter store");
    if (auto it = param_nodes_.find(name); it != param_nodes_.end()) return {it->second};
    Var v = push(params_->get(name), true, nullptr);
    param_nodes_.emplace(name, v.id);
    return v;
  }

  // Adds an op result. `needs_grad` is the OR of the parents' flags.
  Var record(Tensor value, bool needs_grad, Backward back) {
    if (!value.all_finite()) fail("non-finite value produced during forward pass");
    return push(std::move(value), needs_grad, needs_grad ? std::move(back) : nullptr);
  }

  const Tensor& value(Var v) const { return node(v).value; }
  bool needs_grad(Var v) const { return node(v).needs_grad; }
  bool has_grad(Var v) const { return node(v).has_grad; }
  const Tensor& grad(Var v) const {
    const Node& n = node(v);
    if (!n.has_grad) fail("no gradient recorded for node ", v.id);
    return n.grad;
  }

  // Gradient accumulator for a parent, allocated on first use.
  Tensor& acc(Var v) {
    Node& n = nodes_.at(static_cast<std::size_t>(v.id));
    if (!n.has_grad) {
      n.grad = Tensor(n.value.shape);
      n.has_grad = true;
    }
    return n.grad;
  }

  const ParamStore* params() const { return params_; }
  std::size_t size() const { return nodes_.size(); }

  // Reverse sweep from a scalar. Every stored parameter gets an entry; the
  // ones the loss never reached get exact zeros.
  Grads backward(Var loss) {
    if (done_) fail("backward already called on this tape");
    const Tensor& lv = value(loss);
    if (lv.size() != 1) fail("backward: loss must be scalar, got shape ", shape_str(lv.shape));
    done_ = true;
    acc(loss)[0] = 1.0;
    for (int i = loss.id; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (!n.has_grad || !n.backward) continue;
      // Parents always precede their children, so the closure only writes to
      // lower ids and n.grad stays put.
      n.backward(*this, n.grad);
    }
    Grads out;
    if (params_) {
      for (const auto& [name, p] : *params_) {
        auto it = param_nodes_.find(name);
        const Node* n = it == param_nodes_.end() ? nullptr : &nodes_[static_cast<std::size_t>(it->second)];
        out.emplace(name, n && n->has_grad ? n->grad : Tensor(p.value.shape));
      }
    }
    return out;
  }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool needs_grad = false;
    Backward backward;
  };

  Var push(Tensor t, bool needs_grad, Backward back) {
    if (done_) fail("tape is closed after backward");
    Node n;
    n.value = std::move(t);
    n.needs_grad = needs_grad;
    n.backward = std::move(back);
    nodes_.push_back(std::move(n));
    return {static_cast<int>(nodes_.size() - 1)};
  }

  const Node& node(Var v) const {
    if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) fail("invalid tape variable");
    return nodes_[static_cast<std::size_t>(v.id)];
  }

  std::vector<Node> nodes_;
  std::map<std::string, int> param_nodes_;
  const ParamStore* params_ = nullptr;
  bool done_ = false;
};

}  // namespace mtcil::nn
