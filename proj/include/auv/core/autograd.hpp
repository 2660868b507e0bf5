/*
 * Copyright 2026 The AUV Codec Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "auv/core/tensor.hpp"

// Tape-free reverse-mode differentiation. Every differentiable result keeps
// shared handles to its inputs and a closure that pushes its gradient back to
// them; backward() walks the graph in reverse topological order.
namespace auv::ag {

struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  /// Gradient accumulator, zero-initialised on first use.
  Tensor& grad_buffer() {
    if (grad.shape() != value.shape()) grad = Tensor::zeros_like(value);
    return grad;
  }
};

namespace detail {
inline bool& grad_mode() {
  thread_local bool enabled = true;
  return enabled;
}
}  // namespace detail

inline bool grad_enabled() { return detail::grad_mode(); }

/// Disables graph recording in the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_mode()) { detail::grad_mode() = false; }
  ~NoGradGuard() { detail::grad_mode() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false) : node_(std::make_shared<Node>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Var parameter(Tensor value) { return Var(std::move(value), true); }

  bool defined() const noexcept { return static_cast<bool>(node_); }
  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t size() const { return node_->value.size(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }

  bool has_grad() const { return node_->grad.shape() == node_->value.shape(); }
  const Tensor& grad() const { return node_->grad_buffer(); }
  void zero_grad() { node_->grad = Tensor(); }

  /// Scalar value of a one-element variable.
  double item() const {
    if (node_->value.size() != 1) throw ShapeError("item() on non-scalar " + shape_string(shape()));
    return node_->value[0];
  }

  const std::shared_ptr<Node>& node() const noexcept { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Builds a graph node for an op result. Records parents only when gradient
/// recording is enabled and some input needs a gradient.
inline Var make_result(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (grad_enabled()) {
    bool any = false;
    for (const auto& in : inputs) any = any || in.requires_grad();
    if (any) {
      node->requires_grad = true;
      node->parents.reserve(inputs.size());
      for (auto& in : inputs) node->parents.push_back(in.node());
      node->backward_fn = std::move(backward);
    }
  }
  return Var(std::move(node));
}

/// Detached copy sharing no graph with its source.
inline Var detach(const Var& x) { return Var(x.value(), false); }

/// Accumulates d(root)/d(leaf) into every reachable leaf. Interior gradients
/// are released once propagated unless `retain_interior` is set, so several
/// roots sharing a subgraph can be backpropagated one after another.
inline void backward(const Var& root, const Tensor& seed, bool retain_interior = false) {
  if (!root.requires_grad()) return;
  root.value().check_same_shape(seed, "backward seed");
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  // Iterative post-order DFS.
  std::vector<std::pair<Node*, std::size_t>> stack{{root.node().get(), 0}};
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root.node()->grad_buffer() += seed;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->grad.shape() == n->value.shape()) {
      n->backward_fn(*n);
      if (!retain_interior) n->grad = Tensor();
    }
  }
}

/// Backpropagates from a scalar.
inline void backward(const Var& root, bool retain_interior = false) {
  backward(root, Tensor(root.shape(), 1.0), retain_interior);
}

}  // namespace auv::ag
