// musa/ad/var.hpp

// Copyright 2026  The musa authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef MUSA_AD_VAR_HPP_
#define MUSA_AD_VAR_HPP_

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <stdexcept>
#include <unordered_set>
#include <utility>
#include <vector>

namespace musa::ad {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;
using Index = Eigen::Index;

/// Thread-local switch for graph recording. Inference code wraps its forward
/// pass in a NoGradGuard so that no parents or closures are retained.
inline bool& grad_mode() {
  static thread_local bool enabled = true;
  return enabled;
}

class NoGradGuard {
 public:
  NoGradGuard() : previous_(grad_mode()) { grad_mode() = false; }
  ~NoGradGuard() { grad_mode() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

template <typename T>
struct Node {
  Matrix<T> value;
  Matrix<T> grad;
  bool requires_grad = false;
  // Feature maps are stored channel-major: rows are channels, columns walk a
  // (height x width) grid with height varying fastest. 1-D signals use 1.
  Index height = 1;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(const Matrix<T>&)> backward;

  Matrix<T>& grad_buffer() {
    if (grad.size() == 0) grad = Matrix<T>::Zero(value.rows(), value.cols());
    return grad;
  }
};

/// Handle to a node of the recorded computation graph. Copies share the node.
template <typename T>
class Var {
 public:
  using Scalar = T;

  Var() = default;
  explicit Var(Matrix<T> value, bool requires_grad = false, Index height = 1)
      : node_(std::make_shared<Node<T>>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
    node_->height = height;
  }

  static Var scalar(T v) { return Var(Matrix<T>::Constant(1, 1, v)); }

  bool defined() const { return node_ != nullptr; }
  const Matrix<T>& value() const { return node_->value; }
  Matrix<T>& mutable_value() { return node_->value; }
  const Matrix<T>& grad() const { return node_->grad; }
  Matrix<T>& mutable_grad() { return node_->grad_buffer(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  Index height() const { return node_->height; }
  Index width() const { return node_->value.cols() / node_->height; }
  T item() const {
    if (node_->value.size() != 1) throw std::logic_error("item() on non-scalar Var");
    return node_->value(0, 0);
  }
  void zero_grad() { node_->grad.resize(0, 0); }
  const std::shared_ptr<Node<T>>& node() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Builds the output of an op. The closure receives the upstream gradient
/// and must accumulate into the parents it captured. Nothing is recorded when
/// grad mode is off or no input needs a gradient.
template <typename T, typename Backward>
Var<T> make_result(Matrix<T> value, std::initializer_list<Var<T>> inputs,
                   Backward&& backward, Index height = 1) {
  Var<T> out(std::move(value), false, height);
  if (!grad_mode()) return out;
  auto& node = *out.node();
  for (const auto& in : inputs) {
    if (in.requires_grad()) node.parents.push_back(in.node());
  }
  if (node.parents.empty()) return out;
  node.requires_grad = true;
  node.backward = std::forward<Backward>(backward);
  return out;
}

template <typename T, typename Backward>
Var<T> make_result(Matrix<T> value, const std::vector<Var<T>>& inputs,
                   Backward&& backward, Index height = 1) {
  Var<T> out(std::move(value), false, height);
  if (!grad_mode()) return out;
  auto& node = *out.node();
  for (const auto& in : inputs) {
    if (in.requires_grad()) node.parents.push_back(in.node());
  }
  if (node.parents.empty()) return out;
  node.requires_grad = true;
  node.backward = std::forward<Backward>(backward);
  return out;
}

/// Reverse sweep from `root`, seeding its gradient with `seed` (a scalar
/// multiplier on d root / d root). Leaf gradients accumulate across calls.
template <typename T>
void backward(const Var<T>& root, T seed = T(1)) {
  if (!root.requires_grad()) return;
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> visited;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* parent = node->parents[next++].get();
      if (visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root.node()->grad_buffer().array() += seed;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = *it;
    if (!node->backward || node->grad.size() == 0) continue;
    node->backward(node->grad);
    // Interior gradients are not needed after propagation.
    if (!node->parents.empty()) node->grad.resize(0, 0);
  }
}

}  // namespace musa::ad

#endif  // MUSA_AD_VAR_HPP_
