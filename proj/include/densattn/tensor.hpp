/*
 * Copyright 2026 The densattn Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef DENSATTN_TENSOR_HPP
#define DENSATTN_TENSOR_HPP

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace densattn {

using Index = std::int64_t;

/// Dense N x C x H x W extent.
struct Shape {
  Index n = 0;
  Index c = 0;
  Index h = 0;
  Index w = 0;

  constexpr Index size() const { return n * c * h * w; }
  constexpr Index plane() const { return h * w; }
  constexpr std::array<Index, 4> dims() const { return {n, c, h, w}; }
  constexpr bool operator==(const Shape&) const = default;

  std::string str() const {
    return "[" + std::to_string(n) + "," + std::to_string(c) + "," +
           std::to_string(h) + "," + std::to_string(w) + "]";
  }

  static constexpr Shape from_dims(const std::array<Index, 4>& d) {
    return {d[0], d[1], d[2], d[3]};
  }
};

/// Thrown for malformed shapes, configs and other caller errors.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline bool& grad_mode_flag() {
  thread_local bool enabled = true;
  return enabled;
}

template <typename Scalar>
struct Node {
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  Shape shape;
  Array value;
  Array grad;  // empty until something flows into it
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  // Propagates this node's grad into its inputs.
  std::function<void(Node&)> backward;

  void accumulate(const Array& g) {
    if (grad.size() == 0) {
      grad = g;
    } else {
      grad += g;
    }
  }
};

}  // namespace detail

/// Gradient recording is on by default; the guard turns it off for the
/// current thread (inference, finite differences).
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_mode_flag()) { detail::grad_mode_flag() = false; }
  ~NoGradGuard() { detail::grad_mode_flag() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

inline bool grad_enabled() { return detail::grad_mode_flag(); }

/**
 * Dense 4-D tensor with optional participation in reverse-mode autodiff.
 *
 * A Tensor is a shared handle: copies alias the same storage and graph
 * node. Values change only through mutable_data() on leaf tensors.
 */
template <typename Scalar>
class Tensor {
 public:
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  using NodeType = detail::Node<Scalar>;

  Tensor() : node_(std::make_shared<NodeType>()) {}

  explicit Tensor(const Shape& shape, Scalar fill = Scalar(0), bool requires_grad = false)
      : node_(std::make_shared<NodeType>()) {
    check_shape(shape);
    node_->shape = shape;
    node_->value = Array::Constant(shape.size(), fill);
    node_->requires_grad = requires_grad;
  }

  Tensor(const Shape& shape, Array values, bool requires_grad = false)
      : node_(std::make_shared<NodeType>()) {
    check_shape(shape);
    if (values.size() != shape.size()) {
      throw ShapeError("tensor data length " + std::to_string(values.size()) +
                       " does not match shape " + shape.str());
    }
    node_->shape = shape;
    node_->value = std::move(values);
    node_->requires_grad = requires_grad;
  }

  static Tensor zeros(const Shape& shape) { return Tensor(shape); }

  static Tensor from_values(const Shape& shape, std::initializer_list<Scalar> values) {
    Array a(static_cast<Index>(values.size()));
    Index i = 0;
    for (Scalar v : values) a(i++) = v;
    return Tensor(shape, std::move(a));
  }

  const Shape& shape() const { return node_->shape; }
  Index size() const { return node_->shape.size(); }
  bool empty() const { return size() == 0; }

  const Array& data() const { return node_->value; }
  Array& mutable_data() { return node_->value; }

  Index offset(Index n, Index c, Index h, Index w) const {
    const Shape& s = node_->shape;
    return ((n * s.c + c) * s.h + h) * s.w + w;
  }
  Scalar operator()(Index n, Index c, Index h, Index w) const {
    return node_->value(offset(n, c, h, w));
  }
  Scalar& at(Index n, Index c, Index h, Index w) { return node_->value(offset(n, c, h, w)); }

  Scalar item() const {
    if (size() != 1) throw ShapeError("item() on non-scalar tensor " + shape().str());
    return node_->value(0);
  }

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool flag) {
    node_->requires_grad = flag;
    return *this;
  }

  bool has_grad() const { return node_->grad.size() == node_->value.size(); }
  const Array& grad() const { return node_->grad; }
  void zero_grad() { node_->grad.resize(0); }

  /// Detached copy of the values (no graph, no grad).
  Tensor detach() const { return Tensor(shape(), data()); }

  /// Reverse-mode sweep from this scalar; discards the recorded graph.
  void backward() const;

  const std::shared_ptr<NodeType>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<NodeType> node) : node_(std::move(node)) {}

 private:
  static void check_shape(const Shape& s) {
    if (s.n < 0 || s.c < 0 || s.h < 0 || s.w < 0) {
      throw ShapeError("negative extent in shape " + s.str());
    }
  }

  std::shared_ptr<NodeType> node_;
};

namespace detail {

/// Wraps a freshly computed value as an op result, recording the backward
/// closure only when some input participates in the tape.
template <typename Scalar>
Tensor<Scalar> make_result(const Shape& shape, typename Tensor<Scalar>::Array value,
                           std::vector<Tensor<Scalar>> inputs,
                           std::function<void(Node<Scalar>&)> backward) {
  Tensor<Scalar> out(shape, std::move(value));
  if (!grad_enabled()) return out;
  bool any = false;
  for (const auto& t : inputs) any = any || t.requires_grad();
  if (!any) return out;
  auto& node = *out.node();
  node.requires_grad = true;
  node.inputs.reserve(inputs.size());
  for (auto& t : inputs) node.inputs.push_back(t.node());
  node.backward = std::move(backward);
  return out;
}

}  // namespace detail

template <typename Scalar>
void Tensor<Scalar>::backward() const {
  if (size() != 1) {
    throw ShapeError("backward() needs a scalar loss, got shape " + shape().str());
  }
  if (!requires_grad()) {
    throw ShapeError("backward() on a tensor that is not connected to any parameter");
  }

  // Iterative post-order DFS yields a topological order (inputs first).
  std::vector<NodeType*> order;
  std::unordered_set<NodeType*> seen;
  std::vector<std::pair<NodeType*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      NodeType* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  node_->accumulate(Array::Ones(1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    NodeType* node = *it;
    if (node->backward && node->grad.size() > 0) node->backward(*node);
  }
  for (NodeType* node : order) {
    if (node->backward) {
      node->backward = nullptr;
      node->inputs.clear();
    }
  }
}

/// Named trainable tensors in deterministic insertion order.
template <typename Scalar>
class ParamStore {
 public:
  Tensor<Scalar>& add(const std::string& name, Tensor<Scalar> t) {
    for (const auto& [existing, _] : entries_) {
      if (existing == name) throw ShapeError("duplicate parameter name '" + name + "'");
    }
    t.set_requires_grad(true);
    entries_.emplace_back(name, std::move(t));
    return entries_.back().second;
  }

  const Tensor<Scalar>& get(const std::string& name) const {
    for (const auto& [existing, t] : entries_) {
      if (existing == name) return t;
    }
    throw ShapeError("unknown parameter '" + name + "'");
  }
  Tensor<Scalar>& get(const std::string& name) {
    return const_cast<Tensor<Scalar>&>(std::as_const(*this).get(name));
  }
  bool contains(const std::string& name) const {
    for (const auto& [existing, _] : entries_) {
      if (existing == name) return true;
    }
    return false;
  }

  std::size_t entries() const { return entries_.size(); }
  Index count() const {
    Index total = 0;
    for (const auto& [_, t] : entries_) total += t.size();
    return total;
  }

  void zero_grad() {
    for (auto& [_, t] : entries_) t.zero_grad();
  }

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 private:
  std::vector<std::pair<std::string, Tensor<Scalar>>> entries_;
};

using TensorD = Tensor<double>;
using TensorF = Tensor<float>;

}  // namespace densattn

#endif  // DENSATTN_TENSOR_HPP
