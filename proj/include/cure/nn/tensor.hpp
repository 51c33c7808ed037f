// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace cure::nn {

using Shape = std::vector<std::size_t>;

std::size_t numel_of(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Monotonic per-thread creation counter. Creation order is a topological
/// order of the graph, so backward just walks ids in descending order.
std::uint64_t next_node_id();

/// Thread-local switch; while disabled, ops never record graph edges.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

template <typename T>
struct Node {
  std::uint64_t id = next_node_id();
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // empty until first accumulation
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into inputs' grads.
  std::function<void(Node&)> backward;

  std::vector<T>& ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), T(0));
    return grad;
  }
};

/// Dense row-major tensor handle. Copies share the underlying node; use
/// `detach()` for a value copy outside the graph.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T v, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<T> values, bool requires_grad = false);
  static Tensor scalar(T v, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t dim() const { return node_->shape.size(); }
  std::size_t size(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t numel() const { return node_->value.size(); }
  /// Leading extent for 2-D tensors; 1 for vectors.
  std::size_t rows() const { return dim() == 2 ? node_->shape[0] : 1; }
  /// Trailing extent.
  std::size_t cols() const { return node_->shape.back(); }

  std::span<T> values() { return node_->value; }
  std::span<const T> values() const { return node_->value; }
  T operator[](std::size_t i) const { return node_->value[i]; }
  T item() const;

  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> mutable_grad() { return node_->ensure_grad(); }
  void zero_grad() { node_->grad.clear(); }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }

  /// Seeds d(self)/d(self) = 1 (self must be a scalar) and back-propagates
  /// to every reachable tensor that requires grad.
  void backward() const;

  Tensor detach() const;

  const std::shared_ptr<Node<T>>& node() const { return node_; }
  const char* op() const { return node_->op; }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Builds a result node. When grad is enabled and any input requires grad,
/// the node keeps its inputs and backward closure; otherwise it is a leaf.
template <typename T>
Tensor<T> make_result(const char* op, Shape shape, std::vector<T> value,
                      std::vector<std::shared_ptr<Node<T>>> inputs,
                      std::function<void(Node<T>&)> backward);

/// Accumulates `g` into `node`'s grad if it participates in autodiff.
template <typename T>
inline void accumulate(Node<T>& node, std::span<const T> g) {
  if (!node.requires_grad) return;
  auto& dst = node.ensure_grad();
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

using Tensorf = Tensor<float>;
using Tensord = Tensor<double>;

}  // namespace cure::nn
