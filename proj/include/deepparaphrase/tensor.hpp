#pragma once

// Dense float64 tensors with a recorded reverse-mode gradient tape.
//
// A Tensor is a cheap handle onto a shared node. Leaf tensors created with
// requires_grad=true act as parameters: backward() accumulates into their
// grad slot until clear_grad() is called. Every op result that depends on a
// parameter records a backward closure and keeps its inputs alive, so the
// graph lives exactly as long as the loss handle that roots it.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "deepparaphrase/errors.hpp"

namespace dpp {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a backward pass touches the node
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;  // set only on recorded op results

  bool recorded() const { return static_cast<bool>(backward); }

  std::vector<double>& ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

inline bool& grad_disabled_flag() {
  thread_local bool disabled = false;
  return disabled;
}

}  // namespace detail

// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_disabled_flag()) { detail::grad_disabled_flag() = true; }
  ~NoGradGuard() { detail::grad_disabled_flag() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    std::vector<double> values(shape_size(shape), 0.0);
    return from(std::move(shape), std::move(values), requires_grad);
  }

  static Tensor filled(Shape shape, double value, bool requires_grad = false) {
    std::vector<double> values(shape_size(shape), value);
    return from(std::move(shape), std::move(values), requires_grad);
  }

  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false) {
    for (std::size_t extent : shape) {
      if (extent == 0) throw ShapeError("tensor extents must be positive, got " + shape_string(shape));
    }
    if (shape.empty()) throw ShapeError("tensor needs at least one axis");
    if (shape_size(shape) != values.size()) {
      throw ShapeError("shape " + shape_string(shape) + " holds " + std::to_string(shape_size(shape)) +
                       " values, got " + std::to_string(values.size()));
    }
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
  }

  static Tensor vector(std::vector<double> values, bool requires_grad = false) {
    Shape shape{values.size()};
    return from(std::move(shape), std::move(values), requires_grad);
  }

  static Tensor scalar(double value, bool requires_grad = false) { return from({1}, {value}, requires_grad); }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t size() const { return node_->value.size(); }

  std::span<const double> values() const& { return node_->value; }
  // On a temporary, returns a copy so range-for over f().values() is safe.
  std::vector<double> values() && { return node_->value; }
  // Direct write access; only valid on leaves outside of a live graph.
  std::span<double> mutable_values() { return node_->value; }
  double item() const {
    if (size() != 1) throw ShapeError("item() on tensor of shape " + shape_string(shape()));
    return node_->value[0];
  }
  double operator[](std::size_t i) const { return node_->value[i]; }
  double at(std::size_t r, std::size_t c) const { return node_->value[r * node_->shape[1] + c]; }

  bool requires_grad() const { return node_->requires_grad; }
  bool is_leaf() const { return !node_->recorded(); }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const double> grad() const& { return node_->grad; }
  std::vector<double> grad() && { return node_->grad; }
  std::span<double> mutable_grad() { return node_->ensure_grad(); }
  void clear_grad() { node_->grad.clear(); }

  // Deep copy of the values as a fresh leaf.
  Tensor detach(bool requires_grad = false) const { return from(shape(), node_->value, requires_grad); }

  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  friend Tensor make_result(Shape, std::vector<double>, std::vector<Tensor>, std::function<void(detail::Node&)>);

  std::shared_ptr<detail::Node> node_;
};

// Creates an op result. The backward closure receives the result node, whose
// grad holds dL/d(result); it must add into parents that require grad.
inline Tensor make_result(Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
                          std::function<void(detail::Node&)> backward) {
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  bool track = !detail::grad_disabled_flag() &&
               std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
  if (track) {
    node->requires_grad = true;
    node->parents.reserve(inputs.size());
    for (auto& in : inputs) node->parents.push_back(in.node());
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

// Reverse-mode pass from a scalar loss. Parameter grads accumulate across
// calls; intermediate grads are reset at the start of every pass.
inline void backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) throw ShapeError("backward() needs a scalar loss");
  if (loss.is_leaf()) throw ShapeError("backward() on a tensor that was not produced by a recorded computation");

  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{loss.node().get(), 0}};
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (detail::Node* node : order) {
    if (node->recorded()) node->grad.assign(node->value.size(), 0.0);
  }
  loss.node()->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (!node->recorded()) continue;
    for (auto& parent : node->parents) {
      if (parent->requires_grad) parent->ensure_grad();
    }
    node->backward(*node);
  }
}

}  // namespace dpp
