#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "cad/ad/tensor.hpp"

namespace cad::ad {

namespace detail {
#ifdef NDEBUG
inline std::atomic<bool> g_check_finite{false};
#else
inline std::atomic<bool> g_check_finite{true};
#endif
}  // namespace detail

// NaN/Inf tripwire evaluated after every op. On by default in debug builds.
inline void set_finite_check(bool enabled) { detail::g_check_finite.store(enabled); }
inline bool finite_check_enabled() { return detail::g_check_finite.load(); }

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into the inputs' grads.
  std::function<void(Node&)> backward_fn;
  bool requires_grad = false;
  const char* op = "leaf";

  Tensor<T>& grad_buffer() {
    if (grad.size() != value.size()) grad = Tensor<T>(value.shape(), T(0));
    return grad;
  }
  bool has_grad() const { return grad.size() == value.size() && value.size() > 0; }
};

// Handle to a node in a dynamically built computation graph.
template <typename T>
class Var {
 public:
  using Scalar = T;

  Var() = default;
  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  const Tensor<T>& value() const { return node_->value; }
  Tensor<T>& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  Index dim(Index i) const { return node_->value.dim(i); }
  Index size() const { return node_->value.size(); }
  bool requires_grad() const { return node_->requires_grad; }

  // Gradient accumulated by backward(); zeros if nothing flowed here.
  Tensor<T>& grad() { return node_->grad_buffer(); }
  void zero_grad() {
    if (node_->has_grad()) node_->grad.array().setZero();
  }

  T item() const { return node_->value.item(); }
  Node<T>* node() const { return node_.get(); }
  const std::shared_ptr<Node<T>>& shared() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

 private:
  std::shared_ptr<Node<T>> node_;
};

template <typename T>
Var<T> constant(Tensor<T> value) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  return Var<T>(std::move(n));
}

template <typename T>
Var<T> leaf(Tensor<T> value) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->requires_grad = true;
  return Var<T>(std::move(n));
}

namespace detail {

template <typename T>
void check_finite(const Tensor<T>& t, const char* op) {
  if (finite_check_enabled() && !t.all_finite()) {
    fail(ErrorCode::Numerical, std::string("non-finite value produced by ") + op);
  }
}

}  // namespace detail

// Records an op. The backward closure is kept only when some input needs a
// gradient, so inference graphs hold no tape.
template <typename T, typename Backward>
Var<T> make_op(const char* op, Tensor<T> value, std::vector<Var<T>> inputs, Backward&& backward) {
  detail::check_finite(value, op);
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->op = op;
  for (const Var<T>& in : inputs) n->requires_grad = n->requires_grad || in.requires_grad();
  if (n->requires_grad) {
    n->inputs.reserve(inputs.size());
    for (const Var<T>& in : inputs) n->inputs.push_back(in.shared());
    n->backward_fn = std::forward<Backward>(backward);
  }
  return Var<T>(std::move(n));
}

// Reverse sweep from a scalar output, accumulating into every reachable
// node that requires a gradient.
template <typename T>
void backward(const Var<T>& output) {
  if (output.size() != 1) {
    fail(ErrorCode::ShapeMismatch, "backward() needs a scalar output, got " + shape_str(output.shape()));
  }
  if (!output.requires_grad()) return;

  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> visited;
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{output.node(), 0}};
  visited.insert(output.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node<T>* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.push_back({child, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  output.node()->grad_buffer().array() += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = *it;
    if (node->backward_fn && node->has_grad()) node->backward_fn(*node);
  }
}

}  // namespace cad::ad
