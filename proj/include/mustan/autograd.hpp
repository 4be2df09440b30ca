#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "mustan/tensor.hpp"

namespace mustan {

// A value in the computation graph. Non-leaf nodes keep their inputs and a
// closure that pushes `grad` into the inputs' gradients. The closure receives
// the node itself so it never has to capture it (no reference cycles).
template <typename Scalar>
struct Node {
  Tensor<Scalar> value;
  Tensor<Scalar> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;

  Tensor<Scalar>& grad_buffer() {
    if (grad.shape() != value.shape()) grad = Tensor<Scalar>(value.shape());
    return grad;
  }
  bool has_grad() const { return !grad.empty() && grad.shape() == value.shape(); }
  void zero_grad() { grad = Tensor<Scalar>(); }
};

template <typename Scalar>
using Var = std::shared_ptr<Node<Scalar>>;

namespace detail {
inline bool& grad_mode_flag() {
  thread_local bool enabled = true;
  return enabled;
}
}  // namespace detail

inline bool grad_enabled() { return detail::grad_mode_flag(); }

// Disables graph recording for the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_mode_flag()) { detail::grad_mode_flag() = false; }
  ~NoGradGuard() { detail::grad_mode_flag() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

template <typename Scalar>
Var<Scalar> constant(Tensor<Scalar> value) {
  auto node = std::make_shared<Node<Scalar>>();
  node->value = std::move(value);
  return node;
}

template <typename Scalar>
Var<Scalar> leaf(Tensor<Scalar> value) {
  auto node = constant(std::move(value));
  node->requires_grad = true;
  return node;
}

// Wraps an op result; records the graph edge only if some input needs it.
template <typename Scalar, typename Backward>
Var<Scalar> make_result(Tensor<Scalar> value, std::vector<Var<Scalar>> inputs,
                        Backward&& backward) {
  auto node = constant(std::move(value));
  if (!grad_enabled()) return node;
  const bool needs = std::any_of(inputs.begin(), inputs.end(),
                                 [](const Var<Scalar>& v) { return v && v->requires_grad; });
  if (!needs) return node;
  node->requires_grad = true;
  node->inputs = std::move(inputs);
  node->backward_fn = std::forward<Backward>(backward);
  return node;
}

template <typename Scalar>
void accumulate_grad(const Var<Scalar>& target, const Tensor<Scalar>& delta) {
  if (!target || !target->requires_grad) return;
  target->grad_buffer().array() += delta.array();
}

// Reverse-mode sweep from `root` seeded with d(objective)/d(root).
template <typename Scalar>
void backward(const Var<Scalar>& root, const Tensor<Scalar>& seed) {
  if (!root->requires_grad) return;
  if (seed.shape() != root->value.shape())
    throw ShapeError("backward seed shape " + seed.shape().str() + " != " +
                     root->value.shape().str());

  std::vector<Node<Scalar>*> order;
  std::unordered_set<Node<Scalar>*> visited;
  std::vector<std::pair<Node<Scalar>*, std::size_t>> stack{{root.get(), 0}};
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node<Scalar>* child = node->inputs[next++].get();
      if (child && child->requires_grad && visited.insert(child).second)
        stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->grad_buffer().array() += seed.array();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<Scalar>* node = *it;
    if (node->backward_fn && node->has_grad()) node->backward_fn(*node);
  }
  // Intermediate graph state is single-use.
  for (Node<Scalar>* node : order) {
    if (node->backward_fn) {
      node->backward_fn = nullptr;
      node->inputs.clear();
      node->grad = Tensor<Scalar>();
    }
  }
}

}  // namespace mustan
