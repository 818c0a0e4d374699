#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <unordered_set>
#include <vector>

#include "dseg/core/error.hpp"

namespace dseg::nn {

/// Dense row-major tensor. Activations are NCHW. `grad` is empty until a
/// backward pass touches it.
template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;
  std::vector<T> grad;

  Tensor() = default;
  explicit Tensor(std::vector<int> s, T fill = T{}) : shape(std::move(s)) { data.assign(numel(shape), fill); }
  Tensor(std::vector<int> s, std::vector<T> values) : shape(std::move(s)), data(std::move(values)) {
    if (data.size() != numel(shape)) throw shape_error("tensor data length does not match shape");
  }

  static std::size_t numel(const std::vector<int>& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1},
                           [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
  }
  [[nodiscard]] std::size_t size() const noexcept { return data.size(); }
  [[nodiscard]] int dim(std::size_t i) const { return shape.at(i); }
  [[nodiscard]] bool has_grad() const noexcept { return !grad.empty(); }
  T* grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), T{});
    return grad.data();
  }
  void zero_grad() { grad.assign(data.size(), T{}); }
};

inline std::string shape_str(const std::vector<int>& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + "]";
}

template <typename T>
struct Node;

template <typename T>
using Var = std::shared_ptr<Node<T>>;

/// Graph node: a value, its gradient, and how to push that gradient into
/// the parents. Nodes that need no gradient keep no parents.
template <typename T>
struct Node {
  Tensor<T> value;
  bool requires_grad = false;
  std::vector<Var<T>> parents;
  std::function<void(Node&)> backward_fn;

  [[nodiscard]] const std::vector<int>& shape() const noexcept { return value.shape; }
  [[nodiscard]] std::size_t size() const noexcept { return value.size(); }
};

template <typename T>
Var<T> leaf(Tensor<T> value, bool requires_grad = false) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  return n;
}

template <typename T>
Var<T> make_result(Tensor<T> value, std::vector<Var<T>> parents, std::function<void(Node<T>&)> fn) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  for (const auto& p : parents) n->requires_grad = n->requires_grad || p->requires_grad;
  if (n->requires_grad) {
    n->parents = std::move(parents);
    n->backward_fn = std::move(fn);
  }
  return n;
}

/// Reverse-mode sweep from a scalar root (seed gradient 1). Gradients
/// accumulate into every reachable node's `value.grad`.
template <typename T>
void backward(const Var<T>& root) {
  if (root->size() != 1) throw shape_error("backward: root must be a scalar, got " + shape_str(root->shape()));
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{root.get(), 0}};
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root->value.grad_buffer()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward_fn && n->value.has_grad()) n->backward_fn(*n);
  }
}

}  // namespace dseg::nn
