#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "pvg/core/tensor.hpp"

namespace pvg {

namespace detail {
inline bool& grad_mode_flag() {
  thread_local bool enabled = true;
  return enabled;
}
}  // namespace detail

// Disables graph recording for the lifetime of the guard.
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

template <typename Scalar>
struct Node {
  Tensor<Scalar> value;
  Tensor<Scalar> grad;  // empty until the first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  Tensor<Scalar>& grad_buffer() {
    if (grad.empty()) grad = Tensor<Scalar>(value.shape());
    return grad;
  }
};

// Handle to a node in the reverse-mode tape. Copies share the node.
template <typename Scalar>
class Var {
 public:
  using NodePtr = std::shared_ptr<Node<Scalar>>;

  Var() = default;
  // NOLINTNEXTLINE(google-explicit-constructor): constants convert implicitly.
  Var(Tensor<Scalar> value, bool requires_grad = false) : node_(std::make_shared<Node<Scalar>>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }

  const Tensor<Scalar>& value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  Index dim(Index axis) const { return node_->value.dim(axis); }
  bool requires_grad() const { return node_->requires_grad; }

  // Accumulated gradient; zeros when nothing flowed into this variable.
  Tensor<Scalar> grad() const {
    return node_->grad.empty() ? Tensor<Scalar>(node_->value.shape()) : node_->grad;
  }
  bool has_grad() const { return !node_->grad.empty(); }
  void zero_grad() { node_->grad = Tensor<Scalar>(); }

  const NodePtr& node() const { return node_; }
  bool valid() const { return static_cast<bool>(node_); }

  static Var leaf(Tensor<Scalar> value) { return Var(std::move(value), true); }

 private:
  NodePtr node_;
};

// Builds the result node of an op. The backward closure is recorded only when
// grad mode is on and some parent requires a gradient.
template <typename Scalar>
Var<Scalar> make_result(Tensor<Scalar> value, std::vector<Var<Scalar>> parents,
                        std::function<void(Node<Scalar>&)> backward, const char* op_name) {
  value.check_finite(op_name);
  Var<Scalar> out(std::move(value));
  if (!grad_enabled()) return out;
  bool any = false;
  for (const auto& p : parents) any = any || p.requires_grad();
  if (!any) return out;
  auto& node = *out.node();
  node.requires_grad = true;
  node.parents.reserve(parents.size());
  for (auto& p : parents) node.parents.push_back(p.node());
  node.backward = std::move(backward);
  return out;
}

// Adds `g` into the gradient of `parent` when it takes part in differentiation.
// `g` is either a flat column of the parent's size or a matrix of its 2-D view.
template <typename Scalar, typename Derived>
void accumulate(Node<Scalar>& parent, const Eigen::MatrixBase<Derived>& g) {
  if (!parent.requires_grad) return;
  auto& buf = parent.grad_buffer();
  if (g.cols() == 1 && g.rows() == buf.size()) {
    buf.data() += g;
  } else {
    if (g.rows() != buf.rows() || g.cols() != buf.cols()) throw DimensionError("gradient shape mismatch");
    buf.matrix() += g;
  }
}

// Reverse sweep from `root`. A non-scalar root is seeded with `seed`, or ones.
template <typename Scalar>
void backward(const Var<Scalar>& root, const Tensor<Scalar>* seed = nullptr) {
  if (!root.requires_grad()) return;
  std::vector<Node<Scalar>*> order;
  std::unordered_set<Node<Scalar>*> visited;
  std::vector<std::pair<Node<Scalar>*, std::size_t>> stack{{root.node().get(), 0}};
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<Scalar>* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  auto& root_grad = root.node()->grad_buffer();
  if (seed) {
    if (seed->shape() != root_grad.shape()) throw DimensionError("backward seed shape mismatch");
    root_grad.data() += seed->data();
  } else {
    root_grad.data().array() += Scalar(1);
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<Scalar>* node = *it;
    if (node->backward && !node->grad.empty()) node->backward(*node);
  }
}

}  // namespace pvg
