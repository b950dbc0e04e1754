#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "disguise/errors.hpp"
#include "disguise/ops.hpp"
#include "disguise/tensor.hpp"

namespace disguise {

struct NodeId {
  std::size_t index = 0;
};

// Append-only computation graph over the closed primitive set. Nodes are
// created in topological order, so backward is a single reverse sweep.
template <typename T>
class Graph {
 public:
  /// Leaf that does not receive a gradient (weights during forging, targets).
  NodeId constant(Tensor<T> value) { return push_leaf(std::move(value), false); }

  /// Leaf whose gradient is produced by backward().
  NodeId variable(Tensor<T> value) { return push_leaf(std::move(value), true); }

  NodeId conv2d(NodeId x, NodeId kernel, NodeId bias, int stride) {
    OpAttrs a;
    a.stride = stride;
    return push(OpKind::conv2d, {x, kernel, bias}, std::move(a));
  }
  NodeId upsample2(NodeId x) { return push(OpKind::upsample2, {x}); }
  NodeId add(NodeId a, NodeId b) { return push(OpKind::add, {a, b}); }
  NodeId sub(NodeId a, NodeId b) { return push(OpKind::sub, {a, b}); }
  NodeId mul(NodeId a, NodeId b) { return push(OpKind::mul, {a, b}); }
  NodeId div(NodeId a, NodeId b) { return push(OpKind::div, {a, b}); }
  NodeId scalar_mul(NodeId x, double s) { return push_scalar(OpKind::scalar_mul, x, s); }
  NodeId add_scalar(NodeId x, double s) { return push_scalar(OpKind::add_scalar, x, s); }
  NodeId tanh(NodeId x) { return push(OpKind::tanh, {x}); }
  NodeId sigmoid(NodeId x) { return push(OpKind::sigmoid, {x}); }
  NodeId abs(NodeId x) { return push(OpKind::abs, {x}); }
  NodeId square(NodeId x) { return push(OpKind::square, {x}); }
  NodeId sqrt_eps(NodeId x) { return push(OpKind::sqrt_eps, {x}); }
  NodeId pow_floor(NodeId x, double exponent, double floor) {
    OpAttrs a;
    a.scalar = exponent;
    a.floor = floor;
    return push(OpKind::pow_floor, {x}, std::move(a));
  }
  NodeId mean(NodeId x) { return push(OpKind::mean_reduce, {x}); }
  NodeId sum(NodeId x) { return push(OpKind::sum_reduce, {x}); }
  NodeId mean_hw(NodeId x) { return push(OpKind::mean_hw, {x}); }
  NodeId gaussian_blur(NodeId x, std::vector<double> kernel, BlurPadding padding) {
    OpAttrs a;
    a.kernel = std::move(kernel);
    a.padding = padding;
    return push(OpKind::gaussian_blur, {x}, std::move(a));
  }
  NodeId downsample_avg2(NodeId x) { return push(OpKind::downsample_avg2, {x}); }
  NodeId hflip(NodeId x) { return push(OpKind::hflip, {x}); }
  NodeId clamp01(NodeId x) { return push(OpKind::clamp01, {x}); }

  const Tensor<T>& value(NodeId id) const { return nodes_.at(id.index).value; }
  T scalar(NodeId id) const {
    const auto& v = value(id);
    if (!v.shape().is_scalar()) throw ContractError("node is not scalar: " + v.shape().str());
    return v[0];
  }

  /// Gradient of the last backward() root with respect to `id`. Zero-filled
  /// for nodes that do not depend on a variable.
  const Tensor<T>& grad(NodeId id) const { return nodes_.at(id.index).grad; }
  bool requires_grad(NodeId id) const { return nodes_.at(id.index).needs_grad; }
  OpKind kind(NodeId id) const { return nodes_.at(id.index).kind; }
  std::size_t size() const noexcept { return nodes_.size(); }

  void backward(NodeId root) {
    const Node& r = nodes_.at(root.index);
    if (!r.value.shape().is_scalar())
      throw ContractError("backward: root must be scalar, got " + r.value.shape().str());
    for (auto& n : nodes_) n.grad = Tensor<T>(n.value.shape());
    nodes_[root.index].grad[0] = T{1};
    for (std::size_t i = root.index + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.kind == OpKind::leaf || !n.needs_grad) continue;
      std::array<const Tensor<T>*, 3> in{};
      std::array<Tensor<T>*, 3> g{};
      for (int k = 0; k < n.arity; ++k) {
        Node& p = nodes_[n.parents[k]];
        in[k] = &p.value;
        g[k] = p.needs_grad ? &p.grad : nullptr;
      }
      const auto arity = static_cast<std::size_t>(n.arity);
      primitive_vjp<T>(n.kind, std::span<const Tensor<T>* const>(in.data(), arity), n.value, n.grad,
                       n.attrs, std::span<Tensor<T>* const>(g.data(), arity));
    }
  }

 private:
  struct Node {
    OpKind kind = OpKind::leaf;
    std::array<std::size_t, 3> parents{};
    int arity = 0;
    OpAttrs attrs;
    Tensor<T> value;
    Tensor<T> grad;
    bool needs_grad = false;
  };

  NodeId push_leaf(Tensor<T> value, bool needs_grad) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    nodes_.push_back(std::move(n));
    return NodeId{nodes_.size() - 1};
  }

  NodeId push_scalar(OpKind kind, NodeId x, double s) {
    OpAttrs a;
    a.scalar = s;
    return push(kind, {x}, std::move(a));
  }

  NodeId push(OpKind kind, std::initializer_list<NodeId> parents, OpAttrs attrs = {}) {
    Node n;
    n.kind = kind;
    n.arity = static_cast<int>(parents.size());
    std::array<const Tensor<T>*, 3> in{};
    int k = 0;
    for (NodeId p : parents) {
      if (p.index >= nodes_.size()) throw ContractError("graph: dangling parent node");
      n.parents[k] = p.index;
      in[k] = &nodes_[p.index].value;
      n.needs_grad = n.needs_grad || nodes_[p.index].needs_grad;
      ++k;
    }
    n.value = primitive_forward<T>(kind, std::span<const Tensor<T>* const>(in.data(), parents.size()), attrs);
    n.attrs = std::move(attrs);
    nodes_.push_back(std::move(n));
    return NodeId{nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
};

}  // namespace disguise
