#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "egoloc/numerics/ops.hpp"
#include "egoloc/numerics/tensor.hpp"

namespace egoloc::num {

/// A trainable tensor. `grad` accumulates across backward passes until cleared.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  void zero_grad() { grad = Tensor(value.shape(), 0.0); }
};

using NodeId = int;

/// Tape of operations recorded in evaluation order. Values are computed
/// eagerly when a node is added, so the tape is always a topologically
/// sorted DAG.
class Graph {
 public:
  NodeId constant(Tensor value);
  NodeId param(Parameter& p);
  NodeId op(OpKind kind, std::vector<NodeId> inputs, OpAttrs attrs = {});

  NodeId add(NodeId a, NodeId b) { return op(OpKind::kAdd, {a, b}); }
  NodeId mul_scalar(NodeId a, double s);
  NodeId matmul(NodeId a, NodeId b, bool trans_a = false, bool trans_b = false);
  NodeId affine(NodeId x, NodeId w, NodeId bias);
  NodeId conv1d(NodeId x, NodeId w, std::optional<NodeId> bias, int stride, int pad);
  NodeId conv3d(NodeId x, NodeId w, std::optional<NodeId> bias, std::array<int, 3> dilation,
                std::array<int, 3> pad);
  NodeId relu(NodeId x) { return op(OpKind::kRelu, {x}); }
  NodeId maxpool(NodeId x, int axis);
  NodeId meanpool(NodeId x, int axis);
  NodeId concat(std::vector<NodeId> xs, int axis);
  NodeId softmax(NodeId x, int axis);
  NodeId l2_normalize(NodeId x, int axis);
  NodeId cross_entropy(NodeId logits, std::vector<std::int64_t> targets, Reduction r = Reduction::kSum);
  NodeId broadcast(NodeId x, Shape shape);
  NodeId reshape(NodeId x, Shape shape);

  const Tensor& value(NodeId id) const;
  /// Gradient of the last backward pass, or nullptr if the node received none.
  const Tensor* grad(NodeId id) const;
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Reverse pass from a single-element loss. Parameter gradients are added
  /// to Parameter::grad (allocated on first use).
  void backward(NodeId loss);

  /// Test hook: every op of this kind reports a zero vector-Jacobian product.
  void inject_fault(OpKind kind) { fault_ = kind; }

 private:
  struct Node {
    bool is_op = false;
    OpKind kind = OpKind::kAdd;
    std::vector<NodeId> inputs;
    OpAttrs attrs;
    Tensor value;
    Tensor grad;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };

  const Node& node(NodeId id) const;

  std::deque<Node> nodes_;  // stable references across push_back
  std::optional<OpKind> fault_;
};

}  // namespace egoloc::num
