#include "egoloc/numerics/graph.hpp"

#include <memory>
#include <string>

#include "egoloc/error.hpp"

namespace egoloc::num {

const Graph::Node& Graph::node(NodeId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
    throw InvalidArgument("graph: node id " + std::to_string(id) + " out of range");
  }
  return nodes_[static_cast<std::size_t>(id)];
}

NodeId Graph::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Graph::param(Parameter& p) {
  Node n;
  n.value = p.value;
  n.param = &p;
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Graph::op(OpKind kind, std::vector<NodeId> inputs, OpAttrs attrs) {
  std::vector<const Tensor*> in;
  in.reserve(inputs.size());
  bool rg = false;
  for (NodeId id : inputs) {
    const Node& src = node(id);
    in.push_back(&src.value);
    rg = rg || src.requires_grad;
  }
  Node n;
  n.value = eval_op(kind, in, attrs);
  n.is_op = true;
  n.kind = kind;
  n.inputs = std::move(inputs);
  n.attrs = std::move(attrs);
  n.requires_grad = rg;
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Graph::mul_scalar(NodeId a, double s) {
  OpAttrs at;
  at.scalar = s;
  return op(OpKind::kMulScalar, {a}, at);
}

NodeId Graph::matmul(NodeId a, NodeId b, bool trans_a, bool trans_b) {
  OpAttrs at;
  at.trans_a = trans_a;
  at.trans_b = trans_b;
  return op(OpKind::kMatmul, {a, b}, at);
}

NodeId Graph::affine(NodeId x, NodeId w, NodeId bias) { return op(OpKind::kMatmul, {x, w, bias}); }

NodeId Graph::conv1d(NodeId x, NodeId w, std::optional<NodeId> bias, int stride, int pad) {
  OpAttrs at;
  at.stride = stride;
  at.pad = pad;
  std::vector<NodeId> in{x, w};
  if (bias) in.push_back(*bias);
  return op(OpKind::kConv1d, std::move(in), at);
}

NodeId Graph::conv3d(NodeId x, NodeId w, std::optional<NodeId> bias, std::array<int, 3> dilation,
                     std::array<int, 3> pad) {
  OpAttrs at;
  at.dilation3 = dilation;
  at.pad3 = pad;
  std::vector<NodeId> in{x, w};
  if (bias) in.push_back(*bias);
  return op(OpKind::kConv3d, std::move(in), at);
}

NodeId Graph::maxpool(NodeId x, int axis) {
  OpAttrs at;
  at.axis = axis;
  return op(OpKind::kMaxPool, {x}, at);
}

NodeId Graph::meanpool(NodeId x, int axis) {
  OpAttrs at;
  at.axis = axis;
  return op(OpKind::kMeanPool, {x}, at);
}

NodeId Graph::concat(std::vector<NodeId> xs, int axis) {
  OpAttrs at;
  at.axis = axis;
  return op(OpKind::kConcat, std::move(xs), at);
}

NodeId Graph::softmax(NodeId x, int axis) {
  OpAttrs at;
  at.axis = axis;
  return op(OpKind::kSoftmax, {x}, at);
}

NodeId Graph::l2_normalize(NodeId x, int axis) {
  OpAttrs at;
  at.axis = axis;
  return op(OpKind::kL2Normalize, {x}, at);
}

NodeId Graph::cross_entropy(NodeId logits, std::vector<std::int64_t> targets, Reduction r) {
  OpAttrs at;
  at.targets = std::move(targets);
  at.reduction = r;
  return op(OpKind::kCrossEntropy, {logits}, at);
}

NodeId Graph::broadcast(NodeId x, Shape shape) {
  OpAttrs at;
  at.shape = std::move(shape);
  return op(OpKind::kBroadcast, {x}, at);
}

NodeId Graph::reshape(NodeId x, Shape shape) {
  OpAttrs at;
  at.shape = std::move(shape);
  return op(OpKind::kReshape, {x}, at);
}

const Tensor& Graph::value(NodeId id) const { return node(id).value; }

const Tensor* Graph::grad(NodeId id) const {
  const Node& n = node(id);
  return n.grad.empty() ? nullptr : &n.grad;
}

void Graph::backward(NodeId loss) {
  const Node& ln = node(loss);
  if (ln.value.size() != 1) {
    throw InvalidArgument("backward: loss must be a single element, got shape " + to_string(ln.value.shape()));
  }
  for (auto& n : nodes_) n.grad = Tensor();
  nodes_[static_cast<std::size_t>(loss)].grad = Tensor(ln.value.shape(), 1.0);

  for (NodeId id = loss; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.empty() || !n.requires_grad) continue;
    if (!n.is_op) {
      if (n.param != nullptr) {
        if (n.param->grad.shape() != n.param->value.shape()) n.param->zero_grad();
        auto dst = n.param->grad.data();
        auto src = n.grad.data();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
      }
      continue;
    }
    std::vector<const Tensor*> in;
    std::vector<char> need_storage;
    for (NodeId src : n.inputs) {
      const Node& s = nodes_[static_cast<std::size_t>(src)];
      in.push_back(&s.value);
      need_storage.push_back(s.requires_grad ? 1 : 0);
    }
    auto need = std::make_unique<bool[]>(need_storage.size());
    for (std::size_t i = 0; i < need_storage.size(); ++i) need[i] = need_storage[i] != 0;
    auto grads = op_backward(n.kind, in, n.value, n.grad, n.attrs, std::span<const bool>(need.get(), need_storage.size()));
    if (fault_ && *fault_ == n.kind) {
      for (auto& g : grads) {
        if (!g.empty()) g.fill(0.0);
      }
    }
    for (std::size_t i = 0; i < n.inputs.size(); ++i) {
      if (!need[i]) continue;
      Node& s = nodes_[static_cast<std::size_t>(n.inputs[i])];
      if (s.grad.empty()) {
        s.grad = std::move(grads[i]);
      } else {
        auto dst = s.grad.data();
        auto src = grads[i].data();
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
      }
    }
    // intermediate gradients are no longer needed
    n.grad = Tensor();
    if (id == loss) n.grad = Tensor(ln.value.shape(), 1.0);
  }
}

}  // namespace egoloc::num
