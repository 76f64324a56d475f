#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "egoloc/numerics/tensor.hpp"

namespace egoloc::num {

/// Closed catalog of differentiable operations.
///
/// Layout conventions (all row-major, channels last):
///   matmul        a [m,k] (or [k,m] with trans_a), b [k,n] (or [n,k] with trans_b),
///                 optional bias [n]                                  -> [m,n]
///                 a untransposed may be [...,k]; leading dims flatten -> [...,n]
///   conv1d        x [B,L,Cin], w [K,Cin,Cout], optional bias [Cout]  -> [B,Lout,Cout]
///   conv3d        x [B,D1,D2,D3,Cin], w [K1,K2,K3,Cin,Cout], optional bias [Cout]
///                 (stride 1, per-axis dilation and zero padding)      -> [B,O1,O2,O3,Cout]
///   add           a, b where b broadcasts against a's trailing dims   -> shape(a)
///   maxpool/meanpool reduce `axis` away
///   cross_entropy logits [N,K] with integer targets                   -> [1]
enum class OpKind {
  kAdd,
  kMulScalar,
  kMatmul,
  kConv1d,
  kConv3d,
  kRelu,
  kMaxPool,
  kMeanPool,
  kConcat,
  kSoftmax,
  kL2Normalize,
  kCrossEntropy,
  kBroadcast,
  kReshape,
};

enum class Reduction { kSum, kMean };

struct OpAttrs {
  double scalar = 1.0;
  int axis = 0;
  bool trans_a = false;
  bool trans_b = false;
  int stride = 1;
  int pad = 0;
  std::array<int, 3> dilation3{1, 1, 1};
  std::array<int, 3> pad3{0, 0, 0};
  Shape shape;
  std::vector<std::int64_t> targets;
  Reduction reduction = Reduction::kSum;
};

/// Inputs with a norm below this are mapped to zero by l2_normalize.
inline constexpr double kNormalizeFloor = 1e-12;

std::string_view op_name(OpKind kind);
/// Parses an op id; throws InvalidArgument for unknown ids.
OpKind op_from_name(std::string_view name);

/// Forward evaluation. Throws ShapeError naming the op and shapes on mismatch.
Tensor eval_op(OpKind kind, std::span<const Tensor* const> inputs, const OpAttrs& attrs);
Tensor eval_op(std::string_view op_id, std::span<const Tensor* const> inputs, const OpAttrs& attrs);

/// Vector-Jacobian product. Returns one gradient per input; entries whose
/// `needs_grad` flag is false are left empty.
std::vector<Tensor> op_backward(OpKind kind, std::span<const Tensor* const> inputs,
                                const Tensor& output, const Tensor& grad_output,
                                const OpAttrs& attrs, std::span<const bool> needs_grad);

}  // namespace egoloc::num
