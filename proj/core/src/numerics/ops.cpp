#include "egoloc/numerics/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>

#include "egoloc/error.hpp"

namespace egoloc::num {
namespace {

using MatMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using RowVec = Eigen::Map<Eigen::Matrix<double, 1, Eigen::Dynamic>>;

MatMap as_mat(Tensor& t, std::int64_t rows, std::int64_t cols) { return MatMap(t.ptr(), rows, cols); }
ConstMatMap as_mat(const Tensor& t, std::int64_t rows, std::int64_t cols) {
  return ConstMatMap(t.ptr(), rows, cols);
}

[[noreturn]] void shape_fail(OpKind kind, std::span<const Tensor* const> in, const std::string& why) {
  std::string msg = "op " + std::string(op_name(kind)) + ": " + why + " (input shapes";
  for (const auto* t : in) msg += " " + to_string(t->shape());
  msg += ")";
  throw ShapeError(msg);
}

void require_arity(OpKind kind, std::span<const Tensor* const> in, std::size_t lo, std::size_t hi) {
  if (in.size() < lo || in.size() > hi) {
    shape_fail(kind, in, "expected " + std::to_string(lo) + (lo == hi ? "" : ".." + std::to_string(hi)) +
                             " inputs, got " + std::to_string(in.size()));
  }
}

int norm_axis(OpKind kind, std::span<const Tensor* const> in, int axis, int rank) {
  int a = axis < 0 ? axis + rank : axis;
  if (a < 0 || a >= rank) shape_fail(kind, in, "axis " + std::to_string(axis) + " out of range");
  return a;
}

struct AxisSplit {
  std::int64_t outer = 1, n = 1, inner = 1;
};

AxisSplit split_at(const Shape& s, int axis) {
  AxisSplit r;
  for (int i = 0; i < axis; ++i) r.outer *= s[i];
  r.n = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

// True when `small` broadcasts against `big` under trailing alignment.
bool broadcastable(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  std::size_t off = big.size() - small.size();
  for (std::size_t i = 0; i < small.size(); ++i) {
    if (small[i] != 1 && small[i] != big[off + i]) return false;
  }
  return true;
}

// Calls fn(out_index, in_index) for every element of an output of shape `out`
// that reads from an input of shape `in` broadcast against it.
template <typename Fn>
void for_each_broadcast(const Shape& out, const Shape& in, Fn&& fn) {
  const std::size_t rank = out.size();
  std::vector<std::int64_t> in_stride(rank, 0);
  {
    std::int64_t stride = 1;
    std::size_t off = rank - in.size();
    for (std::size_t i = rank; i-- > 0;) {
      if (i >= off) {
        std::int64_t d = in[i - off];
        in_stride[i] = d == 1 ? 0 : stride;
        stride *= d;
      }
    }
  }
  const std::int64_t total = numel(out);
  if (rank == 0 || total == 0) return;
  const std::int64_t last = out[rank - 1];
  const std::int64_t last_stride = in_stride[rank - 1];
  std::vector<std::int64_t> idx(rank, 0);
  std::int64_t in_base = 0;
  for (std::int64_t o = 0; o < total; o += last) {
    for (std::int64_t j = 0; j < last; ++j) fn(o + j, in_base + j * last_stride);
    for (std::size_t d = rank - 1; d-- > 0;) {
      ++idx[d];
      in_base += in_stride[d];
      if (idx[d] < out[d]) break;
      in_base -= in_stride[d] * idx[d];
      idx[d] = 0;
    }
  }
}

Tensor reduce_to(const Tensor& g, const Shape& target) {
  Tensor r(target, 0.0);
  const auto n = r.size();
  if (n == g.size()) {
    std::copy(g.data().begin(), g.data().end(), r.data().begin());
    return r;
  }
  // fast path: target equals trailing dims of g
  std::size_t off = g.shape().size() - target.size();
  bool suffix = true;
  for (std::size_t i = 0; i < target.size(); ++i) suffix &= target[i] == g.shape()[off + i];
  if (suffix) {
    const double* gp = g.ptr();
    double* rp = r.ptr();
    for (std::int64_t i = 0; i < g.size(); i += n) {
      for (std::int64_t j = 0; j < n; ++j) rp[j] += gp[i + j];
    }
    return r;
  }
  double* rp = r.ptr();
  const double* gp = g.ptr();
  for_each_broadcast(g.shape(), target, [&](std::int64_t o, std::int64_t i) { rp[i] += gp[o]; });
  return r;
}

// ---- conv helpers -------------------------------------------------------

struct Conv1dGeom {
  std::int64_t B, L, Cin, K, Cout, Lout;
  int stride, pad;
};

Conv1dGeom conv1d_geom(OpKind kind, std::span<const Tensor* const> in, const OpAttrs& a) {
  require_arity(kind, in, 2, 3);
  const Tensor& x = *in[0];
  const Tensor& w = *in[1];
  if (x.rank() != 3 || w.rank() != 3 || x.dim(2) != w.dim(1)) shape_fail(kind, in, "expected x [B,L,Cin], w [K,Cin,Cout]");
  if (a.stride < 1 || a.pad < 0) shape_fail(kind, in, "invalid stride/pad");
  if (in.size() == 3 && (in[2]->rank() != 1 || in[2]->dim(0) != w.dim(2))) shape_fail(kind, in, "bias must be [Cout]");
  Conv1dGeom g{x.dim(0), x.dim(1), x.dim(2), w.dim(0), w.dim(2), 0, a.stride, a.pad};
  std::int64_t span = g.L + 2 * g.pad - g.K;
  if (span < 0) shape_fail(kind, in, "kernel larger than padded input");
  g.Lout = span / g.stride + 1;
  return g;
}

void im2col_1d(const Conv1dGeom& g, const double* x, double* col) {
  const std::int64_t cols = g.K * g.Cin;
  for (std::int64_t b = 0; b < g.B; ++b) {
    for (std::int64_t o = 0; o < g.Lout; ++o) {
      double* row = col + (b * g.Lout + o) * cols;
      for (std::int64_t k = 0; k < g.K; ++k) {
        std::int64_t pos = o * g.stride - g.pad + k;
        double* dst = row + k * g.Cin;
        if (pos < 0 || pos >= g.L) {
          std::fill(dst, dst + g.Cin, 0.0);
        } else {
          std::memcpy(dst, x + (b * g.L + pos) * g.Cin, sizeof(double) * g.Cin);
        }
      }
    }
  }
}

void col2im_1d(const Conv1dGeom& g, const double* col, double* dx) {
  const std::int64_t cols = g.K * g.Cin;
  for (std::int64_t b = 0; b < g.B; ++b) {
    for (std::int64_t o = 0; o < g.Lout; ++o) {
      const double* row = col + (b * g.Lout + o) * cols;
      for (std::int64_t k = 0; k < g.K; ++k) {
        std::int64_t pos = o * g.stride - g.pad + k;
        if (pos < 0 || pos >= g.L) continue;
        double* dst = dx + (b * g.L + pos) * g.Cin;
        const double* src = row + k * g.Cin;
        for (std::int64_t c = 0; c < g.Cin; ++c) dst[c] += src[c];
      }
    }
  }
}

struct Conv3dGeom {
  std::int64_t B, Cin, Cout;
  std::array<std::int64_t, 3> in, k, out;
  std::array<int, 3> dil, pad;
  std::int64_t positions() const { return B * out[0] * out[1] * out[2]; }
  std::int64_t taps() const { return k[0] * k[1] * k[2]; }
};

Conv3dGeom conv3d_geom(OpKind kind, std::span<const Tensor* const> in, const OpAttrs& a) {
  require_arity(kind, in, 2, 3);
  const Tensor& x = *in[0];
  const Tensor& w = *in[1];
  if (x.rank() != 5 || w.rank() != 5 || x.dim(4) != w.dim(3)) {
    shape_fail(kind, in, "expected x [B,D1,D2,D3,Cin], w [K1,K2,K3,Cin,Cout]");
  }
  if (in.size() == 3 && (in[2]->rank() != 1 || in[2]->dim(0) != w.dim(4))) shape_fail(kind, in, "bias must be [Cout]");
  Conv3dGeom g{};
  g.B = x.dim(0);
  g.Cin = x.dim(4);
  g.Cout = w.dim(4);
  g.dil = a.dilation3;
  g.pad = a.pad3;
  for (int i = 0; i < 3; ++i) {
    if (g.dil[i] < 1 || g.pad[i] < 0) shape_fail(kind, in, "invalid dilation/pad");
    g.in[i] = x.dim(1 + i);
    g.k[i] = w.dim(i);
    g.out[i] = g.in[i] + 2 * g.pad[i] - g.dil[i] * (g.k[i] - 1);
    if (g.out[i] < 1) shape_fail(kind, in, "dilated kernel larger than padded input");
  }
  return g;
}

// Convolution as a sum over taps of shifted GEMMs on a zero-padded copy of
// the input. Row r of the "virtual" output indexes padded position
// (b, q0, q1, q2); rows with q_i < out_i are the real outputs, and for every
// tap the input rows it reads are the contiguous block starting at r + offset.
struct Conv3dPlan {
  std::array<std::int64_t, 3> P;  // padded extents
  std::int64_t total;             // B * P0 * P1 * P2
  std::int64_t rows;              // virtual output rows
  std::vector<std::int64_t> offsets;

  std::int64_t row_of(std::int64_t b, std::int64_t o0, std::int64_t o1, std::int64_t o2) const {
    return ((b * P[0] + o0) * P[1] + o1) * P[2] + o2;
  }
};

Conv3dPlan conv3d_plan(const Conv3dGeom& g) {
  Conv3dPlan p{};
  for (int i = 0; i < 3; ++i) p.P[i] = g.in[i] + 2 * g.pad[i];
  p.total = g.B * p.P[0] * p.P[1] * p.P[2];
  for (std::int64_t k0 = 0; k0 < g.k[0]; ++k0) {
    for (std::int64_t k1 = 0; k1 < g.k[1]; ++k1) {
      for (std::int64_t k2 = 0; k2 < g.k[2]; ++k2) {
        p.offsets.push_back((k0 * g.dil[0] * p.P[1] + k1 * g.dil[1]) * p.P[2] + k2 * g.dil[2]);
      }
    }
  }
  p.rows = p.total - p.offsets.back();
  return p;
}

// Copies x into (kToPadded) or out of the interior of a padded buffer.
template <bool kToPadded>
void pad_copy(const Conv3dGeom& g, const Conv3dPlan& p, const double* src, double* dst) {
  const std::int64_t line = g.in[2] * g.Cin;
  for (std::int64_t b = 0; b < g.B; ++b) {
    for (std::int64_t i0 = 0; i0 < g.in[0]; ++i0) {
      for (std::int64_t i1 = 0; i1 < g.in[1]; ++i1) {
        const std::int64_t dense = ((b * g.in[0] + i0) * g.in[1] + i1) * line;
        const std::int64_t padded = p.row_of(b, i0 + g.pad[0], i1 + g.pad[1], g.pad[2]) * g.Cin;
        if constexpr (kToPadded) {
          std::memcpy(dst + padded, src + dense, sizeof(double) * line);
        } else {
          std::memcpy(dst + dense, src + padded, sizeof(double) * line);
        }
      }
    }
  }
}

// Copies real output rows between a dense [positions, Cout] tensor and the
// virtual row layout.
template <bool kToVirtual>
void virtual_copy(const Conv3dGeom& g, const Conv3dPlan& p, const double* src, double* dst) {
  const std::int64_t line = g.out[2] * g.Cout;
  for (std::int64_t b = 0; b < g.B; ++b) {
    for (std::int64_t o0 = 0; o0 < g.out[0]; ++o0) {
      for (std::int64_t o1 = 0; o1 < g.out[1]; ++o1) {
        const std::int64_t dense = ((b * g.out[0] + o0) * g.out[1] + o1) * line;
        const std::int64_t virt = p.row_of(b, o0, o1, 0) * g.Cout;
        if constexpr (kToVirtual) {
          std::memcpy(dst + virt, src + dense, sizeof(double) * line);
        } else {
          std::memcpy(dst + dense, src + virt, sizeof(double) * line);
        }
      }
    }
  }
}

void add_bias_rows(MatMap y, const Tensor& bias) {
  y.rowwise() += RowVec(const_cast<double*>(bias.ptr()), bias.size());
}

Tensor bias_grad(const Tensor& g, std::int64_t cout) {
  Tensor db(Shape{cout}, 0.0);
  const std::int64_t rows = g.size() / cout;
  const double* gp = g.ptr();
  for (std::int64_t r = 0; r < rows; ++r) {
    for (std::int64_t c = 0; c < cout; ++c) db[c] += gp[r * cout + c];
  }
  return db;
}

// ---- forward implementations -------------------------------------------

Tensor fwd_add(std::span<const Tensor* const> in) {
  require_arity(OpKind::kAdd, in, 2, 2);
  const Tensor& a = *in[0];
  const Tensor& b = *in[1];
  if (!broadcastable(b.shape(), a.shape())) shape_fail(OpKind::kAdd, in, "second operand does not broadcast");
  Tensor out = a;
  double* o = out.ptr();
  const double* bp = b.ptr();
  if (b.size() == a.size()) {
    for (std::int64_t i = 0; i < a.size(); ++i) o[i] += bp[i];
    return out;
  }
  std::size_t off = a.shape().size() - b.shape().size();
  bool suffix = true;
  for (std::size_t i = 0; i < b.shape().size(); ++i) suffix &= b.shape()[i] == a.shape()[off + i];
  if (suffix) {
    const std::int64_t n = b.size();
    for (std::int64_t i = 0; i < a.size(); i += n) {
      for (std::int64_t j = 0; j < n; ++j) o[i + j] += bp[j];
    }
    return out;
  }
  for_each_broadcast(a.shape(), b.shape(), [&](std::int64_t oi, std::int64_t bi) { o[oi] += bp[bi]; });
  return out;
}

struct MatmulDims {
  std::int64_t m, k, n;
};

MatmulDims matmul_dims(std::span<const Tensor* const> in, const OpAttrs& a) {
  require_arity(OpKind::kMatmul, in, 2, 3);
  const Tensor& A = *in[0];
  const Tensor& B = *in[1];
  if (B.rank() != 2 || A.rank() < 2 || (A.rank() > 2 && a.trans_a)) {
    shape_fail(OpKind::kMatmul, in, "operands must be rank 2 (a may carry leading dims when not transposed)");
  }
  MatmulDims d{};
  const std::int64_t last = A.dim(A.rank() - 1);
  d.m = a.trans_a ? A.dim(1) : A.size() / last;
  d.k = a.trans_a ? A.dim(0) : last;
  std::int64_t kb = a.trans_b ? B.dim(1) : B.dim(0);
  d.n = a.trans_b ? B.dim(0) : B.dim(1);
  if (d.k != kb) shape_fail(OpKind::kMatmul, in, "inner dimensions differ");
  if (in.size() == 3 && (in[2]->rank() != 1 || in[2]->dim(0) != d.n)) shape_fail(OpKind::kMatmul, in, "bias must be [n]");
  return d;
}

Tensor fwd_matmul(std::span<const Tensor* const> in, const OpAttrs& a) {
  auto d = matmul_dims(in, a);
  const Tensor& A = *in[0];
  const Tensor& B = *in[1];
  Shape os{d.m, d.n};
  if (A.rank() > 2) {
    os = A.shape();
    os.back() = d.n;
  }
  Tensor out(os, 0.0);
  auto Y = as_mat(out, d.m, d.n);
  auto Am = a.trans_a ? as_mat(A, A.dim(0), A.dim(1)) : as_mat(A, d.m, d.k);
  auto Bm = as_mat(B, B.dim(0), B.dim(1));
  if (!a.trans_a && !a.trans_b) Y.noalias() = Am * Bm;
  else if (a.trans_a && !a.trans_b) Y.noalias() = Am.transpose() * Bm;
  else if (!a.trans_a && a.trans_b) Y.noalias() = Am * Bm.transpose();
  else Y.noalias() = Am.transpose() * Bm.transpose();
  if (in.size() == 3) add_bias_rows(Y, *in[2]);
  return out;
}

Tensor fwd_conv1d(std::span<const Tensor* const> in, const OpAttrs& a) {
  auto g = conv1d_geom(OpKind::kConv1d, in, a);
  const std::int64_t rows = g.B * g.Lout, cols = g.K * g.Cin;
  std::vector<double> col(static_cast<std::size_t>(rows * cols));
  im2col_1d(g, in[0]->ptr(), col.data());
  Tensor out(Shape{g.B, g.Lout, g.Cout}, 0.0);
  auto Y = as_mat(out, rows, g.Cout);
  Y.noalias() = ConstMatMap(col.data(), rows, cols) * as_mat(*in[1], cols, g.Cout);
  if (in.size() == 3) add_bias_rows(Y, *in[2]);
  return out;
}

Tensor fwd_conv3d(std::span<const Tensor* const> in, const OpAttrs& a) {
  auto g = conv3d_geom(OpKind::kConv3d, in, a);
  auto p = conv3d_plan(g);
  std::vector<double> xp(static_cast<std::size_t>(p.total * g.Cin), 0.0);
  pad_copy<true>(g, p, in[0]->ptr(), xp.data());
  std::vector<double> yv(static_cast<std::size_t>(p.rows * g.Cout), 0.0);
  MatMap Y(yv.data(), p.rows, g.Cout);
  const double* w = in[1]->ptr();
  for (std::size_t t = 0; t < p.offsets.size(); ++t) {
    Y.noalias() += ConstMatMap(xp.data() + p.offsets[t] * g.Cin, p.rows, g.Cin) *
                   ConstMatMap(w + static_cast<std::int64_t>(t) * g.Cin * g.Cout, g.Cin, g.Cout);
  }
  Tensor out(Shape{g.B, g.out[0], g.out[1], g.out[2], g.Cout}, 0.0);
  virtual_copy<false>(g, p, yv.data(), out.ptr());
  if (in.size() == 3) add_bias_rows(as_mat(out, g.positions(), g.Cout), *in[2]);
  return out;
}

Tensor fwd_pool(OpKind kind, std::span<const Tensor* const> in, const OpAttrs& a) {
  require_arity(kind, in, 1, 1);
  const Tensor& x = *in[0];
  int axis = norm_axis(kind, in, a.axis, x.rank());
  auto s = split_at(x.shape(), axis);
  Shape os = x.shape();
  os.erase(os.begin() + axis);
  if (os.empty()) os.push_back(1);
  Tensor out(os, 0.0);
  const double* xp = x.ptr();
  double* o = out.ptr();
  for (std::int64_t i = 0; i < s.outer; ++i) {
    double* oi = o + i * s.inner;
    const double* xi = xp + i * s.n * s.inner;
    if (kind == OpKind::kMaxPool) {
      std::memcpy(oi, xi, sizeof(double) * s.inner);
      for (std::int64_t j = 1; j < s.n; ++j) {
        const double* row = xi + j * s.inner;
        for (std::int64_t k = 0; k < s.inner; ++k) oi[k] = row[k] > oi[k] ? row[k] : oi[k];
      }
    } else {
      for (std::int64_t j = 0; j < s.n; ++j) {
        const double* row = xi + j * s.inner;
        for (std::int64_t k = 0; k < s.inner; ++k) oi[k] += row[k];
      }
      for (std::int64_t k = 0; k < s.inner; ++k) oi[k] /= static_cast<double>(s.n);
    }
  }
  return out;
}

Tensor fwd_concat(std::span<const Tensor* const> in, const OpAttrs& a) {
  if (in.empty()) shape_fail(OpKind::kConcat, in, "needs at least one input");
  const Tensor& first = *in[0];
  int axis = norm_axis(OpKind::kConcat, in, a.axis, first.rank());
  Shape os = first.shape();
  os[axis] = 0;
  for (const auto* t : in) {
    if (t->rank() != first.rank()) shape_fail(OpKind::kConcat, in, "rank mismatch");
    for (int d = 0; d < first.rank(); ++d) {
      if (d != axis && t->dim(d) != first.dim(d)) shape_fail(OpKind::kConcat, in, "non-axis extents differ");
    }
    os[axis] += t->dim(axis);
  }
  Tensor out(os, 0.0);
  auto so = split_at(os, axis);
  double* o = out.ptr();
  std::int64_t offset = 0;
  for (const auto* t : in) {
    auto st = split_at(t->shape(), axis);
    const std::int64_t block = st.n * st.inner;
    for (std::int64_t i = 0; i < st.outer; ++i) {
      std::memcpy(o + i * so.n * so.inner + offset * so.inner, t->ptr() + i * block, sizeof(double) * block);
    }
    offset += st.n;
  }
  return out;
}

Tensor fwd_softmax(std::span<const Tensor* const> in, const OpAttrs& a) {
  require_arity(OpKind::kSoftmax, in, 1, 1);
  const Tensor& x = *in[0];
  int axis = norm_axis(OpKind::kSoftmax, in, a.axis, x.rank());
  auto s = split_at(x.shape(), axis);
  Tensor out(x.shape(), 0.0);
  for (std::int64_t i = 0; i < s.outer; ++i) {
    for (std::int64_t k = 0; k < s.inner; ++k) {
      const double* xb = x.ptr() + i * s.n * s.inner + k;
      double* ob = out.ptr() + i * s.n * s.inner + k;
      double m = -std::numeric_limits<double>::infinity();
      for (std::int64_t j = 0; j < s.n; ++j) m = std::max(m, xb[j * s.inner]);
      double z = 0.0;
      for (std::int64_t j = 0; j < s.n; ++j) {
        double e = std::exp(xb[j * s.inner] - m);
        ob[j * s.inner] = e;
        z += e;
      }
      for (std::int64_t j = 0; j < s.n; ++j) ob[j * s.inner] /= z;
    }
  }
  return out;
}

Tensor fwd_l2norm(std::span<const Tensor* const> in, const OpAttrs& a) {
  require_arity(OpKind::kL2Normalize, in, 1, 1);
  const Tensor& x = *in[0];
  int axis = norm_axis(OpKind::kL2Normalize, in, a.axis, x.rank());
  auto s = split_at(x.shape(), axis);
  Tensor out(x.shape(), 0.0);
  for (std::int64_t i = 0; i < s.outer; ++i) {
    for (std::int64_t k = 0; k < s.inner; ++k) {
      const double* xb = x.ptr() + i * s.n * s.inner + k;
      double* ob = out.ptr() + i * s.n * s.inner + k;
      double ss = 0.0;
      for (std::int64_t j = 0; j < s.n; ++j) ss += xb[j * s.inner] * xb[j * s.inner];
      double nrm = std::sqrt(ss);
      if (nrm < kNormalizeFloor) continue;
      for (std::int64_t j = 0; j < s.n; ++j) ob[j * s.inner] = xb[j * s.inner] / nrm;
    }
  }
  return out;
}

void check_targets(std::span<const Tensor* const> in, const OpAttrs& a) {
  require_arity(OpKind::kCrossEntropy, in, 1, 1);
  const Tensor& z = *in[0];
  if (z.rank() != 2) shape_fail(OpKind::kCrossEntropy, in, "logits must be [N,K]");
  if (static_cast<std::int64_t>(a.targets.size()) != z.dim(0)) {
    shape_fail(OpKind::kCrossEntropy, in, "expected " + std::to_string(z.dim(0)) + " targets, got " +
                                              std::to_string(a.targets.size()));
  }
  for (auto t : a.targets) {
    if (t < 0 || t >= z.dim(1)) {
      throw InvalidArgument("op cross_entropy: target " + std::to_string(t) + " outside [0," +
                            std::to_string(z.dim(1)) + ")");
    }
  }
}

Tensor fwd_cross_entropy(std::span<const Tensor* const> in, const OpAttrs& a) {
  check_targets(in, a);
  const Tensor& z = *in[0];
  const std::int64_t N = z.dim(0), K = z.dim(1);
  double total = 0.0;
  for (std::int64_t r = 0; r < N; ++r) {
    const double* row = z.ptr() + r * K;
    double m = *std::max_element(row, row + K);
    double s = 0.0;
    for (std::int64_t j = 0; j < K; ++j) s += std::exp(row[j] - m);
    total += m + std::log(s) - row[a.targets[r]];
  }
  if (a.reduction == Reduction::kMean) total /= static_cast<double>(N);
  return Tensor::scalar(total);
}

Tensor fwd_broadcast(std::span<const Tensor* const> in, const OpAttrs& a) {
  require_arity(OpKind::kBroadcast, in, 1, 1);
  const Tensor& x = *in[0];
  if (!broadcastable(x.shape(), a.shape)) shape_fail(OpKind::kBroadcast, in, "cannot broadcast to " + to_string(a.shape));
  Tensor out(a.shape, 0.0);
  double* o = out.ptr();
  const double* xp = x.ptr();
  for_each_broadcast(a.shape, x.shape(), [&](std::int64_t oi, std::int64_t ii) { o[oi] = xp[ii]; });
  return out;
}

// ---- backward implementations ------------------------------------------

std::vector<Tensor> bwd_matmul(std::span<const Tensor* const> in, const Tensor& g, const OpAttrs& a,
                               std::span<const bool> need) {
  auto d = matmul_dims(in, a);
  const Tensor& A = *in[0];
  const Tensor& B = *in[1];
  std::vector<Tensor> r(in.size());
  auto G = as_mat(g, d.m, d.n);
  auto Am = a.trans_a ? as_mat(A, A.dim(0), A.dim(1)) : as_mat(A, d.m, d.k);
  auto Bm = as_mat(B, B.dim(0), B.dim(1));
  if (need[0]) {
    r[0] = Tensor(A.shape(), 0.0);
    auto dA = a.trans_a ? as_mat(r[0], A.dim(0), A.dim(1)) : as_mat(r[0], d.m, d.k);
    if (!a.trans_a) {
      if (a.trans_b) dA.noalias() = G * Bm;
      else dA.noalias() = G * Bm.transpose();
    } else {
      if (a.trans_b) dA.noalias() = Bm.transpose() * G.transpose();
      else dA.noalias() = Bm * G.transpose();
    }
  }
  if (need[1]) {
    r[1] = Tensor(B.shape(), 0.0);
    auto dB = as_mat(r[1], B.dim(0), B.dim(1));
    if (!a.trans_b) {
      if (a.trans_a) dB.noalias() = Am * G;
      else dB.noalias() = Am.transpose() * G;
    } else {
      if (a.trans_a) dB.noalias() = G.transpose() * Am.transpose();
      else dB.noalias() = G.transpose() * Am;
    }
  }
  if (in.size() == 3 && need[2]) r[2] = bias_grad(g, d.n);
  return r;
}

std::vector<Tensor> bwd_conv1d(std::span<const Tensor* const> in, const Tensor& g, const OpAttrs& a,
                               std::span<const bool> need) {
  auto geo = conv1d_geom(OpKind::kConv1d, in, a);
  const std::int64_t rows = geo.B * geo.Lout, cols = geo.K * geo.Cin;
  std::vector<Tensor> r(in.size());
  auto G = as_mat(g, rows, geo.Cout);
  if (need[1]) {
    std::vector<double> col(static_cast<std::size_t>(rows * cols));
    im2col_1d(geo, in[0]->ptr(), col.data());
    r[1] = Tensor(in[1]->shape(), 0.0);
    as_mat(r[1], cols, geo.Cout).noalias() = ConstMatMap(col.data(), rows, cols).transpose() * G;
  }
  if (need[0]) {
    std::vector<double> dcol(static_cast<std::size_t>(rows * cols));
    MatMap(dcol.data(), rows, cols).noalias() = G * as_mat(*in[1], cols, geo.Cout).transpose();
    r[0] = Tensor(in[0]->shape(), 0.0);
    col2im_1d(geo, dcol.data(), r[0].ptr());
  }
  if (in.size() == 3 && need[2]) r[2] = bias_grad(g, geo.Cout);
  return r;
}

std::vector<Tensor> bwd_conv3d(std::span<const Tensor* const> in, const Tensor& g, const OpAttrs& a,
                               std::span<const bool> need) {
  auto geo = conv3d_geom(OpKind::kConv3d, in, a);
  auto p = conv3d_plan(geo);
  std::vector<Tensor> r(in.size());
  std::vector<double> gv(static_cast<std::size_t>(p.rows * geo.Cout), 0.0);
  virtual_copy<true>(geo, p, g.ptr(), gv.data());
  ConstMatMap G(gv.data(), p.rows, geo.Cout);
  const std::int64_t wtap = geo.Cin * geo.Cout;
  if (need[1]) {
    std::vector<double> xp(static_cast<std::size_t>(p.total * geo.Cin), 0.0);
    pad_copy<true>(geo, p, in[0]->ptr(), xp.data());
    r[1] = Tensor(in[1]->shape(), 0.0);
    for (std::size_t t = 0; t < p.offsets.size(); ++t) {
      MatMap(r[1].ptr() + static_cast<std::int64_t>(t) * wtap, geo.Cin, geo.Cout).noalias() =
          ConstMatMap(xp.data() + p.offsets[t] * geo.Cin, p.rows, geo.Cin).transpose() * G;
    }
  }
  if (need[0]) {
    std::vector<double> dxp(static_cast<std::size_t>(p.total * geo.Cin), 0.0);
    const double* w = in[1]->ptr();
    for (std::size_t t = 0; t < p.offsets.size(); ++t) {
      MatMap(dxp.data() + p.offsets[t] * geo.Cin, p.rows, geo.Cin).noalias() +=
          G * ConstMatMap(w + static_cast<std::int64_t>(t) * wtap, geo.Cin, geo.Cout).transpose();
    }
    r[0] = Tensor(in[0]->shape(), 0.0);
    pad_copy<false>(geo, p, dxp.data(), r[0].ptr());
  }
  if (in.size() == 3 && need[2]) r[2] = bias_grad(g, geo.Cout);
  return r;
}

Tensor bwd_pool(OpKind kind, const Tensor& x, const Tensor& g, const OpAttrs& a) {
  int axis = a.axis < 0 ? a.axis + x.rank() : a.axis;
  auto s = split_at(x.shape(), axis);
  Tensor dx(x.shape(), 0.0);
  const double* xp = x.ptr();
  const double* gp = g.ptr();
  double* dp = dx.ptr();
  std::vector<std::int64_t> best(static_cast<std::size_t>(s.inner));
  for (std::int64_t i = 0; i < s.outer; ++i) {
    const double* xi = xp + i * s.n * s.inner;
    const double* gi = gp + i * s.inner;
    double* di = dp + i * s.n * s.inner;
    if (kind == OpKind::kMaxPool) {
      // first maximum wins, as in the forward pass
      std::fill(best.begin(), best.end(), 0);
      for (std::int64_t j = 1; j < s.n; ++j) {
        const double* row = xi + j * s.inner;
        for (std::int64_t k = 0; k < s.inner; ++k) {
          if (row[k] > xi[best[static_cast<std::size_t>(k)] * s.inner + k]) best[static_cast<std::size_t>(k)] = j;
        }
      }
      for (std::int64_t k = 0; k < s.inner; ++k) di[best[static_cast<std::size_t>(k)] * s.inner + k] += gi[k];
    } else {
      for (std::int64_t j = 0; j < s.n; ++j) {
        double* row = di + j * s.inner;
        for (std::int64_t k = 0; k < s.inner; ++k) row[k] = gi[k] / static_cast<double>(s.n);
      }
    }
  }
  return dx;
}

std::vector<Tensor> bwd_concat(std::span<const Tensor* const> in, const Tensor& g, const OpAttrs& a,
                               std::span<const bool> need) {
  int axis = a.axis < 0 ? a.axis + in[0]->rank() : a.axis;
  auto so = split_at(g.shape(), axis);
  std::vector<Tensor> r(in.size());
  std::int64_t offset = 0;
  for (std::size_t t = 0; t < in.size(); ++t) {
    auto st = split_at(in[t]->shape(), axis);
    if (need[t]) {
      r[t] = Tensor(in[t]->shape(), 0.0);
      const std::int64_t block = st.n * st.inner;
      for (std::int64_t i = 0; i < st.outer; ++i) {
        std::memcpy(r[t].ptr() + i * block, g.ptr() + i * so.n * so.inner + offset * so.inner, sizeof(double) * block);
      }
    }
    offset += st.n;
  }
  return r;
}

Tensor bwd_softmax(const Tensor& y, const Tensor& g, const OpAttrs& a) {
  int axis = a.axis < 0 ? a.axis + y.rank() : a.axis;
  auto s = split_at(y.shape(), axis);
  Tensor dx(y.shape(), 0.0);
  for (std::int64_t i = 0; i < s.outer; ++i) {
    for (std::int64_t k = 0; k < s.inner; ++k) {
      const std::int64_t base = i * s.n * s.inner + k;
      double dot = 0.0;
      for (std::int64_t j = 0; j < s.n; ++j) dot += y[base + j * s.inner] * g[base + j * s.inner];
      for (std::int64_t j = 0; j < s.n; ++j) {
        const std::int64_t p = base + j * s.inner;
        dx[p] = y[p] * (g[p] - dot);
      }
    }
  }
  return dx;
}

Tensor bwd_l2norm(const Tensor& x, const Tensor& y, const Tensor& g, const OpAttrs& a) {
  int axis = a.axis < 0 ? a.axis + x.rank() : a.axis;
  auto s = split_at(x.shape(), axis);
  Tensor dx(x.shape(), 0.0);
  for (std::int64_t i = 0; i < s.outer; ++i) {
    for (std::int64_t k = 0; k < s.inner; ++k) {
      const std::int64_t base = i * s.n * s.inner + k;
      double ss = 0.0, dot = 0.0;
      for (std::int64_t j = 0; j < s.n; ++j) {
        const std::int64_t p = base + j * s.inner;
        ss += x[p] * x[p];
        dot += y[p] * g[p];
      }
      const double nrm = std::sqrt(ss);
      if (nrm < kNormalizeFloor) continue;
      for (std::int64_t j = 0; j < s.n; ++j) {
        const std::int64_t p = base + j * s.inner;
        dx[p] = (g[p] - y[p] * dot) / nrm;
      }
    }
  }
  return dx;
}

Tensor bwd_cross_entropy(const Tensor& z, const Tensor& g, const OpAttrs& a) {
  const std::int64_t N = z.dim(0), K = z.dim(1);
  double scale = g.item();
  if (a.reduction == Reduction::kMean) scale /= static_cast<double>(N);
  Tensor dz(z.shape(), 0.0);
  for (std::int64_t r = 0; r < N; ++r) {
    const double* row = z.ptr() + r * K;
    double* drow = dz.ptr() + r * K;
    double m = *std::max_element(row, row + K);
    double s = 0.0;
    for (std::int64_t j = 0; j < K; ++j) {
      drow[j] = std::exp(row[j] - m);
      s += drow[j];
    }
    for (std::int64_t j = 0; j < K; ++j) drow[j] = drow[j] / s * scale;
    drow[a.targets[r]] -= scale;
  }
  return dz;
}

}  // namespace

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kAdd: return "add";
    case OpKind::kMulScalar: return "mul_scalar";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kConv1d: return "conv1d";
    case OpKind::kConv3d: return "conv3d";
    case OpKind::kRelu: return "relu";
    case OpKind::kMaxPool: return "maxpool";
    case OpKind::kMeanPool: return "meanpool";
    case OpKind::kConcat: return "concat";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kL2Normalize: return "l2_normalize";
    case OpKind::kCrossEntropy: return "cross_entropy";
    case OpKind::kBroadcast: return "broadcast";
    case OpKind::kReshape: return "reshape";
  }
  return "?";
}

OpKind op_from_name(std::string_view name) {
  for (int k = 0; k <= static_cast<int>(OpKind::kReshape); ++k) {
    auto kind = static_cast<OpKind>(k);
    if (op_name(kind) == name) return kind;
  }
  throw InvalidArgument("unknown op id '" + std::string(name) + "'");
}

Tensor eval_op(std::string_view op_id, std::span<const Tensor* const> inputs, const OpAttrs& attrs) {
  return eval_op(op_from_name(op_id), inputs, attrs);
}

Tensor eval_op(OpKind kind, std::span<const Tensor* const> in, const OpAttrs& a) {
  switch (kind) {
    case OpKind::kAdd: return fwd_add(in);
    case OpKind::kMulScalar: {
      require_arity(kind, in, 1, 1);
      Tensor out = *in[0];
      for (auto& v : out.data()) v *= a.scalar;
      return out;
    }
    case OpKind::kMatmul: return fwd_matmul(in, a);
    case OpKind::kConv1d: return fwd_conv1d(in, a);
    case OpKind::kConv3d: return fwd_conv3d(in, a);
    case OpKind::kRelu: {
      require_arity(kind, in, 1, 1);
      Tensor out = *in[0];
      for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
      return out;
    }
    case OpKind::kMaxPool:
    case OpKind::kMeanPool: return fwd_pool(kind, in, a);
    case OpKind::kConcat: return fwd_concat(in, a);
    case OpKind::kSoftmax: return fwd_softmax(in, a);
    case OpKind::kL2Normalize: return fwd_l2norm(in, a);
    case OpKind::kCrossEntropy: return fwd_cross_entropy(in, a);
    case OpKind::kBroadcast: return fwd_broadcast(in, a);
    case OpKind::kReshape: {
      require_arity(kind, in, 1, 1);
      if (numel(a.shape) != in[0]->size()) shape_fail(kind, in, "cannot reshape to " + to_string(a.shape));
      return in[0]->reshaped(a.shape);
    }
  }
  throw InvalidArgument("unknown op kind");
}

std::vector<Tensor> op_backward(OpKind kind, std::span<const Tensor* const> in, const Tensor& out,
                                const Tensor& g, const OpAttrs& a, std::span<const bool> need) {
  if (need.size() != in.size()) throw InvalidArgument("op_backward: needs_grad length mismatch");
  std::vector<Tensor> r(in.size());
  switch (kind) {
    case OpKind::kAdd:
      if (need[0]) r[0] = g;
      if (need[1]) r[1] = reduce_to(g, in[1]->shape());
      return r;
    case OpKind::kMulScalar:
      if (need[0]) {
        r[0] = g;
        for (auto& v : r[0].data()) v *= a.scalar;
      }
      return r;
    case OpKind::kMatmul: return bwd_matmul(in, g, a, need);
    case OpKind::kConv1d: return bwd_conv1d(in, g, a, need);
    case OpKind::kConv3d: return bwd_conv3d(in, g, a, need);
    case OpKind::kRelu:
      if (need[0]) {
        r[0] = g;
        const double* x = in[0]->ptr();
        double* d = r[0].ptr();
        for (std::int64_t i = 0; i < g.size(); ++i) {
          if (!(x[i] > 0.0)) d[i] = 0.0;
        }
      }
      return r;
    case OpKind::kMaxPool:
    case OpKind::kMeanPool:
      if (need[0]) r[0] = bwd_pool(kind, *in[0], g, a);
      return r;
    case OpKind::kConcat: return bwd_concat(in, g, a, need);
    case OpKind::kSoftmax:
      if (need[0]) r[0] = bwd_softmax(out, g, a);
      return r;
    case OpKind::kL2Normalize:
      if (need[0]) r[0] = bwd_l2norm(*in[0], out, g, a);
      return r;
    case OpKind::kCrossEntropy:
      if (need[0]) r[0] = bwd_cross_entropy(*in[0], g, a);
      return r;
    case OpKind::kBroadcast:
      if (need[0]) r[0] = reduce_to(g, in[0]->shape());
      return r;
    case OpKind::kReshape:
      if (need[0]) r[0] = g.reshaped(in[0]->shape());
      return r;
  }
  throw InvalidArgument("unknown op kind");
}

}  // namespace egoloc::num
