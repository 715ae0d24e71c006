/*
 * Copyright (c) 2026 The trans2seg Authors. All rights reserved.
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "trans2seg/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "trans2seg/macs.hpp"

namespace t2s {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// C[m,n] (+)= op(A)[m,k] * op(B)[k,n], all buffers row-major. A is stored
// k x m when trans_a, B is stored n x k when trans_b.
template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const T* a,
          const T* b, T* c, bool accumulate) {
  using Index = Eigen::Index;
  Eigen::Map<const RowMat<T>> am(a, Index(trans_a ? k : m), Index(trans_a ? m : k));
  Eigen::Map<const RowMat<T>> bm(b, Index(trans_b ? n : k), Index(trans_b ? k : n));
  Eigen::Map<RowMat<T>> cm(c, Index(m), Index(n));
  if (!accumulate) cm.setZero();
  if (!trans_a && !trans_b) {
    cm.noalias() += am * bm;
  } else if (!trans_a && trans_b) {
    cm.noalias() += am * bm.transpose();
  } else if (trans_a && !trans_b) {
    cm.noalias() += am.transpose() * bm;
  } else {
    cm.noalias() += am.transpose() * bm.transpose();
  }
}

template <typename T>
void check_finite(const char* op, const Tensor<T>& out) {
  for (T v : out.data()) {
    if (!std::isfinite(v)) {
      throw NumericalError(std::string("non-finite value produced by ") + op);
    }
  }
}

// Validates the output, and when a tape is active and any input requires grad,
// marks the output as differentiable and records `rule(output_grad)`.
template <typename T, typename Rule>
Tensor<T> emit(const char* op, Tensor<T> out, std::initializer_list<Tensor<T>> inputs,
               Rule rule) {
  check_finite(op, out);
  Tape<T>* tape = active_tape<T>();
  if (!tape) return out;
  bool track = false;
  std::vector<detail::NodePtr<T>> nodes;
  for (const auto& in : inputs) {
    if (!in.defined()) continue;
    track = track || in.requires_grad();
    nodes.push_back(in.node());
  }
  if (!track) return out;
  out.set_requires_grad(true);
  auto* out_node = out.node().get();
  tape->record(std::move(nodes), out.node(), [out_node, rule = std::move(rule)]() mutable {
    rule(std::span<const T>(out_node->grad));
  });
  return out;
}

template <typename T>
Tensor<T> emit_vec(const char* op, Tensor<T> out, const std::vector<Tensor<T>>& inputs,
                   std::function<void(std::span<const T>)> rule) {
  check_finite(op, out);
  Tape<T>* tape = active_tape<T>();
  if (!tape) return out;
  bool track = false;
  std::vector<detail::NodePtr<T>> nodes;
  for (const auto& in : inputs) {
    track = track || in.requires_grad();
    nodes.push_back(in.node());
  }
  if (!track) return out;
  out.set_requires_grad(true);
  auto* out_node = out.node().get();
  tape->record(std::move(nodes), out.node(), [out_node, rule = std::move(rule)]() mutable {
    rule(std::span<const T>(out_node->grad));
  });
  return out;
}

void require(bool cond, const std::string& what) {
  if (!cond) throw DimensionError(what);
}

struct AxisSplit {
  std::size_t outer, n, inner;
};

AxisSplit split_at(const Shape& s, std::size_t axis) {
  AxisSplit r{1, s[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

struct MatmulDims {
  std::size_t batch, p, q, r;
};

MatmulDims matmul_dims(const Shape& a, const Shape& b, bool b_transposed, const char* op) {
  require(a.size() == b.size() && (a.size() == 2 || a.size() == 3),
          std::string(op) + ": operands must both be 2-D or both 3-D, got " + shape_str(a) +
              " and " + shape_str(b));
  std::size_t off = a.size() - 2;
  std::size_t batch = off ? a[0] : 1;
  if (off) require(a[0] == b[0], std::string(op) + ": batch mismatch");
  std::size_t p = a[off], q = a[off + 1];
  std::size_t bq = b_transposed ? b[off + 1] : b[off];
  std::size_t r = b_transposed ? b[off] : b[off + 1];
  require(q == bq, std::string(op) + ": inner dims differ in " + shape_str(a) + " and " +
                       shape_str(b));
  return {batch, p, q, r};
}

}  // namespace

std::size_t conv_out_size(std::size_t in, std::size_t k, const Conv2dOptions& opt) {
  long num = long(in) + 2 * long(opt.padding) - long(opt.dilation) * (long(k) - 1) - 1;
  if (num < 0) return 0;
  return std::size_t(num / long(opt.stride)) + 1;
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  auto d = matmul_dims(a.shape(), b.shape(), false, "matmul");
  Shape os = a.rank() == 3 ? Shape{d.batch, d.p, d.r} : Shape{d.p, d.r};
  Tensor<T> out(os);
  for (std::size_t i = 0; i < d.batch; ++i) {
    gemm<T>(false, false, d.p, d.r, d.q, a.ptr() + i * d.p * d.q, b.ptr() + i * d.q * d.r,
            out.ptr() + i * d.p * d.r, false);
  }
  MacCounter::add(std::uint64_t(d.batch) * d.p * d.q * d.r);
  return emit<T>("matmul", out, {a, b}, [a, b, d](std::span<const T> g) mutable {
    for (std::size_t i = 0; i < d.batch; ++i) {
      const T* gi = g.data() + i * d.p * d.r;
      if (a.requires_grad()) {
        gemm<T>(false, true, d.p, d.q, d.r, gi, b.ptr() + i * d.q * d.r,
                a.mutable_grad().data() + i * d.p * d.q, true);
      }
      if (b.requires_grad()) {
        gemm<T>(true, false, d.q, d.r, d.p, a.ptr() + i * d.p * d.q, gi,
                b.mutable_grad().data() + i * d.q * d.r, true);
      }
    }
  });
}

template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
  auto d = matmul_dims(a.shape(), b.shape(), true, "matmul_nt");
  Shape os = a.rank() == 3 ? Shape{d.batch, d.p, d.r} : Shape{d.p, d.r};
  Tensor<T> out(os);
  for (std::size_t i = 0; i < d.batch; ++i) {
    gemm<T>(false, true, d.p, d.r, d.q, a.ptr() + i * d.p * d.q, b.ptr() + i * d.r * d.q,
            out.ptr() + i * d.p * d.r, false);
  }
  MacCounter::add(std::uint64_t(d.batch) * d.p * d.q * d.r);
  return emit<T>("matmul_nt", out, {a, b}, [a, b, d](std::span<const T> g) mutable {
    for (std::size_t i = 0; i < d.batch; ++i) {
      const T* gi = g.data() + i * d.p * d.r;
      if (a.requires_grad()) {
        gemm<T>(false, false, d.p, d.q, d.r, gi, b.ptr() + i * d.r * d.q,
                a.mutable_grad().data() + i * d.p * d.q, true);
      }
      if (b.requires_grad()) {
        gemm<T>(true, false, d.r, d.q, d.p, gi, a.ptr() + i * d.p * d.q,
                b.mutable_grad().data() + i * d.r * d.q, true);
      }
    }
  });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape(),
          "add: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a[i] + b[i];
  return emit<T>("add", out, {a, b}, [a, b](std::span<const T> g) mutable {
    for (auto* t : {&a, &b}) {
      if (!t->requires_grad()) continue;
      auto gt = t->mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) gt[i] += g[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape(),
          "mul: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a[i] * b[i];
  return emit<T>("mul", out, {a, b}, [a, b](std::span<const T> g) mutable {
    if (a.requires_grad()) {
      auto ga = a.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b[i];
    }
    if (b.requires_grad()) {
      auto gb = b.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a[i];
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = x[i] * factor;
  return emit<T>("scale", out, {x}, [x, factor](std::span<const T> g) mutable {
    auto gx = x.mutable_grad();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * factor;
  });
}

template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias) {
  require(bias.rank() == 1 && bias.dim(0) == x.shape().back(),
          "add_bias: bias " + shape_str(bias.shape()) + " does not match last dim of " +
              shape_str(x.shape()));
  const std::size_t c = bias.numel();
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = x[i] + bias[i % c];
  return emit<T>("add_bias", out, {x, bias}, [x, bias, c](std::span<const T> g) mutable {
    if (x.requires_grad()) {
      auto gx = x.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
    if (bias.requires_grad()) {
      auto gb = bias.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i % c] += g[i];
    }
  });
}

template <typename T>
Tensor<T> add_shared(const Tensor<T>& x, const Tensor<T>& shared) {
  Shape rest(x.shape().begin() + 1, x.shape().end());
  require(x.rank() >= 2 && rest == shared.shape(),
          "add_shared: " + shape_str(shared.shape()) + " is not a trailing slice of " +
              shape_str(x.shape()));
  const std::size_t block = shared.numel();
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = x[i] + shared[i % block];
  return emit<T>("add_shared", out, {x, shared}, [x, shared, block](std::span<const T> g) mutable {
    if (x.requires_grad()) {
      auto gx = x.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
    if (shared.requires_grad()) {
      auto gs = shared.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) gs[i % block] += g[i];
    }
  });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
  return emit<T>("relu", out, {x}, [x](std::span<const T> g) mutable {
    auto gx = x.mutable_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (x[i] > T(0)) gx[i] += g[i];
    }
  });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis) {
  require(axis < x.rank(), "softmax: axis " + std::to_string(axis) + " out of range for " +
                               shape_str(x.shape()));
  const auto s = split_at(x.shape(), axis);
  Tensor<T> out(x.shape());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.n * s.inner + in;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t j = 0; j < s.n; ++j) mx = std::max(mx, x[base + j * s.inner]);
      T total = 0;
      for (std::size_t j = 0; j < s.n; ++j) {
        T e = std::exp(x[base + j * s.inner] - mx);
        out[base + j * s.inner] = e;
        total += e;
      }
      for (std::size_t j = 0; j < s.n; ++j) out[base + j * s.inner] /= total;
    }
  }
  return emit<T>("softmax", out, {x}, [x, y = out, s](std::span<const T> g) mutable {
    auto gx = x.mutable_grad();
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t in = 0; in < s.inner; ++in) {
        const std::size_t base = o * s.n * s.inner + in;
        T dot = 0;
        for (std::size_t j = 0; j < s.n; ++j) {
          dot += g[base + j * s.inner] * y[base + j * s.inner];
        }
        for (std::size_t j = 0; j < s.n; ++j) {
          const std::size_t idx = base + j * s.inner;
          gx[idx] += y[idx] * (g[idx] - dot);
        }
      }
    }
  });
}

namespace {

// Shared normalization core: `groups` slices, each of `len` elements spaced
// by 1, normalized independently; gain/bias indexed by group % channels or by
// element position within the slice (per_element).
template <typename T>
Tensor<T> normalize_groups(const char* op, const Tensor<T>& x, const Tensor<T>& gain,
                           const Tensor<T>& bias, T eps, std::size_t groups, std::size_t len,
                           bool per_element) {
  const std::size_t channels = gain.numel();
  Tensor<T> out(x.shape());
  std::vector<T> xhat(x.numel());
  std::vector<T> inv_std(groups);
  for (std::size_t gi = 0; gi < groups; ++gi) {
    const T* src = x.ptr() + gi * len;
    double m = 0;
    for (std::size_t j = 0; j < len; ++j) m += src[j];
    m /= double(len);
    double var = 0;
    for (std::size_t j = 0; j < len; ++j) var += (src[j] - m) * (src[j] - m);
    var /= double(len);
    const T is = T(1.0 / std::sqrt(var + double(eps)));
    inv_std[gi] = is;
    for (std::size_t j = 0; j < len; ++j) {
      const std::size_t idx = gi * len + j;
      const std::size_t c = per_element ? j : gi % channels;
      xhat[idx] = (src[j] - T(m)) * is;
      out[idx] = xhat[idx] * gain[c] + bias[c];
    }
  }
  return emit<T>(op, out, {x, gain, bias},
                 [x, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std), groups,
                  len, per_element, channels](std::span<const T> g) mutable {
                   if (gain.requires_grad() || bias.requires_grad()) {
                     auto gg = gain.requires_grad() ? gain.mutable_grad() : std::span<T>{};
                     auto gb = bias.requires_grad() ? bias.mutable_grad() : std::span<T>{};
                     for (std::size_t i = 0; i < g.size(); ++i) {
                       const std::size_t c = per_element ? i % len : (i / len) % channels;
                       if (!gg.empty()) gg[c] += g[i] * xhat[i];
                       if (!gb.empty()) gb[c] += g[i];
                     }
                   }
                   if (!x.requires_grad()) return;
                   auto gx = x.mutable_grad();
                   std::vector<T> dxhat(len);
                   for (std::size_t gi = 0; gi < groups; ++gi) {
                     double mean_d = 0, mean_dx = 0;
                     for (std::size_t j = 0; j < len; ++j) {
                       const std::size_t idx = gi * len + j;
                       const std::size_t c = per_element ? j : gi % channels;
                       dxhat[j] = g[idx] * gain[c];
                       mean_d += dxhat[j];
                       mean_dx += dxhat[j] * xhat[idx];
                     }
                     mean_d /= double(len);
                     mean_dx /= double(len);
                     for (std::size_t j = 0; j < len; ++j) {
                       const std::size_t idx = gi * len + j;
                       gx[idx] += inv_std[gi] * (dxhat[j] - T(mean_d) - xhat[idx] * T(mean_dx));
                     }
                   }
                 });
}

}  // namespace

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps) {
  const std::size_t c = x.shape().back();
  require(gain.numel() == c && bias.numel() == c,
          "layer_norm: gain/bias length must equal last dim of " + shape_str(x.shape()));
  return normalize_groups<T>("layer_norm", x, gain, bias, eps, x.numel() / c, c, true);
}

template <typename T>
Tensor<T> channel_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps) {
  require(x.rank() == 3 || x.rank() == 4,
          "channel_norm: expected [C,h,w] or [B,C,h,w], got " + shape_str(x.shape()));
  const std::size_t off = x.rank() - 3;
  const std::size_t c = x.dim(off);
  require(gain.numel() == c && bias.numel() == c,
          "channel_norm: gain/bias length must equal channel count of " + shape_str(x.shape()));
  const std::size_t len = x.dim(off + 1) * x.dim(off + 2);
  return normalize_groups<T>("channel_norm", x, gain, bias, eps, x.numel() / len, len, false);
}

namespace {

struct ConvGeom {
  std::size_t cin, h, w, k, oh, ow, stride, pad, dil;
  std::size_t col_rows() const { return cin * k * k; }
  std::size_t col_cols() const { return oh * ow; }
  bool pointwise() const { return k == 1 && stride == 1 && pad == 0; }
};

template <typename T>
void im2col(const T* x, const ConvGeom& gm, T* col) {
  for (std::size_t ci = 0; ci < gm.cin; ++ci) {
    for (std::size_t ky = 0; ky < gm.k; ++ky) {
      for (std::size_t kx = 0; kx < gm.k; ++kx) {
        T* row = col + ((ci * gm.k + ky) * gm.k + kx) * gm.col_cols();
        for (std::size_t oy = 0; oy < gm.oh; ++oy) {
          const long iy = long(oy * gm.stride + ky * gm.dil) - long(gm.pad);
          T* dst = row + oy * gm.ow;
          if (iy < 0 || iy >= long(gm.h)) {
            std::fill(dst, dst + gm.ow, T(0));
            continue;
          }
          const T* src = x + (ci * gm.h + std::size_t(iy)) * gm.w;
          for (std::size_t ox = 0; ox < gm.ow; ++ox) {
            const long ix = long(ox * gm.stride + kx * gm.dil) - long(gm.pad);
            dst[ox] = (ix < 0 || ix >= long(gm.w)) ? T(0) : src[ix];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, const ConvGeom& gm, T* dx) {
  for (std::size_t ci = 0; ci < gm.cin; ++ci) {
    for (std::size_t ky = 0; ky < gm.k; ++ky) {
      for (std::size_t kx = 0; kx < gm.k; ++kx) {
        const T* row = col + ((ci * gm.k + ky) * gm.k + kx) * gm.col_cols();
        for (std::size_t oy = 0; oy < gm.oh; ++oy) {
          const long iy = long(oy * gm.stride + ky * gm.dil) - long(gm.pad);
          if (iy < 0 || iy >= long(gm.h)) continue;
          T* dst = dx + (ci * gm.h + std::size_t(iy)) * gm.w;
          const T* src = row + oy * gm.ow;
          for (std::size_t ox = 0; ox < gm.ow; ++ox) {
            const long ix = long(ox * gm.stride + kx * gm.dil) - long(gm.pad);
            if (ix >= 0 && ix < long(gm.w)) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 Conv2dOptions opt) {
  require(x.rank() == 3 || x.rank() == 4,
          "conv2d: expected input [Cin,h,w] or [B,Cin,h,w], got " + shape_str(x.shape()));
  require(weight.rank() == 4 && weight.dim(2) == weight.dim(3),
          "conv2d: expected square weight [Cout,Cin,k,k], got " + shape_str(weight.shape()));
  require(weight.dim(2) % 2 == 1, "conv2d: kernel size must be odd");
  require(opt.stride >= 1 && opt.dilation >= 1, "conv2d: stride and dilation must be >= 1");
  const std::size_t off = x.rank() - 3;
  const std::size_t batch = off ? x.dim(0) : 1;
  const std::size_t cout = weight.dim(0);
  ConvGeom gm{x.dim(off), x.dim(off + 1), x.dim(off + 2), weight.dim(2), 0, 0,
              opt.stride, opt.padding, opt.dilation};
  require(weight.dim(1) == gm.cin, "conv2d: weight expects " + std::to_string(weight.dim(1)) +
                                       " input channels, input has " + std::to_string(gm.cin));
  if (bias.defined()) {
    require(bias.rank() == 1 && bias.dim(0) == cout, "conv2d: bias must be [Cout]");
  }
  gm.oh = conv_out_size(gm.h, gm.k, opt);
  gm.ow = conv_out_size(gm.w, gm.k, opt);
  require(gm.oh >= 1 && gm.ow >= 1,
          "conv2d: output would be empty for input " + shape_str(x.shape()));

  Shape os = off ? Shape{batch, cout, gm.oh, gm.ow} : Shape{cout, gm.oh, gm.ow};
  Tensor<T> out(os);
  const std::size_t in_block = gm.cin * gm.h * gm.w;
  const std::size_t out_block = cout * gm.col_cols();
  const std::size_t col_block = gm.col_rows() * gm.col_cols();
  std::vector<T> cols;
  if (!gm.pointwise()) cols.resize(batch * col_block);
  for (std::size_t bi = 0; bi < batch; ++bi) {
    const T* colp = x.ptr() + bi * in_block;
    if (!gm.pointwise()) {
      im2col(x.ptr() + bi * in_block, gm, cols.data() + bi * col_block);
      colp = cols.data() + bi * col_block;
    }
    T* o = out.ptr() + bi * out_block;
    gemm<T>(false, false, cout, gm.col_cols(), gm.col_rows(), weight.ptr(), colp, o, false);
    if (bias.defined()) {
      for (std::size_t c = 0; c < cout; ++c) {
        T* row = o + c * gm.col_cols();
        for (std::size_t j = 0; j < gm.col_cols(); ++j) row[j] += bias[c];
      }
    }
  }
  MacCounter::add(std::uint64_t(batch) * cout * gm.col_rows() * gm.col_cols());

  return emit<T>("conv2d", out, {x, weight, bias},
                 [x, weight, bias, gm, batch, cout, in_block, out_block, col_block,
                  cols = std::move(cols)](std::span<const T> g) mutable {
                   std::vector<T> dcol;
                   for (std::size_t bi = 0; bi < batch; ++bi) {
                     const T* gb = g.data() + bi * out_block;
                     const T* colp = gm.pointwise() ? x.ptr() + bi * in_block
                                                    : cols.data() + bi * col_block;
                     if (weight.requires_grad()) {
                       gemm<T>(false, true, cout, gm.col_rows(), gm.col_cols(), gb, colp,
                               weight.mutable_grad().data(), true);
                     }
                     if (bias.defined() && bias.requires_grad()) {
                       auto gbias = bias.mutable_grad();
                       for (std::size_t c = 0; c < cout; ++c) {
                         T acc = 0;
                         for (std::size_t j = 0; j < gm.col_cols(); ++j) {
                           acc += gb[c * gm.col_cols() + j];
                         }
                         gbias[c] += acc;
                       }
                     }
                     if (x.requires_grad()) {
                       T* dx = x.mutable_grad().data() + bi * in_block;
                       if (gm.pointwise()) {
                         gemm<T>(true, false, gm.col_rows(), gm.col_cols(), cout, weight.ptr(),
                                 gb, dx, true);
                       } else {
                         dcol.resize(col_block);
                         gemm<T>(true, false, gm.col_rows(), gm.col_cols(), cout, weight.ptr(),
                                 gb, dcol.data(), false);
                         col2im_add(dcol.data(), gm, dx);
                       }
                     }
                   }
                 });
}

namespace {

struct Lerp {
  std::size_t i0, i1;
  double w1;  // weight of i1; i0 gets 1 - w1
};

std::vector<Lerp> lerp_table(std::size_t in, std::size_t out) {
  std::vector<Lerp> t(out);
  const double ratio = double(in) / double(out);
  for (std::size_t o = 0; o < out; ++o) {
    double src = (double(o) + 0.5) * ratio - 0.5;
    if (src < 0) src = 0;
    std::size_t i0 = std::min(std::size_t(src), in - 1);
    std::size_t i1 = std::min(i0 + 1, in - 1);
    t[o] = {i0, i1, src - double(i0)};
  }
  return t;
}

}  // namespace

template <typename T>
Tensor<T> bilinear_upsample(const Tensor<T>& x, std::size_t out_h, std::size_t out_w) {
  require(x.rank() >= 2, "bilinear_upsample: need at least 2 dims");
  require(out_h >= 1 && out_w >= 1, "bilinear_upsample: output size must be positive");
  const std::size_t h = x.dim(x.rank() - 2), w = x.dim(x.rank() - 1);
  const std::size_t planes = x.numel() / (h * w);
  Shape os = x.shape();
  os[os.size() - 2] = out_h;
  os[os.size() - 1] = out_w;
  auto ty = lerp_table(h, out_h);
  auto tx = lerp_table(w, out_w);
  Tensor<T> out(os);
  for (std::size_t p = 0; p < planes; ++p) {
    const T* src = x.ptr() + p * h * w;
    T* dst = out.ptr() + p * out_h * out_w;
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      const auto& ly = ty[oy];
      const T wy1 = T(ly.w1), wy0 = T(1) - wy1;
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        const auto& lx = tx[ox];
        const T wx1 = T(lx.w1), wx0 = T(1) - wx1;
        dst[oy * out_w + ox] =
            wy0 * (wx0 * src[ly.i0 * w + lx.i0] + wx1 * src[ly.i0 * w + lx.i1]) +
            wy1 * (wx0 * src[ly.i1 * w + lx.i0] + wx1 * src[ly.i1 * w + lx.i1]);
      }
    }
  }
  return emit<T>("bilinear_upsample", out, {x},
                 [x, ty, tx, planes, h, w, out_h, out_w](std::span<const T> g) mutable {
                   auto gx = x.mutable_grad();
                   for (std::size_t p = 0; p < planes; ++p) {
                     T* dsrc = gx.data() + p * h * w;
                     const T* gp = g.data() + p * out_h * out_w;
                     for (std::size_t oy = 0; oy < out_h; ++oy) {
                       const auto& ly = ty[oy];
                       const T wy1 = T(ly.w1), wy0 = T(1) - wy1;
                       for (std::size_t ox = 0; ox < out_w; ++ox) {
                         const auto& lx = tx[ox];
                         const T wx1 = T(lx.w1), wx0 = T(1) - wx1;
                         const T v = gp[oy * out_w + ox];
                         dsrc[ly.i0 * w + lx.i0] += v * wy0 * wx0;
                         dsrc[ly.i0 * w + lx.i1] += v * wy0 * wx1;
                         dsrc[ly.i1 * w + lx.i0] += v * wy1 * wx0;
                         dsrc[ly.i1 * w + lx.i1] += v * wy1 * wx1;
                       }
                     }
                   }
                 });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  require(shape_numel(shape) == x.numel(),
          "reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  Tensor<T> out(std::move(shape), std::vector<T>(x.data().begin(), x.data().end()));
  return emit<T>("reshape", out, {x}, [x](std::span<const T> g) mutable {
    auto gx = x.mutable_grad();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

namespace {

// For each output flat index, the input flat index it reads.
std::vector<std::size_t> permute_index(const Shape& in, const std::vector<std::size_t>& perm) {
  const std::size_t r = in.size();
  std::vector<std::size_t> in_stride(r, 1);
  for (std::size_t i = r; i-- > 1;) in_stride[i - 1] = in_stride[i] * in[i];
  Shape os(r);
  std::vector<std::size_t> stride(r);
  for (std::size_t i = 0; i < r; ++i) {
    os[i] = in[perm[i]];
    stride[i] = in_stride[perm[i]];
  }
  std::vector<std::size_t> map(shape_numel(in));
  std::vector<std::size_t> idx(r, 0);
  std::size_t src = 0;
  for (std::size_t o = 0; o < map.size(); ++o) {
    map[o] = src;
    for (std::size_t ax = r; ax-- > 0;) {
      if (++idx[ax] < os[ax]) {
        src += stride[ax];
        break;
      }
      src -= stride[ax] * (os[ax] - 1);
      idx[ax] = 0;
    }
  }
  return map;
}

}  // namespace

template <typename T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<std::size_t>& perm) {
  require(perm.size() == x.rank(), "permute: axis list must cover every axis");
  std::vector<bool> seen(perm.size(), false);
  for (auto p : perm) {
    require(p < perm.size() && !seen[p], "permute: axes must be a permutation");
    seen[p] = true;
  }
  Shape os(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) os[i] = x.dim(perm[i]);
  auto map = permute_index(x.shape(), perm);
  Tensor<T> out(os);
  for (std::size_t o = 0; o < map.size(); ++o) out[o] = x[map[o]];
  return emit<T>("permute", out, {x}, [x, map = std::move(map)](std::span<const T> g) mutable {
    auto gx = x.mutable_grad();
    for (std::size_t o = 0; o < g.size(); ++o) gx[map[o]] += g[o];
  });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& x) {
  require(x.rank() == 2, "transpose: expected a 2-D tensor, got " + shape_str(x.shape()));
  return permute(x, {1, 0});
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis) {
  require(!parts.empty(), "concat: no inputs");
  const Shape& ref = parts[0].shape();
  require(axis < ref.size(), "concat: axis out of range");
  Shape os = ref;
  os[axis] = 0;
  for (const auto& p : parts) {
    bool ok = p.rank() == ref.size();
    for (std::size_t i = 0; ok && i < ref.size(); ++i) ok = (i == axis) || p.dim(i) == ref[i];
    require(ok, "concat: " + shape_str(p.shape()) + " incompatible with " + shape_str(ref) +
                    " along axis " + std::to_string(axis));
    os[axis] += p.dim(axis);
  }
  const auto s = split_at(os, axis);
  Tensor<T> out(os);
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const std::size_t block = p.dim(axis) * s.inner;
    for (std::size_t o = 0; o < s.outer; ++o) {
      std::copy_n(p.ptr() + o * block, block, out.ptr() + o * s.n * s.inner + off * s.inner);
    }
    off += p.dim(axis);
  }
  return emit_vec<T>("concat", out, parts,
                     [parts, offsets, s, axis](std::span<const T> g) mutable {
                       for (std::size_t k = 0; k < parts.size(); ++k) {
                         auto& p = parts[k];
                         if (!p.requires_grad()) continue;
                         auto gp = p.mutable_grad();
                         const std::size_t block = p.dim(axis) * s.inner;
                         for (std::size_t o = 0; o < s.outer; ++o) {
                           const T* src = g.data() + o * s.n * s.inner + offsets[k] * s.inner;
                           T* dst = gp.data() + o * block;
                           for (std::size_t j = 0; j < block; ++j) dst[j] += src[j];
                         }
                       }
                     });
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t begin, std::size_t end) {
  require(axis < x.rank() && begin < end && end <= x.dim(axis),
          "slice: bad range [" + std::to_string(begin) + "," + std::to_string(end) +
              ") on axis " + std::to_string(axis) + " of " + shape_str(x.shape()));
  const auto s = split_at(x.shape(), axis);
  Shape os = x.shape();
  os[axis] = end - begin;
  Tensor<T> out(os);
  const std::size_t block = (end - begin) * s.inner;
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(x.ptr() + o * s.n * s.inner + begin * s.inner, block, out.ptr() + o * block);
  }
  return emit<T>("slice", out, {x}, [x, s, begin, block](std::span<const T> g) mutable {
    auto gx = x.mutable_grad();
    for (std::size_t o = 0; o < s.outer; ++o) {
      T* dst = gx.data() + o * s.n * s.inner + begin * s.inner;
      for (std::size_t j = 0; j < block; ++j) dst[j] += g[o * block + j];
    }
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  double acc = 0;
  for (T v : x.data()) acc += v;
  Tensor<T> out = Tensor<T>::scalar(T(acc));
  return emit<T>("sum", out, {x}, [x](std::span<const T> g) mutable {
    auto gx = x.mutable_grad();
    for (auto& v : gx) v += g[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  return scale(sum(x), T(1) / T(x.numel()));
}

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const std::int32_t> targets,
                        std::int32_t ignore_id) {
  require(logits.rank() == 2, "cross_entropy: logits must be [N,P], got " +
                                  shape_str(logits.shape()));
  const std::size_t n = logits.dim(0), p = logits.dim(1);
  require(targets.size() == p, "cross_entropy: " + std::to_string(targets.size()) +
                                   " targets for " + std::to_string(p) + " positions");
  std::vector<T> probs(n * p, T(0));
  std::vector<std::int32_t> tgt(targets.begin(), targets.end());
  double total = 0;
  std::size_t count = 0;
  for (std::size_t j = 0; j < p; ++j) {
    const std::int32_t t = tgt[j];
    if (t == ignore_id) continue;
    if (t < 0 || std::size_t(t) >= n) {
      throw DataError("cross_entropy: target " + std::to_string(t) + " at position " +
                      std::to_string(j) + " outside [0," + std::to_string(n) + ")");
    }
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t c = 0; c < n; ++c) mx = std::max(mx, logits[c * p + j]);
    double z = 0;
    for (std::size_t c = 0; c < n; ++c) {
      const double e = std::exp(double(logits[c * p + j] - mx));
      probs[c * p + j] = T(e);
      z += e;
    }
    for (std::size_t c = 0; c < n; ++c) probs[c * p + j] = T(double(probs[c * p + j]) / z);
    total += std::log(z) + double(mx) - double(logits[std::size_t(t) * p + j]);
    ++count;
  }
  Tensor<T> out = Tensor<T>::scalar(count ? T(total / double(count)) : T(0));
  return emit<T>("cross_entropy", out, {logits},
                 [logits, probs = std::move(probs), tgt = std::move(tgt), n, p, count,
                  ignore_id](std::span<const T> g) mutable {
                   auto gl = logits.mutable_grad();
                   if (count == 0) return;
                   const T w = g[0] / T(count);
                   for (std::size_t j = 0; j < p; ++j) {
                     if (tgt[j] == ignore_id) continue;
                     for (std::size_t c = 0; c < n; ++c) {
                       T d = probs[c * p + j] - (std::size_t(tgt[j]) == c ? T(1) : T(0));
                       gl[c * p + j] += w * d;
                     }
                   }
                 });
}

#define T2S_INSTANTIATE_OPS(T)                                                               \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> matmul_nt(const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> scale(const Tensor<T>&, T);                                             \
  template Tensor<T> add_bias(const Tensor<T>&, const Tensor<T>&);                           \
  template Tensor<T> add_shared(const Tensor<T>&, const Tensor<T>&);                         \
  template Tensor<T> relu(const Tensor<T>&);                                                 \
  template Tensor<T> softmax(const Tensor<T>&, std::size_t);                                 \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);    \
  template Tensor<T> channel_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);  \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,            \
                            Conv2dOptions);                                                  \
  template Tensor<T> bilinear_upsample(const Tensor<T>&, std::size_t, std::size_t);          \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                       \
  template Tensor<T> permute(const Tensor<T>&, const std::vector<std::size_t>&);             \
  template Tensor<T> transpose(const Tensor<T>&);                                            \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, std::size_t);                     \
  template Tensor<T> slice(const Tensor<T>&, std::size_t, std::size_t, std::size_t);         \
  template Tensor<T> sum(const Tensor<T>&);                                                  \
  template Tensor<T> mean(const Tensor<T>&);                                                 \
  template Tensor<T> cross_entropy(const Tensor<T>&, std::span<const std::int32_t>,          \
                                   std::int32_t);

T2S_INSTANTIATE_OPS(float)
T2S_INSTANTIATE_OPS(double)

}  // namespace t2s
