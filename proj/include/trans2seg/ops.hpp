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

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "trans2seg/tensor.hpp"

// Differentiable tensor ops. Every op is instantiated for float and double,
// records a backward rule on the active tape when any input requires grad, and
// throws NumericalError if it produces a non-finite value.

namespace t2s {

/// Matrix product. 2-D: [p,q]x[q,r] -> [p,r]. 3-D operands are batched over
/// the leading axis: [B,p,q]x[B,q,r] -> [B,p,r].
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

/// a times b-transposed: [p,q]x[r,q] -> [p,r], batched like matmul.
template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor);

/// x[..., C] + bias[C].
template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias);

/// x[B, ...] + shared[...]: the same tensor added to every leading-axis slice.
template <typename T>
Tensor<T> add_shared(const Tensor<T>& x, const Tensor<T>& shared);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);

/// Numerically stable softmax along `axis` (max-subtracted).
template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis);

/// Normalizes every last-axis slice to zero mean, unit (biased) variance, then
/// applies gain and bias.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias,
                     T eps = T(1e-5));

/// For x[C,h,w] or x[B,C,h,w]: normalizes each channel over its spatial
/// positions, then applies per-channel gain and bias.
template <typename T>
Tensor<T> channel_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias,
                       T eps = T(1e-5));

struct Conv2dOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t dilation = 1;
};

/// Cross-correlation of x[Cin,h,w] (or batched x[B,Cin,h,w]) with
/// weight[Cout,Cin,k,k]; bias[Cout] may be an undefined tensor.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 Conv2dOptions opt = {});

/// Output spatial size of conv2d along one axis, or 0 when it would be < 1.
std::size_t conv_out_size(std::size_t in, std::size_t k, const Conv2dOptions& opt);

/// Bilinear resize of the two trailing axes, align_corners=false.
template <typename T>
Tensor<T> bilinear_upsample(const Tensor<T>& x, std::size_t out_h, std::size_t out_w);

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);

/// Axis permutation; output axis i is input axis perm[i]. Copies.
template <typename T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<std::size_t>& perm);

/// 2-D transpose.
template <typename T>
Tensor<T> transpose(const Tensor<T>& x);

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis);

/// Sub-range [begin, end) along `axis`.
template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t begin, std::size_t end);

template <typename T>
Tensor<T> sum(const Tensor<T>& x);

template <typename T>
Tensor<T> mean(const Tensor<T>& x);

/// Mean negative log-softmax over positions of logits[N,P] (class axis 0).
/// Positions whose target equals ignore_id are skipped; if every position is
/// ignored the loss is 0 and the gradient is zero.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const std::int32_t> targets,
                        std::int32_t ignore_id = 255);

}  // namespace t2s
