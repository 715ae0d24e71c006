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

#include "trans2seg/conv_head.hpp"

#include <cmath>

#include "trans2seg/ops.hpp"

namespace t2s {

template <typename T>
ConvHead<T>::ConvHead(std::size_t heads, std::size_t res2_channels, const HeadConfig& cfg,
                      ParamStore<T>& store, Rng& rng, const std::string& prefix)
    : heads_(heads), res2_channels_(res2_channels) {
  const std::size_t hid = cfg.hidden_channels;
  const double fuse_std = std::sqrt(2.0 / double((heads + res2_channels) * 9));
  fuse_attn_w_ = store.normal(prefix + ".fuse.attn_weight", {hid, heads, 3, 3}, fuse_std, rng);
  fuse_res2_w_ =
      store.normal(prefix + ".fuse.res2_weight", {hid, res2_channels, 3, 3}, fuse_std, rng);
  fuse_b_ = store.constant(prefix + ".fuse.bias", {hid}, T(0));
  gain_ = store.constant(prefix + ".fuse.norm.gain", {hid}, T(1));
  shift_ = store.constant(prefix + ".fuse.norm.bias", {hid}, T(0));
  out_w_ = store.normal(prefix + ".out.weight", {1, hid, 3, 3}, std::sqrt(1.0 / double(hid * 9)),
                        rng);
  out_b_ = store.constant(prefix + ".out.bias", {1}, T(0));
}

template <typename T>
Tensor<T> ConvHead<T>::forward(const Tensor<T>& attn, const Tensor<T>& res2, std::size_t h,
                               std::size_t w) const {
  if (attn.rank() != 3 || attn.dim(1) != heads_ || attn.dim(2) != h * w) {
    throw DimensionError("head: attention map " + shape_str(attn.shape()) + " is not [N," +
                         std::to_string(heads_) + "," + std::to_string(h * w) + "]");
  }
  if (res2.rank() != 3 || res2.dim(0) != res2_channels_) {
    throw DimensionError("head: Res2 " + shape_str(res2.shape()) + " is not [" +
                         std::to_string(res2_channels_) + ",H/4,W/4]");
  }
  const std::size_t n = attn.dim(0), out_h = res2.dim(1), out_w = res2.dim(2);
  if (out_h != 4 * h || out_w != 4 * w) {
    throw DimensionError("head: Res2 grid " + std::to_string(out_h) + "x" +
                         std::to_string(out_w) + " is not 4x the attention grid " +
                         std::to_string(h) + "x" + std::to_string(w));
  }
  const Conv2dOptions same{1, 1, 1};
  auto up = bilinear_upsample(reshape(attn, {n, heads_, h, w}), out_h, out_w);
  auto per_class = conv2d(up, fuse_attn_w_, Tensor<T>(), same);
  auto shared = conv2d(res2, fuse_res2_w_, fuse_b_, same);
  auto hidden = relu(channel_norm(add_shared(per_class, shared), gain_, shift_));
  auto scores = conv2d(hidden, out_w_, out_b_, same);
  return reshape(scores, {n, out_h, out_w});
}

template <typename T>
CnnDecoder<T>::CnnDecoder(std::size_t in_channels, std::size_t num_classes,
                          const HeadConfig& cfg, ParamStore<T>& store, Rng& rng,
                          const std::string& prefix) {
  const std::size_t hid = cfg.hidden_channels;
  w1_ = store.normal(prefix + ".conv.weight", {hid, in_channels, 3, 3},
                     std::sqrt(2.0 / double(in_channels * 9)), rng);
  b1_ = store.constant(prefix + ".conv.bias", {hid}, T(0));
  gain_ = store.constant(prefix + ".norm.gain", {hid}, T(1));
  shift_ = store.constant(prefix + ".norm.bias", {hid}, T(0));
  w2_ = store.normal(prefix + ".classifier.weight", {num_classes, hid, 1, 1},
                     std::sqrt(1.0 / double(hid)), rng);
  b2_ = store.constant(prefix + ".classifier.bias", {num_classes}, T(0));
}

template <typename T>
Tensor<T> CnnDecoder<T>::forward(const Tensor<T>& feature, std::size_t out_h,
                                 std::size_t out_w) const {
  auto x = relu(channel_norm(conv2d(feature, w1_, b1_, {1, 1, 1}), gain_, shift_));
  return bilinear_upsample(conv2d(x, w2_, b2_), out_h, out_w);
}

template <typename T>
MaskImage predict_mask(const Tensor<T>& logits, std::size_t height, std::size_t width) {
  if (logits.rank() != 3) {
    throw DimensionError("predict_mask: logits must be [N,h,w], got " +
                         shape_str(logits.shape()));
  }
  const std::size_t n = logits.dim(0);
  if (n > 255) throw DimensionError("predict_mask: at most 255 classes");
  Tensor<T> plain = logits.clone();  // never recorded
  Tensor<T> up = bilinear_upsample(plain, height, width);
  const std::size_t plane = height * width;
  MaskImage mask(width, height);
  for (std::size_t i = 0; i < plane; ++i) {
    std::size_t best = 0;
    T best_v = up[i];
    for (std::size_t c = 1; c < n; ++c) {
      if (up[c * plane + i] > best_v) {
        best_v = up[c * plane + i];
        best = c;
      }
    }
    mask.labels[i] = std::uint8_t(best);
  }
  return mask;
}

template class ConvHead<float>;
template class ConvHead<double>;
template class CnnDecoder<float>;
template class CnnDecoder<double>;
template MaskImage predict_mask(const Tensor<float>&, std::size_t, std::size_t);
template MaskImage predict_mask(const Tensor<double>&, std::size_t, std::size_t);

}  // namespace t2s
