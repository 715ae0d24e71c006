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

#include <string>

#include "trans2seg/config.hpp"
#include "trans2seg/mask.hpp"
#include "trans2seg/params.hpp"

namespace t2s {

/// Fuses upsampled per-class attention maps with Res2 and scores each class.
///
/// For every class n: upsample attn[n] (M x h x w) to the Res2 grid, concat
/// with Res2 on channels, conv3x3 -> channel norm -> ReLU -> conv3x3 to one
/// channel. One weight set is shared by all classes.
///
/// The first conv's weight is stored as two column blocks, one for the M
/// attention channels and one for the C2 Res2 channels. The Res2 block's
/// response is identical for every class, so it is computed once and added to
/// each class's attention response; the sum equals the conv of the
/// concatenated input.
template <typename T>
class ConvHead {
 public:
  ConvHead(std::size_t heads, std::size_t res2_channels, const HeadConfig& cfg,
           ParamStore<T>& store, Rng& rng, const std::string& prefix = "head");

  /// attn [N,M,T] with T = h*w, res2 [C2,4h,4w] -> logits [N,4h,4w].
  Tensor<T> forward(const Tensor<T>& attn, const Tensor<T>& res2, std::size_t h,
                    std::size_t w) const;

  const Tensor<T>& fuse_attn_weight() const { return fuse_attn_w_; }
  const Tensor<T>& fuse_res2_weight() const { return fuse_res2_w_; }
  const Tensor<T>& fuse_bias() const { return fuse_b_; }
  const Tensor<T>& norm_gain() const { return gain_; }
  const Tensor<T>& norm_bias() const { return shift_; }
  const Tensor<T>& out_weight() const { return out_w_; }
  const Tensor<T>& out_bias() const { return out_b_; }

 private:
  std::size_t heads_, res2_channels_;
  Tensor<T> fuse_attn_w_, fuse_res2_w_, fuse_b_, gain_, shift_, out_w_, out_b_;
};

/// FCN-style decoder used by the ablation variants: conv3x3 -> channel norm
/// -> ReLU -> conv1x1 to N classes at stride 16, then bilinear upsampling to
/// the stride-4 grid.
template <typename T>
class CnnDecoder {
 public:
  CnnDecoder(std::size_t in_channels, std::size_t num_classes, const HeadConfig& cfg,
             ParamStore<T>& store, Rng& rng, const std::string& prefix = "cnn_decoder");

  /// feature [C,h,w] -> logits [N, out_h, out_w].
  Tensor<T> forward(const Tensor<T>& feature, std::size_t out_h, std::size_t out_w) const;

 private:
  Tensor<T> w1_, b1_, gain_, shift_, w2_, b2_;
};

/// Bilinearly resizes logits [N,h,w] to H x W and takes the per-pixel argmax;
/// ties go to the lowest class id.
template <typename T>
MaskImage predict_mask(const Tensor<T>& logits, std::size_t height, std::size_t width);

}  // namespace t2s
