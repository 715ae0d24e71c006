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
#include <vector>

#include "trans2seg/config.hpp"
#include "trans2seg/params.hpp"

namespace t2s {

/// Q/K/V/output projections, stored [in, out] so a projection is x W + b.
/// Undefined weights mean "no projection" (identity).
template <typename T>
struct AttentionWeights {
  Tensor<T> wq, bq, wk, bk, wv, bv, wo, bo;

  static AttentionWeights create(ParamStore<T>& store, const std::string& prefix,
                                 std::size_t dim, Rng& rng);
};

template <typename T>
struct AttentionOutput {
  Tensor<T> out;      // [Tq, C]
  Tensor<T> weights;  // [M, Tq, Tk], post-softmax
};

/// Scaled dot-product attention over `heads` heads of width C/heads.
/// With `scaled` false the 1/sqrt(C/M) factor is dropped.
template <typename T>
AttentionOutput<T> multi_head_attention(const Tensor<T>& q, const Tensor<T>& k,
                                        const Tensor<T>& v, const AttentionWeights<T>& w,
                                        std::size_t heads, bool scaled = true);

/// [T, C] -> [M, T, C/M] and back.
template <typename T>
Tensor<T> split_heads(const Tensor<T>& x, std::size_t heads);
template <typename T>
Tensor<T> merge_heads(const Tensor<T>& x);

template <typename T>
struct FeedForward {
  Tensor<T> w1, b1, w2, b2;

  static FeedForward create(ParamStore<T>& store, const std::string& prefix, std::size_t dim,
                            std::size_t hidden, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x) const;
};

template <typename T>
struct NormParams {
  Tensor<T> gain, bias;
  static NormParams create(ParamStore<T>& store, const std::string& prefix, std::size_t dim);
  Tensor<T> forward(const Tensor<T>& x) const;
};

/// Pre-norm self-attention encoder over the flattened stride-16 feature map
/// with a learned positional table of shape [T, C].
template <typename T>
class TransformerEncoder {
 public:
  TransformerEncoder(const ModelConfig& cfg, ParamStore<T>& store, Rng& rng,
                     const std::string& prefix = "encoder");

  /// feature [C,h,w] -> encoded [h*w, C].
  Tensor<T> forward(const Tensor<T>& feature) const;

  /// One pre-norm layer: x + MHA(LN(x)), then + FFN(LN(.)).
  Tensor<T> layer_forward(std::size_t i, const Tensor<T>& x) const;

  const Tensor<T>& positional() const { return pos_; }

 private:
  struct Layer {
    NormParams<T> norm1, norm2;
    AttentionWeights<T> attn;
    FeedForward<T> ffn;
  };
  std::size_t dim_, heads_;
  Tensor<T> pos_;
  std::vector<Layer> layers_;
  NormParams<T> final_norm_;
};

/// Class-prototype decoder: N learnable queries cross-attend to the encoded
/// feature; the final map holds per-head query/key logits [N, M, T].
template <typename T>
class PrototypeDecoder {
 public:
  PrototypeDecoder(const ModelConfig& cfg, ParamStore<T>& store, Rng& rng,
                   const std::string& prefix = "decoder");

  /// One prototype update. Full mode: E + MHA(LN(E), F_e, F_e), then + FFN(LN(.)).
  /// Literal mode: softmax(E F_e^T) F_e.
  Tensor<T> layer_forward(std::size_t i, const Tensor<T>& prototypes,
                          const Tensor<T>& encoded) const;

  /// Runs every layer from `prototypes` and returns the pre-softmax map [N, M, T].
  Tensor<T> forward(const Tensor<T>& prototypes, const Tensor<T>& encoded) const;

  /// Same, starting from the learned prototype table.
  Tensor<T> forward(const Tensor<T>& encoded) const { return forward(prototypes_, encoded); }

  /// Pre-softmax per-head logits between prototypes and F_e using the last
  /// layer's query/key projections.
  Tensor<T> attention_map(const Tensor<T>& prototypes, const Tensor<T>& encoded) const;

  const Tensor<T>& prototypes() const { return prototypes_; }
  std::size_t layers() const { return layers_.size(); }

 private:
  struct Layer {
    NormParams<T> norm1, norm2;
    AttentionWeights<T> attn;
    FeedForward<T> ffn;
  };
  std::size_t dim_, heads_;
  bool literal_;
  Tensor<T> prototypes_;
  std::vector<Layer> layers_;
};

}  // namespace t2s
