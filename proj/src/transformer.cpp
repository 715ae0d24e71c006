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

#include "trans2seg/transformer.hpp"

#include <cmath>

#include "trans2seg/ops.hpp"

namespace t2s {

namespace {

constexpr double kEmbeddingStd = 0.02;

template <typename T>
Tensor<T> project(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  if (!w.defined()) return x;
  return add_bias(matmul(x, w), b);
}

}  // namespace

template <typename T>
AttentionWeights<T> AttentionWeights<T>::create(ParamStore<T>& store, const std::string& prefix,
                                                std::size_t dim, Rng& rng) {
  const double stddev = 1.0 / std::sqrt(double(dim));
  AttentionWeights w;
  w.wq = store.normal(prefix + ".q.weight", {dim, dim}, stddev, rng);
  w.bq = store.constant(prefix + ".q.bias", {dim}, T(0));
  w.wk = store.normal(prefix + ".k.weight", {dim, dim}, stddev, rng);
  w.bk = store.constant(prefix + ".k.bias", {dim}, T(0));
  w.wv = store.normal(prefix + ".v.weight", {dim, dim}, stddev, rng);
  w.bv = store.constant(prefix + ".v.bias", {dim}, T(0));
  w.wo = store.normal(prefix + ".out.weight", {dim, dim}, stddev, rng);
  w.bo = store.constant(prefix + ".out.bias", {dim}, T(0));
  return w;
}

template <typename T>
Tensor<T> split_heads(const Tensor<T>& x, std::size_t heads) {
  if (x.rank() != 2 || heads == 0 || x.dim(1) % heads != 0) {
    throw DimensionError("split_heads: cannot split " + shape_str(x.shape()) + " into " +
                         std::to_string(heads) + " heads");
  }
  const std::size_t t = x.dim(0), d = x.dim(1) / heads;
  return permute(reshape(x, {t, heads, d}), {1, 0, 2});
}

template <typename T>
Tensor<T> merge_heads(const Tensor<T>& x) {
  if (x.rank() != 3) throw DimensionError("merge_heads: expected [M,T,d]");
  const std::size_t m = x.dim(0), t = x.dim(1), d = x.dim(2);
  return reshape(permute(x, {1, 0, 2}), {t, m * d});
}

template <typename T>
AttentionOutput<T> multi_head_attention(const Tensor<T>& q, const Tensor<T>& k,
                                        const Tensor<T>& v, const AttentionWeights<T>& w,
                                        std::size_t heads, bool scaled) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2) {
    throw DimensionError("multi_head_attention: q, k, v must be 2-D");
  }
  const std::size_t dim = q.dim(1);
  if (k.dim(1) != dim || v.dim(1) != dim || k.dim(0) != v.dim(0)) {
    throw DimensionError("multi_head_attention: q " + shape_str(q.shape()) + ", k " +
                         shape_str(k.shape()) + ", v " + shape_str(v.shape()) + " disagree");
  }
  if (heads == 0 || dim % heads != 0) {
    throw DimensionError("multi_head_attention: width " + std::to_string(dim) +
                         " not divisible by " + std::to_string(heads) + " heads");
  }
  auto qh = split_heads(project(q, w.wq, w.bq), heads);
  auto kh = split_heads(project(k, w.wk, w.bk), heads);
  auto vh = split_heads(project(v, w.wv, w.bv), heads);
  auto scores = matmul_nt(qh, kh);
  if (scaled) scores = scale(scores, T(1.0 / std::sqrt(double(dim / heads))));
  auto weights = softmax(scores, 2);
  auto mixed = merge_heads(matmul(weights, vh));
  return {project(mixed, w.wo, w.bo), weights};
}

template <typename T>
FeedForward<T> FeedForward<T>::create(ParamStore<T>& store, const std::string& prefix,
                                      std::size_t dim, std::size_t hidden, Rng& rng) {
  FeedForward f;
  f.w1 = store.normal(prefix + ".fc1.weight", {dim, hidden}, std::sqrt(2.0 / double(dim)), rng);
  f.b1 = store.constant(prefix + ".fc1.bias", {hidden}, T(0));
  f.w2 = store.normal(prefix + ".fc2.weight", {hidden, dim}, 1.0 / std::sqrt(double(hidden)),
                      rng);
  f.b2 = store.constant(prefix + ".fc2.bias", {dim}, T(0));
  return f;
}

template <typename T>
Tensor<T> FeedForward<T>::forward(const Tensor<T>& x) const {
  return add_bias(matmul(relu(add_bias(matmul(x, w1), b1)), w2), b2);
}

template <typename T>
NormParams<T> NormParams<T>::create(ParamStore<T>& store, const std::string& prefix,
                                    std::size_t dim) {
  return {store.constant(prefix + ".gain", {dim}, T(1)),
          store.constant(prefix + ".bias", {dim}, T(0))};
}

template <typename T>
Tensor<T> NormParams<T>::forward(const Tensor<T>& x) const {
  return layer_norm(x, gain, bias);
}

template <typename T>
TransformerEncoder<T>::TransformerEncoder(const ModelConfig& cfg, ParamStore<T>& store, Rng& rng,
                                          const std::string& prefix)
    : dim_(cfg.embed_dim), heads_(cfg.heads) {
  pos_ = store.normal(prefix + ".pos_embed", {cfg.tokens(), dim_}, kEmbeddingStd, rng);
  for (std::size_t i = 0; i < cfg.enc_layers; ++i) {
    const std::string p = prefix + ".layer" + std::to_string(i);
    Layer l;
    l.norm1 = NormParams<T>::create(store, p + ".norm1", dim_);
    l.attn = AttentionWeights<T>::create(store, p + ".self_attn", dim_, rng);
    l.norm2 = NormParams<T>::create(store, p + ".norm2", dim_);
    l.ffn = FeedForward<T>::create(store, p + ".ffn", dim_, dim_ * cfg.mlp_ratio, rng);
    layers_.push_back(std::move(l));
  }
  if (!layers_.empty()) final_norm_ = NormParams<T>::create(store, prefix + ".norm", dim_);
}

template <typename T>
Tensor<T> TransformerEncoder<T>::layer_forward(std::size_t i, const Tensor<T>& x) const {
  const Layer& l = layers_.at(i);
  auto h = l.norm1.forward(x);
  auto y = add(x, multi_head_attention(h, h, h, l.attn, heads_).out);
  return add(y, l.ffn.forward(l.norm2.forward(y)));
}

template <typename T>
Tensor<T> TransformerEncoder<T>::forward(const Tensor<T>& feature) const {
  if (feature.rank() != 3 || feature.dim(0) != dim_) {
    throw DimensionError("encoder expects a feature map [" + std::to_string(dim_) +
                         ",h,w], got " + shape_str(feature.shape()));
  }
  const std::size_t tokens = feature.dim(1) * feature.dim(2);
  if (tokens != pos_.dim(0)) {
    throw DimensionError("encoder: feature has " + std::to_string(tokens) +
                         " tokens but the positional embedding has " +
                         std::to_string(pos_.dim(0)) +
                         "; training and inference input sizes must match");
  }
  auto x = add(transpose(reshape(feature, {dim_, tokens})), pos_);
  for (std::size_t i = 0; i < layers_.size(); ++i) x = layer_forward(i, x);
  if (!layers_.empty()) x = final_norm_.forward(x);
  return x;
}

template <typename T>
PrototypeDecoder<T>::PrototypeDecoder(const ModelConfig& cfg, ParamStore<T>& store, Rng& rng,
                                      const std::string& prefix)
    : dim_(cfg.embed_dim), heads_(cfg.heads), literal_(cfg.literal_decoder) {
  prototypes_ =
      store.normal(prefix + ".class_prototypes", {cfg.num_classes, dim_}, kEmbeddingStd, rng);
  for (std::size_t i = 0; i < cfg.dec_layers; ++i) {
    Layer l;
    if (!literal_) {
      const std::string p = prefix + ".layer" + std::to_string(i);
      l.norm1 = NormParams<T>::create(store, p + ".norm1", dim_);
      l.attn = AttentionWeights<T>::create(store, p + ".cross_attn", dim_, rng);
      l.norm2 = NormParams<T>::create(store, p + ".norm2", dim_);
      l.ffn = FeedForward<T>::create(store, p + ".ffn", dim_, dim_ * cfg.mlp_ratio, rng);
    }
    layers_.push_back(std::move(l));
  }
}

template <typename T>
Tensor<T> PrototypeDecoder<T>::layer_forward(std::size_t i, const Tensor<T>& prototypes,
                                             const Tensor<T>& encoded) const {
  if (prototypes.rank() != 2 || encoded.rank() != 2 || prototypes.dim(1) != dim_ ||
      encoded.dim(1) != dim_) {
    throw DimensionError("decoder layer: prototypes " + shape_str(prototypes.shape()) +
                         " and encoded " + shape_str(encoded.shape()) +
                         " must both have width " + std::to_string(dim_));
  }
  if (literal_) {
    return matmul(softmax(matmul_nt(prototypes, encoded), 1), encoded);
  }
  const Layer& l = layers_.at(i);
  auto e = add(prototypes,
               multi_head_attention(l.norm1.forward(prototypes), encoded, encoded, l.attn, heads_)
                   .out);
  return add(e, l.ffn.forward(l.norm2.forward(e)));
}

template <typename T>
Tensor<T> PrototypeDecoder<T>::attention_map(const Tensor<T>& prototypes,
                                             const Tensor<T>& encoded) const {
  if (literal_) {
    auto logits = matmul_nt(prototypes, encoded);
    return reshape(logits, {prototypes.dim(0), 1, encoded.dim(0)});
  }
  const Layer& l = layers_.back();
  auto qh = split_heads(project(l.norm1.forward(prototypes), l.attn.wq, l.attn.bq), heads_);
  auto kh = split_heads(project(encoded, l.attn.wk, l.attn.bk), heads_);
  auto logits = scale(matmul_nt(qh, kh), T(1.0 / std::sqrt(double(dim_ / heads_))));
  return permute(logits, {1, 0, 2});
}

template <typename T>
Tensor<T> PrototypeDecoder<T>::forward(const Tensor<T>& prototypes,
                                       const Tensor<T>& encoded) const {
  if (layers_.empty()) throw ConfigError("decoder needs at least one layer");
  Tensor<T> e = prototypes;
  for (std::size_t i = 0; i < layers_.size(); ++i) e = layer_forward(i, e, encoded);
  return attention_map(e, encoded);
}

#define T2S_INSTANTIATE_TRANSFORMER(T)                                                      \
  template struct AttentionWeights<T>;                                                      \
  template struct FeedForward<T>;                                                           \
  template struct NormParams<T>;                                                            \
  template class TransformerEncoder<T>;                                                     \
  template class PrototypeDecoder<T>;                                                       \
  template Tensor<T> split_heads(const Tensor<T>&, std::size_t);                            \
  template Tensor<T> merge_heads(const Tensor<T>&);                                         \
  template AttentionOutput<T> multi_head_attention(const Tensor<T>&, const Tensor<T>&,      \
                                                   const Tensor<T>&, const AttentionWeights<T>&, \
                                                   std::size_t, bool);

T2S_INSTANTIATE_TRANSFORMER(float)
T2S_INSTANTIATE_TRANSFORMER(double)

}  // namespace t2s
