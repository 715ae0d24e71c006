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
#include <iosfwd>
#include <map>
#include <memory>
#include <string>

#include "trans2seg/backbone.hpp"
#include "trans2seg/config.hpp"
#include "trans2seg/conv_head.hpp"
#include "trans2seg/mask.hpp"
#include "trans2seg/params.hpp"
#include "trans2seg/transformer.hpp"

namespace t2s {

/// The segmentation network for one ModelConfig: backbone, optional
/// transformer encoder, and either the prototype decoder with the small conv
/// head (full) or a CNN decoder (ablation variants).
template <typename T>
class SegModel {
 public:
  /// Every intermediate of one forward pass. Members absent from the
  /// configured variant stay undefined.
  struct Trace {
    Tensor<T> feature;  // [C, H/16, W/16]
    Tensor<T> res2;     // [C2, H/4, W/4]
    Tensor<T> encoded;  // [T, C]
    Tensor<T> attn;     // [N, M, T]
    Tensor<T> logits;   // [N, H/4, W/4]
  };

  explicit SegModel(ModelConfig cfg, std::uint64_t seed = 0);

  SegModel(SegModel&&) noexcept = default;
  SegModel& operator=(SegModel&&) noexcept = default;

  /// image [3, S, S] with S = input_size -> logits [N, S/4, S/4].
  Tensor<T> forward(const Tensor<T>& image) const { return trace(image).logits; }
  Trace trace(const Tensor<T>& image) const;

  /// Argmax mask at the image resolution.
  MaskImage predict(const Tensor<T>& image) const;

  const ModelConfig& config() const { return cfg_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }

  const Backbone<T>& backbone() const { return *backbone_; }
  const TransformerEncoder<T>* encoder() const { return encoder_.get(); }
  const PrototypeDecoder<T>* decoder() const { return decoder_.get(); }
  const ConvHead<T>* head() const { return head_.get(); }

  /// Parameter counts per top-level module (name prefix before the first '.').
  std::map<std::string, std::size_t> param_count_by_module() const;

 private:
  ModelConfig cfg_;
  ParamStore<T> params_;
  std::unique_ptr<Backbone<T>> backbone_;
  std::unique_ptr<TransformerEncoder<T>> encoder_;
  std::unique_ptr<PrototypeDecoder<T>> decoder_;
  std::unique_ptr<ConvHead<T>> head_;
  std::unique_ptr<CnnDecoder<T>> cnn_decoder_;
};

/// Forward MACs of one image per module, for the configured input size.
template <typename T>
std::map<std::string, std::uint64_t> count_macs(const SegModel<T>& model);

// Checkpoint container: "T2SG", u32 version, then one record per parameter:
// u32 name length, name bytes, u8 dtype (0 = f32, 1 = f64), u32 rank,
// u64 dims[rank], raw values. All integers and values little-endian.
inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void save_checkpoint(const ParamStore<T>& params, std::ostream& out);
template <typename T>
void save_checkpoint(const ParamStore<T>& params, const std::string& path);

/// Loads values into an existing store. Every parameter must be present with
/// the same shape and no extra records are allowed; violations throw
/// ConfigError naming the parameter.
template <typename T>
void load_checkpoint(ParamStore<T>& params, std::istream& in);
template <typename T>
void load_checkpoint(ParamStore<T>& params, const std::string& path);

}  // namespace t2s
