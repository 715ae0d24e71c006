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

#include <array>
#include <cstddef>
#include <string>

namespace t2s {

/// Which parts of the pipeline are present.
enum class Variant {
  full,        // backbone + transformer encoder + prototype decoder + small conv head
  no_dec,      // backbone + transformer encoder + CNN decoder
  no_enc_dec,  // backbone + CNN decoder (FCN-style baseline)
};

/// Transformer capacity presets: (embed dim, layers, mlp ratio).
enum class Scale { small, medium, large };

struct ScalePreset {
  std::size_t embed_dim;
  std::size_t layers;
  std::size_t mlp_ratio;
};

ScalePreset scale_preset(Scale scale);

std::string to_string(Variant v);
std::string to_string(Scale s);
Variant parse_variant(const std::string& s);
Scale parse_scale(const std::string& s);

struct BackboneConfig {
  /// Output widths of the four stages; the last must equal the embed dim.
  std::array<std::size_t, 4> stage_channels{16, 32, 64, 128};
  std::size_t last_stage_dilation = 2;

  /// Width of the stride-4 tap (stage 2 output).
  std::size_t res2_channels() const { return stage_channels[1]; }
};

struct HeadConfig {
  std::size_t hidden_channels = 64;
};

struct ModelConfig {
  std::size_t embed_dim = 128;
  std::size_t enc_layers = 1;
  std::size_t dec_layers = 1;
  std::size_t heads = 4;
  std::size_t mlp_ratio = 2;
  std::size_t num_classes = 12;  // background is class 0
  std::size_t input_size = 64;   // H = W
  BackboneConfig backbone;
  HeadConfig head;
  Variant variant = Variant::full;
  /// Single-head decoder without projections, norms, residuals or FFN: each
  /// layer computes softmax(E F_e^T) F_e and the map is E F_e^T.
  bool literal_decoder = false;

  std::size_t feature_size() const { return input_size / 16; }
  std::size_t tokens() const { return feature_size() * feature_size(); }

  /// Applies a capacity preset to embed dim, both layer counts, mlp ratio and
  /// the last backbone stage width.
  void apply_scale(Scale scale);

  /// Throws ConfigError naming the first violated invariant.
  void validate() const;
};

}  // namespace t2s
