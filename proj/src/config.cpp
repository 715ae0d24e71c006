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

#include "trans2seg/config.hpp"

#include "trans2seg/errors.hpp"

namespace t2s {

ScalePreset scale_preset(Scale scale) {
  switch (scale) {
    case Scale::small:
      return {128, 1, 2};
    case Scale::medium:
      return {256, 4, 3};
    case Scale::large:
      return {768, 12, 4};
  }
  throw ConfigError("unknown scale");
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::full:
      return "full";
    case Variant::no_dec:
      return "no_dec";
    case Variant::no_enc_dec:
      return "no_enc_dec";
  }
  return "?";
}

std::string to_string(Scale s) {
  switch (s) {
    case Scale::small:
      return "small";
    case Scale::medium:
      return "medium";
    case Scale::large:
      return "large";
  }
  return "?";
}

Variant parse_variant(const std::string& s) {
  if (s == "full") return Variant::full;
  if (s == "no_dec") return Variant::no_dec;
  if (s == "no_enc_dec") return Variant::no_enc_dec;
  throw ConfigError("unknown variant '" + s + "' (expected full, no_dec or no_enc_dec)");
}

Scale parse_scale(const std::string& s) {
  if (s == "small") return Scale::small;
  if (s == "medium") return Scale::medium;
  if (s == "large") return Scale::large;
  throw ConfigError("unknown scale '" + s + "' (expected small, medium or large)");
}

void ModelConfig::apply_scale(Scale scale) {
  const auto p = scale_preset(scale);
  embed_dim = p.embed_dim;
  enc_layers = p.layers;
  dec_layers = p.layers;
  mlp_ratio = p.mlp_ratio;
  backbone.stage_channels[3] = p.embed_dim;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("invalid model config: " + what); };
  if (embed_dim == 0) fail("embed_dim must be positive");
  if (heads == 0) fail("heads must be positive");
  if (embed_dim % heads != 0) {
    fail("embed_dim " + std::to_string(embed_dim) + " not divisible by heads " +
         std::to_string(heads));
  }
  if (num_classes < 2) fail("num_classes must be >= 2 (background is class 0)");
  if (num_classes > 255) fail("num_classes must be <= 255 (255 is the ignore id)");
  if (input_size == 0 || input_size % 16 != 0) fail("input_size must be a positive multiple of 16");
  if (mlp_ratio == 0) fail("mlp_ratio must be positive");
  for (auto c : backbone.stage_channels) {
    if (c == 0) fail("stage_channels must be positive");
  }
  if (backbone.stage_channels[3] != embed_dim) {
    fail("stage_channels[3] (" + std::to_string(backbone.stage_channels[3]) +
         ") must equal embed_dim (" + std::to_string(embed_dim) + ")");
  }
  if (backbone.last_stage_dilation == 0) fail("last_stage_dilation must be positive");
  if (head.hidden_channels == 0) fail("hidden_channels must be positive");
  if (variant == Variant::full && dec_layers == 0) fail("the full variant needs dec_layers >= 1");
  if (literal_decoder && heads != 1) fail("literal_decoder requires heads = 1");
}

}  // namespace t2s
