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
#include <string>

#include "trans2seg/config.hpp"
#include "trans2seg/params.hpp"

namespace t2s {

/// Four-stage CNN feature extractor.
///
/// Each stage is two [conv3x3, channel norm, ReLU] units; the first conv of
/// every stage has stride 2, so stage outputs sit at strides 2/4/8/16. The
/// second conv of the last stage is dilated to widen its receptive field
/// without reducing resolution further. Stage 2 is tapped as Res2.
template <typename T>
class Backbone {
 public:
  struct Output {
    Tensor<T> feature;  // [C, H/16, W/16]
    Tensor<T> res2;     // [C2, H/4, W/4]
  };

  Backbone(const BackboneConfig& cfg, ParamStore<T>& store, Rng& rng,
           const std::string& prefix = "backbone");

  /// image: [3, H, W] with H and W divisible by 16.
  Output forward(const Tensor<T>& image) const;

 private:
  struct Unit {
    Tensor<T> weight, bias, gain, shift;
    std::size_t stride, dilation;
  };
  Tensor<T> apply(const Unit& u, const Tensor<T>& x) const;

  BackboneConfig cfg_;
  std::array<std::array<Unit, 2>, 4> stages_;
};

}  // namespace t2s
