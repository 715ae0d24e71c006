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

#include "trans2seg/backbone.hpp"

#include <cmath>

#include "trans2seg/ops.hpp"

namespace t2s {

template <typename T>
Backbone<T>::Backbone(const BackboneConfig& cfg, ParamStore<T>& store, Rng& rng,
                      const std::string& prefix)
    : cfg_(cfg) {
  std::size_t in = 3;
  for (std::size_t s = 0; s < 4; ++s) {
    const std::size_t out = cfg.stage_channels[s];
    for (std::size_t u = 0; u < 2; ++u) {
      const std::string name = prefix + ".stage" + std::to_string(s + 1) + ".conv" +
                               std::to_string(u + 1);
      const std::size_t cin = u == 0 ? in : out;
      // He initialization for ReLU stacks.
      const double stddev = std::sqrt(2.0 / double(cin * 9));
      Unit& unit = stages_[s][u];
      unit.weight = store.normal(name + ".weight", {out, cin, 3, 3}, stddev, rng);
      unit.bias = store.constant(name + ".bias", {out}, T(0));
      unit.gain = store.constant(name + ".norm.gain", {out}, T(1));
      unit.shift = store.constant(name + ".norm.bias", {out}, T(0));
      unit.stride = u == 0 ? 2 : 1;
      unit.dilation = (s == 3 && u == 1) ? cfg.last_stage_dilation : 1;
    }
    in = out;
  }
}

template <typename T>
Tensor<T> Backbone<T>::apply(const Unit& u, const Tensor<T>& x) const {
  Conv2dOptions opt{u.stride, u.dilation, u.dilation};
  return relu(channel_norm(conv2d(x, u.weight, u.bias, opt), u.gain, u.shift));
}

template <typename T>
typename Backbone<T>::Output Backbone<T>::forward(const Tensor<T>& image) const {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw DimensionError("backbone expects an image [3,H,W], got " + shape_str(image.shape()));
  }
  if (image.dim(1) % 16 != 0 || image.dim(2) % 16 != 0) {
    throw DimensionError("backbone input " + shape_str(image.shape()) +
                         ": H and W must be divisible by 16");
  }
  Output out;
  Tensor<T> x = image;
  for (std::size_t s = 0; s < 4; ++s) {
    x = apply(stages_[s][0], x);
    x = apply(stages_[s][1], x);
    if (s == 1) out.res2 = x;
  }
  out.feature = x;
  return out;
}

template class Backbone<float>;
template class Backbone<double>;

}  // namespace t2s
