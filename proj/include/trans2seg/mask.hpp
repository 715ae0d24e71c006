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

#include <cstddef>
#include <cstdint>
#include <vector>

namespace t2s {

inline constexpr std::uint8_t kIgnoreLabel = 255;

/// Per-pixel class ids, row-major. 0 is background, 255 is ignore.
struct MaskImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> labels;

  MaskImage() = default;
  MaskImage(std::size_t w, std::size_t h, std::uint8_t fill = 0)
      : width(w), height(h), labels(w * h, fill) {}

  std::uint8_t& at(std::size_t x, std::size_t y) { return labels[y * width + x]; }
  std::uint8_t at(std::size_t x, std::size_t y) const { return labels[y * width + x]; }
  std::size_t size() const { return labels.size(); }

  friend bool operator==(const MaskImage&, const MaskImage&) = default;
};

}  // namespace t2s
