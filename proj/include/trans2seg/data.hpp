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
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "trans2seg/mask.hpp"
#include "trans2seg/tensor.hpp"

namespace t2s {

/// 8-bit interleaved RGB.
struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // size 3 * width * height

  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

struct Sample {
  TensorF image;  // [3, H, W], values in [0, 1]
  MaskImage mask;
  std::string stem;
  std::string scene;
};

// PNG codec. Masks are 8-bit single-channel with pixel value = class id.
std::vector<std::uint8_t> encode_mask_png(const MaskImage& mask);
MaskImage decode_mask_png(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_rgb_png(const RgbImage& image);
/// Accepts gray, gray+alpha, RGB, RGBA and palette PNGs; returns RGB.
RgbImage decode_rgb_png(std::span<const std::uint8_t> bytes);

MaskImage read_mask_png(const std::filesystem::path& path);
void write_mask_png(const std::filesystem::path& path, const MaskImage& mask);
RgbImage read_rgb_png(const std::filesystem::path& path);
void write_rgb_png(const std::filesystem::path& path, const RgbImage& image);

TensorF to_tensor(const RgbImage& image);
RgbImage to_rgb(const TensorF& image);

/// Loads one split directory holding images/*.png and masks/*.png with
/// matching stems, in lexicographic stem order. A missing directory yields an
/// empty list. Throws DataError for a missing mask, mismatched dimensions, or
/// a mask value >= num_classes other than 255.
std::vector<Sample> load_dataset(const std::filesystem::path& split_dir,
                                 std::size_t num_classes);

/// Writes samples as a split directory readable by load_dataset.
void write_dataset(const std::filesystem::path& split_dir, const std::vector<Sample>& samples);

/// Seeded synthetic corpus of "transparent" shapes over textured backgrounds.
///
/// Every image has a random two-grating texture and 1-3 objects. Each class
/// has a fixed shape family and tint; objects are alpha-blended over a
/// displaced copy of the background so their appearance depends on context.
/// The first object of sample i cycles through the classes, so every class
/// appears once count >= num_classes - 1.
std::vector<Sample> synth_dataset(std::uint64_t seed, std::size_t count, std::size_t size,
                                  std::size_t num_classes);

/// Bilinear image resize and nearest-neighbour mask resize to size x size.
Sample resize_sample(const Sample& sample, std::size_t size);

/// Nearest-neighbour resize of class ids (pixel centres, align_corners=false).
MaskImage resize_mask_nearest(const MaskImage& mask, std::size_t width, std::size_t height);

/// Category names indexed by class id, "bg" first.
std::vector<std::string> default_class_names(std::size_t num_classes);

/// Fixed display palette, index = class id. Entries past 11 repeat.
std::array<std::uint8_t, 3> palette_color(std::uint8_t class_id);

/// Colour-codes a mask with palette_color; ignore pixels are white.
RgbImage colorize(const MaskImage& mask);

}  // namespace t2s
