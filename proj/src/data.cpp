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

#include "trans2seg/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "trans2seg/ops.hpp"
#include "trans2seg/params.hpp"

namespace fs = std::filesystem;

namespace t2s {

TensorF to_tensor(const RgbImage& image) {
  const std::size_t plane = image.width * image.height;
  if (image.pixels.size() != 3 * plane) throw DataError("RGB buffer size does not match dims");
  TensorF t({3, image.height, image.width});
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t c = 0; c < 3; ++c) t[c * plane + i] = float(image.pixels[3 * i + c]) / 255.f;
  }
  return t;
}

RgbImage to_rgb(const TensorF& image) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw DimensionError("to_rgb expects [3,H,W], got " + shape_str(image.shape()));
  }
  RgbImage out{image.dim(2), image.dim(1), {}};
  const std::size_t plane = out.width * out.height;
  out.pixels.resize(3 * plane);
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      const float v = std::clamp(image[c * plane + i], 0.f, 1.f);
      out.pixels[3 * i + c] = std::uint8_t(std::lround(v * 255.f));
    }
  }
  return out;
}

std::vector<Sample> load_dataset(const fs::path& split_dir, std::size_t num_classes) {
  std::vector<Sample> out;
  const fs::path images = split_dir / "images";
  const fs::path masks = split_dir / "masks";
  if (!fs::is_directory(images)) return out;
  std::vector<std::string> stems;
  for (const auto& entry : fs::directory_iterator(images)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") {
      stems.push_back(entry.path().stem().string());
    }
  }
  std::sort(stems.begin(), stems.end());
  for (const auto& stem : stems) {
    const fs::path mask_path = masks / (stem + ".png");
    if (!fs::is_regular_file(mask_path)) {
      throw DataError("sample '" + stem + "' has no mask at " + mask_path.string());
    }
    RgbImage rgb = read_rgb_png(images / (stem + ".png"));
    MaskImage mask = read_mask_png(mask_path);
    if (rgb.width != mask.width || rgb.height != mask.height) {
      throw DataError("sample '" + stem + "': image is " + std::to_string(rgb.width) + "x" +
                      std::to_string(rgb.height) + " but mask is " + std::to_string(mask.width) +
                      "x" + std::to_string(mask.height));
    }
    for (auto v : mask.labels) {
      if (v != kIgnoreLabel && v >= num_classes) {
        throw DataError("sample '" + stem + "': mask value " + std::to_string(v) +
                        " is not a class id for " + std::to_string(num_classes) + " classes");
      }
    }
    out.push_back({to_tensor(rgb), std::move(mask), stem, {}});
  }
  return out;
}

void write_dataset(const fs::path& split_dir, const std::vector<Sample>& samples) {
  fs::create_directories(split_dir / "images");
  fs::create_directories(split_dir / "masks");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    char fallback[32];
    std::snprintf(fallback, sizeof(fallback), "%06zu", i);
    const std::string stem = s.stem.empty() ? fallback : s.stem;
    write_rgb_png(split_dir / "images" / (stem + ".png"), to_rgb(s.image));
    write_mask_png(split_dir / "masks" / (stem + ".png"), s.mask);
  }
}

namespace {

// Shape families in coordinates normalized by the object radius.
bool inside_family(std::size_t family, double dx, double dy) {
  const double ax = std::abs(dx), ay = std::abs(dy);
  switch (family % 8) {
    case 0:  // disk
      return dx * dx + dy * dy <= 1.0;
    case 1:  // square
      return ax <= 0.8 && ay <= 0.8;
    case 2:  // upward triangle
      return dy >= -0.85 && dy <= 0.85 && ax <= 0.95 * (dy + 0.85) / 1.7;
    case 3:  // diamond
      return ax + ay <= 1.0;
    case 4:  // wide ellipse
      return dx * dx + (dy / 0.55) * (dy / 0.55) <= 1.0;
    case 5: {  // ring
      const double r2 = dx * dx + dy * dy;
      return r2 <= 1.0 && r2 >= 0.16;
    }
    case 6:  // cross
      return (ax <= 0.33 && ay <= 1.0) || (ay <= 0.33 && ax <= 1.0);
    default:  // tall bar
      return ax <= 0.4 && ay <= 1.0;
  }
}

// Evenly spaced hues, one per class.
std::array<double, 3> class_tint(std::size_t cls, std::size_t num_classes) {
  const double hue = double(cls - 1) / double(std::max<std::size_t>(1, num_classes - 1));
  std::array<double, 3> rgb{};
  for (std::size_t c = 0; c < 3; ++c) {
    rgb[c] = 0.5 + 0.5 * std::cos(2 * std::numbers::pi * (hue + double(c) / 3.0));
  }
  return rgb;
}

}  // namespace

std::vector<Sample> synth_dataset(std::uint64_t seed, std::size_t count, std::size_t size,
                                  std::size_t num_classes) {
  if (size == 0 || size % 16 != 0) throw DimensionError("synth size must be a multiple of 16");
  if (num_classes < 2) throw ConfigError("synth needs at least 2 classes");
  std::vector<Sample> out;
  out.reserve(count);
  Rng rng(seed);
  const std::size_t fg = num_classes - 1;
  const std::size_t offset = std::size_t(rng.integer(0, std::int64_t(fg) - 1));
  const std::size_t plane = size * size;
  const double s = double(size);
  for (std::size_t i = 0; i < count; ++i) {
    // Background: base colour plus two oriented gratings plus pixel noise.
    std::vector<double> bg(3 * plane);
    // Near-grey base, so a tint moves colour in a class-specific direction.
    std::array<double, 3> base{};
    const double grey = rng.uniform(0.3, 0.7);
    for (auto& b : base) b = grey + rng.uniform(-0.05, 0.05);
    struct Grating {
      double kx, ky, phase;
      std::array<double, 3> amp;
    };
    std::array<Grating, 2> gratings{};
    for (auto& g : gratings) {
      const double theta = rng.uniform(0, std::numbers::pi);
      const double freq = rng.uniform(1.5, 5.0) * 2 * std::numbers::pi / s;
      g.kx = freq * std::cos(theta);
      g.ky = freq * std::sin(theta);
      g.phase = rng.uniform(0, 2 * std::numbers::pi);
      for (auto& a : g.amp) a = rng.uniform(0.03, 0.15);
    }
    for (std::size_t y = 0; y < size; ++y) {
      for (std::size_t x = 0; x < size; ++x) {
        for (std::size_t c = 0; c < 3; ++c) {
          double v = base[c];
          for (const auto& g : gratings) {
            v += g.amp[c] * std::sin(g.kx * double(x) + g.ky * double(y) + g.phase);
          }
          bg[c * plane + y * size + x] = v + rng.normal(0, 0.02);
        }
      }
    }

    MaskImage mask(size, size, 0);
    std::vector<double> img = bg;
    const std::size_t objects = std::size_t(rng.integer(1, 3));
    for (std::size_t o = 0; o < objects; ++o) {
      const std::size_t cls =
          o == 0 ? 1 + (i + offset) % fg : std::size_t(rng.integer(1, std::int64_t(fg)));
      const double radius = rng.uniform(s / 5.0, s / 3.0);
      const double cx = rng.uniform(radius * 0.6, s - radius * 0.6);
      const double cy = rng.uniform(radius * 0.6, s - radius * 0.6);
      const double alpha = rng.uniform(0.35, 0.5);
      const long shift_x = long(rng.integer(-3, 3)), shift_y = long(rng.integer(-3, 3));
      const auto tint = class_tint(cls, num_classes);
      const std::size_t family = (cls - 1) % 8;
      for (std::size_t y = 0; y < size; ++y) {
        for (std::size_t x = 0; x < size; ++x) {
          const double dx = (double(x) + 0.5 - cx) / radius;
          const double dy = (double(y) + 0.5 - cy) / radius;
          if (!inside_family(family, dx, dy)) continue;
          mask.at(x, y) = std::uint8_t(cls);
          // Refraction-like displacement of the background seen through the object.
          const std::size_t sx = std::size_t(std::clamp<long>(long(x) + shift_x, 0, long(size) - 1));
          const std::size_t sy = std::size_t(std::clamp<long>(long(y) + shift_y, 0, long(size) - 1));
          for (std::size_t c = 0; c < 3; ++c) {
            const double seen = bg[c * plane + sy * size + sx];
            img[c * plane + y * size + x] = (1 - alpha) * seen + alpha * tint[c];
          }
        }
      }
    }

    TensorF image({3, size, size});
    for (std::size_t k = 0; k < 3 * plane; ++k) image[k] = float(std::clamp(img[k], 0.0, 1.0));
    char stem[32];
    std::snprintf(stem, sizeof(stem), "synth_%06zu", i);
    out.push_back({std::move(image), std::move(mask), stem, "synthetic"});
  }
  return out;
}

MaskImage resize_mask_nearest(const MaskImage& mask, std::size_t width, std::size_t height) {
  MaskImage out(width, height);
  for (std::size_t y = 0; y < height; ++y) {
    const std::size_t sy = std::min(
        mask.height - 1, std::size_t((double(y) + 0.5) * double(mask.height) / double(height)));
    for (std::size_t x = 0; x < width; ++x) {
      const std::size_t sx = std::min(
          mask.width - 1, std::size_t((double(x) + 0.5) * double(mask.width) / double(width)));
      out.at(x, y) = mask.at(sx, sy);
    }
  }
  return out;
}

Sample resize_sample(const Sample& sample, std::size_t size) {
  if (sample.image.dim(1) == size && sample.image.dim(2) == size) return sample;
  Sample out = sample;
  out.image = bilinear_upsample(sample.image.clone(), size, size);
  out.mask = resize_mask_nearest(sample.mask, size, size);
  return out;
}

std::vector<std::string> default_class_names(std::size_t num_classes) {
  static const char* kNames[] = {"bg",       "shelf",  "jar", "freezer", "window", "door",
                                 "eyeglass", "cup",    "wall", "bowl",   "bottle", "box"};
  std::vector<std::string> names;
  for (std::size_t i = 0; i < num_classes; ++i) {
    names.push_back(i < std::size(kNames) ? kNames[i] : "class" + std::to_string(i));
  }
  return names;
}

std::array<std::uint8_t, 3> palette_color(std::uint8_t class_id) {
  static constexpr std::array<std::array<std::uint8_t, 3>, 12> kPalette{{
      {0, 0, 0},        // bg
      {255, 127, 14},   // shelf
      {44, 160, 44},    // jar
      {214, 39, 40},    // freezer
      {148, 103, 189},  // window
      {140, 86, 75},    // door
      {129, 129, 129},  // eyeglass
      {31, 119, 180},   // cup
      {188, 189, 34},   // wall
      {23, 190, 207},   // bowl
      {137, 0, 56},     // bottle
      {255, 187, 120},  // box
  }};
  if (class_id == kIgnoreLabel) return {255, 255, 255};
  if (class_id == 0) return kPalette[0];
  return kPalette[1 + (class_id - 1) % 11];
}

RgbImage colorize(const MaskImage& mask) {
  RgbImage out{mask.width, mask.height, std::vector<std::uint8_t>(3 * mask.size())};
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const auto c = palette_color(mask.labels[i]);
    std::copy(c.begin(), c.end(), out.pixels.begin() + long(3 * i));
  }
  return out;
}

}  // namespace t2s
