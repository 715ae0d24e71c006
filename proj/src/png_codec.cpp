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

#include <png.h>

#include <cstring>
#include <fstream>
#include <iterator>

#include "trans2seg/data.hpp"

namespace t2s {

namespace {

struct ReadCursor {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;
};

void on_png_error(png_structp png, png_const_charp msg) {
  auto* err = static_cast<std::string*>(png_get_error_ptr(png));
  if (err) *err = msg;
  png_longjmp(png, 1);
}

void on_png_warning(png_structp, png_const_charp) {}

void read_bytes(png_structp png, png_bytep out, png_size_t n) {
  auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cur->pos + n > cur->bytes.size()) png_error(png, "unexpected end of PNG data");
  std::memcpy(out, cur->bytes.data() + cur->pos, n);
  cur->pos += n;
}

void write_bytes(png_structp png, png_bytep data, png_size_t n) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + n);
}

void flush_bytes(png_structp) {}

// Encodes 8-bit rows with `channels` samples per pixel (1 = gray, 3 = RGB).
std::vector<std::uint8_t> encode(const std::uint8_t* pixels, std::size_t width,
                                 std::size_t height, int channels) {
  if (width == 0 || height == 0) throw DataError("cannot encode an empty image");
  std::vector<std::uint8_t> out;
  std::string err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, on_png_error,
                                            on_png_warning);
  if (!png) throw DataError("png: out of memory");
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("png encode failed: " + err);
  }
  png_set_write_fn(png, &out, write_bytes, flush_bytes);
  png_set_IHDR(png, info, png_uint_32(width), png_uint_32(height), 8,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = width * std::size_t(channels);
  for (std::size_t y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(pixels + y * stride));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

// Decodes to 8-bit with the requested channel count (1 or 3).
std::vector<std::uint8_t> decode(std::span<const std::uint8_t> bytes, int channels,
                                 std::size_t& width, std::size_t& height,
                                 bool& was_single_channel) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    throw DataError("not a PNG file");
  }
  ReadCursor cursor{bytes, 0};
  std::string err;
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, on_png_error, on_png_warning);
  if (!png) throw DataError("png: out of memory");
  png_infop info = png_create_info_struct(png);
  // Declared before setjmp so a longjmp never skips their construction.
  std::vector<std::uint8_t> pixels;
  std::vector<png_bytep> rows;
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("png decode failed: " + err);
  }
  png_set_read_fn(png, &cursor, read_bytes);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  was_single_channel = (color == PNG_COLOR_TYPE_GRAY);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (channels == 3 && (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)) {
    png_set_gray_to_rgb(png);
  }
  if (channels == 1 && (color & PNG_COLOR_MASK_COLOR)) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("expected a single-channel PNG, got a colour image");
  }
  png_read_update_info(png, info);
  width = png_get_image_width(png, info);
  height = png_get_image_height(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  if (rowbytes != width * std::size_t(channels)) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("unsupported PNG pixel layout");
  }
  pixels.resize(rowbytes * height);
  rows.resize(height);
  for (std::size_t y = 0; y < height; ++y) rows[y] = pixels.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return pixels;
}

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
}

}  // namespace

std::vector<std::uint8_t> encode_mask_png(const MaskImage& mask) {
  return encode(mask.labels.data(), mask.width, mask.height, 1);
}

MaskImage decode_mask_png(std::span<const std::uint8_t> bytes) {
  MaskImage m;
  bool single = false;
  m.labels = decode(bytes, 1, m.width, m.height, single);
  return m;
}

std::vector<std::uint8_t> encode_rgb_png(const RgbImage& image) {
  return encode(image.pixels.data(), image.width, image.height, 3);
}

RgbImage decode_rgb_png(std::span<const std::uint8_t> bytes) {
  RgbImage img;
  bool single = false;
  img.pixels = decode(bytes, 3, img.width, img.height, single);
  return img;
}

MaskImage read_mask_png(const std::filesystem::path& path) {
  try {
    return decode_mask_png(slurp(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_mask_png(const std::filesystem::path& path, const MaskImage& mask) {
  spit(path, encode_mask_png(mask));
}

RgbImage read_rgb_png(const std::filesystem::path& path) {
  try {
    return decode_rgb_png(slurp(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_rgb_png(const std::filesystem::path& path, const RgbImage& image) {
  spit(path, encode_rgb_png(image));
}

}  // namespace t2s
