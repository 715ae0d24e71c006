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
#include <vector>

#include "trans2seg/mask.hpp"

namespace t2s {

/// N x N pixel counts; entry (t, p) counts pixels of true class t predicted p.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes)
      : n_(num_classes), counts_(num_classes * num_classes, 0) {}

  std::size_t num_classes() const { return n_; }
  std::uint64_t at(std::size_t truth, std::size_t pred) const { return counts_[truth * n_ + pred]; }
  void add(std::size_t truth, std::size_t pred, std::uint64_t n = 1) {
    counts_[truth * n_ + pred] += n;
  }
  std::uint64_t total() const;
  std::uint64_t trace() const;
  std::uint64_t row_sum(std::size_t truth) const;
  std::uint64_t col_sum(std::size_t pred) const;

  /// Element-wise sum; requires equal class counts.
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  friend ConfusionMatrix operator+(ConfusionMatrix a, const ConfusionMatrix& b) { return a += b; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t n_;
  std::vector<std::uint64_t> counts_;
};

/// Adds one pixel count per position, skipping pixels whose truth is 255.
void accumulate(ConfusionMatrix& cm, const MaskImage& pred, const MaskImage& truth);

/// trace / total. Throws NumericalError on an empty matrix.
double pixel_accuracy(const ConfusionMatrix& cm);

struct IoUReport {
  std::vector<double> iou;     // 0 for excluded classes
  std::vector<bool> included;  // false where the union is empty
  double miou = 0;             // mean over included classes
  std::vector<std::size_t> excluded() const;
};

/// IoU_c = cm[c,c] / (row_c + col_c - cm[c,c]); classes with an empty union
/// are excluded from the mean. Throws NumericalError on an empty matrix.
IoUReport iou_per_class(const ConfusionMatrix& cm);
double miou(const ConfusionMatrix& cm);

/// Connected components of the class-c region under 8-connectivity.
std::size_t count_components(const MaskImage& mask, std::uint8_t cls);

/// Number of masks containing at least one class-c pixel.
std::size_t images_containing(const std::vector<MaskImage>& masks, std::uint8_t cls);

/// Mean connected components: total class-c components over all masks
/// divided by the number of masks containing class c. Throws NumericalError
/// if no mask contains c.
double cmcc(const std::vector<MaskImage>& masks, std::uint8_t cls);

/// Class-c pixels over all foreground (non-background, non-ignore) pixels.
/// Throws NumericalError if there are no foreground pixels.
double pixel_ratio(const std::vector<MaskImage>& masks, std::uint8_t cls);

}  // namespace t2s
