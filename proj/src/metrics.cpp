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

#include "trans2seg/metrics.hpp"

#include <numeric>
#include <string>

#include "trans2seg/errors.hpp"

namespace t2s {

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t(0));
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t t = 0;
  for (std::size_t c = 0; c < n_; ++c) t += at(c, c);
  return t;
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t truth) const {
  std::uint64_t s = 0;
  for (std::size_t p = 0; p < n_; ++p) s += at(truth, p);
  return s;
}

std::uint64_t ConfusionMatrix::col_sum(std::size_t pred) const {
  std::uint64_t s = 0;
  for (std::size_t t = 0; t < n_; ++t) s += at(t, pred);
  return s;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.n_ != n_) throw DimensionError("cannot merge confusion matrices of different sizes");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

void accumulate(ConfusionMatrix& cm, const MaskImage& pred, const MaskImage& truth) {
  if (pred.width != truth.width || pred.height != truth.height) {
    throw DimensionError("accumulate: prediction " + std::to_string(pred.width) + "x" +
                         std::to_string(pred.height) + " vs truth " +
                         std::to_string(truth.width) + "x" + std::to_string(truth.height));
  }
  const std::size_t n = cm.num_classes();
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto t = truth.labels[i];
    if (t == kIgnoreLabel) continue;
    const auto p = pred.labels[i];
    if (t >= n || p >= n) {
      throw DataError("accumulate: label " + std::to_string(t >= n ? t : p) +
                      " outside [0," + std::to_string(n) + ")");
    }
    cm.add(t, p);
  }
}

double pixel_accuracy(const ConfusionMatrix& cm) {
  const auto total = cm.total();
  if (total == 0) throw NumericalError("pixel accuracy is undefined for an empty confusion matrix");
  return double(cm.trace()) / double(total);
}

std::vector<std::size_t> IoUReport::excluded() const {
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < included.size(); ++c) {
    if (!included[c]) out.push_back(c);
  }
  return out;
}

IoUReport iou_per_class(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw NumericalError("IoU is undefined for an empty confusion matrix");
  const std::size_t n = cm.num_classes();
  IoUReport r;
  r.iou.assign(n, 0.0);
  r.included.assign(n, false);
  double sum = 0;
  std::size_t k = 0;
  for (std::size_t c = 0; c < n; ++c) {
    const auto inter = cm.at(c, c);
    const auto uni = cm.row_sum(c) + cm.col_sum(c) - inter;
    if (uni == 0) continue;
    r.iou[c] = double(inter) / double(uni);
    r.included[c] = true;
    sum += r.iou[c];
    ++k;
  }
  r.miou = sum / double(k);  // k >= 1 because total > 0
  return r;
}

double miou(const ConfusionMatrix& cm) { return iou_per_class(cm).miou; }

std::size_t count_components(const MaskImage& mask, std::uint8_t cls) {
  // Two-pass labelling with union-find over the 8-neighbourhood.
  const std::size_t w = mask.width, h = mask.height;
  std::vector<std::uint32_t> label(w * h, 0);
  std::vector<std::uint32_t> parent{0};
  auto find = [&](std::uint32_t a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  auto unite = [&](std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  };
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      if (mask.at(x, y) != cls) continue;
      std::uint32_t cur = 0;
      // Already-visited neighbours: W, NW, N, NE.
      const long nbr[4][2] = {{-1, 0}, {-1, -1}, {0, -1}, {1, -1}};
      for (const auto& d : nbr) {
        const long nx = long(x) + d[0], ny = long(y) + d[1];
        if (nx < 0 || ny < 0 || nx >= long(w)) continue;
        const std::uint32_t l = label[std::size_t(ny) * w + std::size_t(nx)];
        if (!l) continue;
        if (!cur) {
          cur = l;
        } else {
          unite(cur, l);
        }
      }
      if (!cur) {
        cur = std::uint32_t(parent.size());
        parent.push_back(cur);
      }
      label[y * w + x] = cur;
    }
  }
  std::size_t roots = 0;
  for (std::uint32_t i = 1; i < parent.size(); ++i) roots += find(i) == i;
  return roots;
}

std::size_t images_containing(const std::vector<MaskImage>& masks, std::uint8_t cls) {
  std::size_t n = 0;
  for (const auto& m : masks) {
    for (auto v : m.labels) {
      if (v == cls) {
        ++n;
        break;
      }
    }
  }
  return n;
}

double cmcc(const std::vector<MaskImage>& masks, std::uint8_t cls) {
  std::size_t components = 0, images = 0;
  for (const auto& m : masks) {
    const auto k = count_components(m, cls);
    components += k;
    images += k > 0;
  }
  if (images == 0) {
    throw NumericalError("CMCC undefined: class " + std::to_string(cls) + " appears in no mask");
  }
  return double(components) / double(images);
}

double pixel_ratio(const std::vector<MaskImage>& masks, std::uint8_t cls) {
  std::uint64_t hit = 0, fg = 0;
  for (const auto& m : masks) {
    for (auto v : m.labels) {
      if (v == 0 || v == kIgnoreLabel) continue;
      ++fg;
      hit += v == cls;
    }
  }
  if (fg == 0) throw NumericalError("pixel ratio undefined: no foreground pixels");
  return double(hit) / double(fg);
}

}  // namespace t2s
