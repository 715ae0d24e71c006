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

// Plain-loop reference implementations. None of them call into the library's
// ops, so agreement with the library is evidence rather than tautology.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <vector>

#include "trans2seg/mask.hpp"
#include "trans2seg/params.hpp"
#include "trans2seg/tensor.hpp"

namespace oracle {

using Vec = std::vector<double>;

template <typename T>
Vec values(const t2s::Tensor<T>& t) {
  return Vec(t.data().begin(), t.data().end());
}

inline double max_abs_diff(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) return INFINITY;
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline t2s::TensorD random(t2s::Shape shape, t2s::Rng& rng, double stddev = 1.0) {
  t2s::TensorD t(std::move(shape));
  for (auto& v : t.data()) v = rng.normal(0.0, stddev);
  return t;
}

// a[p,q] b[q,r] -> [p,r]
inline Vec matmul(const Vec& a, const Vec& b, std::size_t p, std::size_t q, std::size_t r) {
  Vec c(p * r, 0.0);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < r; ++j)
      for (std::size_t k = 0; k < q; ++k) c[i * r + j] += a[i * q + k] * b[k * r + j];
  return c;
}

// a[p,q] b[r,q] -> a b^T [p,r]
inline Vec matmul_nt(const Vec& a, const Vec& b, std::size_t p, std::size_t q, std::size_t r) {
  Vec c(p * r, 0.0);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < r; ++j)
      for (std::size_t k = 0; k < q; ++k) c[i * r + j] += a[i * q + k] * b[j * q + k];
  return c;
}

inline Vec softmax_rows(Vec x, std::size_t rows, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    double m = -INFINITY;
    for (std::size_t j = 0; j < cols; ++j) m = std::max(m, x[i * cols + j]);
    double s = 0;
    for (std::size_t j = 0; j < cols; ++j) s += (x[i * cols + j] = std::exp(x[i * cols + j] - m));
    for (std::size_t j = 0; j < cols; ++j) x[i * cols + j] /= s;
  }
  return x;
}

// Six nested loops over (co, oy, ox, ci, ky, kx); zero padding.
inline Vec conv2d(const Vec& x, std::size_t cin, std::size_t h, std::size_t w, const Vec& wt,
                  std::size_t cout, std::size_t k, const Vec* bias, std::size_t stride,
                  std::size_t pad, std::size_t dil, std::size_t& oh, std::size_t& ow) {
  oh = (h + 2 * pad - dil * (k - 1) - 1) / stride + 1;
  ow = (w + 2 * pad - dil * (k - 1) - 1) / stride + 1;
  Vec y(cout * oh * ow, 0.0);
  for (std::size_t co = 0; co < cout; ++co)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        double acc = bias ? (*bias)[co] : 0.0;
        for (std::size_t ci = 0; ci < cin; ++ci)
          for (std::size_t ky = 0; ky < k; ++ky)
            for (std::size_t kx = 0; kx < k; ++kx) {
              const long iy = long(oy * stride + ky * dil) - long(pad);
              const long ix = long(ox * stride + kx * dil) - long(pad);
              if (iy < 0 || ix < 0 || iy >= long(h) || ix >= long(w)) continue;
              acc += wt[((co * cin + ci) * k + ky) * k + kx] *
                     x[(ci * h + std::size_t(iy)) * w + std::size_t(ix)];
            }
        y[(co * oh + oy) * ow + ox] = acc;
      }
  return y;
}

// Bilinear resize of one plane, half-pixel centres, edge clamping.
inline Vec bilinear(const Vec& x, std::size_t h, std::size_t w, std::size_t oh, std::size_t ow) {
  Vec y(oh * ow);
  auto src = [](std::size_t o, std::size_t in, std::size_t out) {
    double s = (double(o) + 0.5) * double(in) / double(out) - 0.5;
    return std::max(0.0, s);
  };
  for (std::size_t oy = 0; oy < oh; ++oy) {
    const double sy = src(oy, h, oh);
    const std::size_t y0 = std::min(h - 1, std::size_t(sy));
    const std::size_t y1 = std::min(h - 1, y0 + 1);
    const double fy = sy - double(y0);
    for (std::size_t ox = 0; ox < ow; ++ox) {
      const double sx = src(ox, w, ow);
      const std::size_t x0 = std::min(w - 1, std::size_t(sx));
      const std::size_t x1 = std::min(w - 1, x0 + 1);
      const double fx = sx - double(x0);
      y[oy * ow + ox] = (1 - fy) * ((1 - fx) * x[y0 * w + x0] + fx * x[y0 * w + x1]) +
                        fy * ((1 - fx) * x[y1 * w + x0] + fx * x[y1 * w + x1]);
    }
  }
  return y;
}

inline Vec layer_norm_rows(const Vec& x, std::size_t rows, std::size_t cols, const Vec& g,
                           const Vec& b, double eps = 1e-5) {
  Vec y(x.size());
  for (std::size_t i = 0; i < rows; ++i) {
    double mu = 0, var = 0;
    for (std::size_t j = 0; j < cols; ++j) mu += x[i * cols + j];
    mu /= double(cols);
    for (std::size_t j = 0; j < cols; ++j) var += (x[i * cols + j] - mu) * (x[i * cols + j] - mu);
    var /= double(cols);
    for (std::size_t j = 0; j < cols; ++j) {
      y[i * cols + j] = (x[i * cols + j] - mu) / std::sqrt(var + eps) * g[j] + b[j];
    }
  }
  return y;
}

// Attention one head at a time, scaled by 1/sqrt(d). Returns the merged
// (pre output-projection) mix and the per-head weights [M,Tq,Tk].
struct HeadLoopResult {
  Vec mixed, weights;
};
inline HeadLoopResult attention_by_head(const Vec& q, const Vec& k, const Vec& v, std::size_t tq,
                                        std::size_t tk, std::size_t dim, std::size_t heads) {
  const std::size_t d = dim / heads;
  HeadLoopResult r{Vec(tq * dim, 0.0), Vec(heads * tq * tk, 0.0)};
  for (std::size_t m = 0; m < heads; ++m) {
    for (std::size_t i = 0; i < tq; ++i) {
      Vec s(tk);
      double mx = -INFINITY;
      for (std::size_t j = 0; j < tk; ++j) {
        double acc = 0;
        for (std::size_t c = 0; c < d; ++c) acc += q[i * dim + m * d + c] * k[j * dim + m * d + c];
        s[j] = acc / std::sqrt(double(d));
        mx = std::max(mx, s[j]);
      }
      double z = 0;
      for (auto& e : s) z += (e = std::exp(e - mx));
      for (std::size_t j = 0; j < tk; ++j) {
        const double a = s[j] / z;
        r.weights[(m * tq + i) * tk + j] = a;
        for (std::size_t c = 0; c < d; ++c) r.mixed[i * dim + m * d + c] += a * v[j * dim + m * d + c];
      }
    }
  }
  return r;
}

// Reduced decoder: E <- softmax(E F^T) F per layer; map = E F^T.
inline Vec literal_decoder_map(Vec e, const Vec& f, std::size_t n, std::size_t t, std::size_t c,
                               std::size_t layers) {
  for (std::size_t l = 0; l < layers; ++l) {
    e = matmul(softmax_rows(matmul_nt(e, f, n, c, t), n, t), f, n, t, c);
  }
  return matmul_nt(e, f, n, c, t);
}

// Connected components of one class by BFS flood fill, 8-connectivity.
inline std::size_t flood_fill_components(const t2s::MaskImage& m, std::uint8_t cls) {
  std::vector<char> seen(m.size(), 0);
  std::size_t count = 0;
  for (std::size_t start = 0; start < m.size(); ++start) {
    if (seen[start] || m.labels[start] != cls) continue;
    ++count;
    std::deque<std::size_t> q{start};
    seen[start] = 1;
    while (!q.empty()) {
      const std::size_t p = q.front();
      q.pop_front();
      const long x = long(p % m.width), y = long(p / m.width);
      for (long dy = -1; dy <= 1; ++dy)
        for (long dx = -1; dx <= 1; ++dx) {
          const long nx = x + dx, ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= long(m.width) || ny >= long(m.height)) continue;
          const std::size_t np = std::size_t(ny) * m.width + std::size_t(nx);
          if (!seen[np] && m.labels[np] == cls) {
            seen[np] = 1;
            q.push_back(np);
          }
        }
    }
  }
  return count;
}

// Brute-force per-pixel scoring straight from the label arrays.
struct BruteScores {
  double accuracy = 0;
  std::vector<double> iou;  // NaN where the union is empty
  double miou = 0;
};
inline BruteScores brute_scores(const std::vector<t2s::MaskImage>& preds,
                                const std::vector<t2s::MaskImage>& truths, std::size_t n) {
  BruteScores s;
  std::uint64_t correct = 0, total = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    for (std::size_t p = 0; p < truths[i].size(); ++p) {
      if (truths[i].labels[p] == 255) continue;
      ++total;
      correct += preds[i].labels[p] == truths[i].labels[p];
    }
  }
  s.accuracy = double(correct) / double(total);
  double sum = 0;
  std::size_t k = 0;
  for (std::size_t c = 0; c < n; ++c) {
    std::uint64_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      for (std::size_t p = 0; p < truths[i].size(); ++p) {
        const auto t = truths[i].labels[p];
        if (t == 255) continue;
        const bool in_t = t == c, in_p = preds[i].labels[p] == c;
        inter += in_t && in_p;
        uni += in_t || in_p;
      }
    }
    if (uni == 0) {
      s.iou.push_back(NAN);
      continue;
    }
    s.iou.push_back(double(inter) / double(uni));
    sum += s.iou.back();
    ++k;
  }
  s.miou = sum / double(k);
  return s;
}

// Random blob mask: a few random walks painted with random classes.
inline t2s::MaskImage blob_mask(t2s::Rng& rng, std::size_t w, std::size_t h, std::size_t classes) {
  t2s::MaskImage m(w, h, 0);
  const auto blobs = rng.integer(1, 6);
  for (long b = 0; b < blobs; ++b) {
    const auto cls = std::uint8_t(rng.integer(1, long(classes) - 1));
    long x = rng.integer(0, long(w) - 1), y = rng.integer(0, long(h) - 1);
    const auto steps = rng.integer(3, 40);
    for (long s = 0; s < steps; ++s) {
      m.at(std::size_t(x), std::size_t(y)) = cls;
      x = std::clamp<long>(x + rng.integer(-1, 1), 0, long(w) - 1);
      y = std::clamp<long>(y + rng.integer(-1, 1), 0, long(h) - 1);
    }
  }
  return m;
}

}  // namespace oracle
