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

#include <doctest.h>

#include <limits>

#include "oracles.hpp"
#include "trans2seg/errors.hpp"
#include "trans2seg/gradcheck.hpp"
#include "trans2seg/macs.hpp"
#include "trans2seg/ops.hpp"

using namespace t2s;

TEST_CASE("matmul agrees with the triple loop") {
  Rng rng(1);
  auto a = oracle::random({5, 7}, rng);
  auto b = oracle::random({7, 3}, rng);
  auto c = matmul(a, b);
  CHECK(c.shape() == Shape{5, 3});
  CHECK(oracle::max_abs_diff(oracle::values(c), oracle::matmul(oracle::values(a), oracle::values(b),
                                                               5, 7, 3)) < 1e-12);

  auto bt = oracle::random({3, 7}, rng);
  CHECK(oracle::max_abs_diff(oracle::values(matmul_nt(a, bt)),
                             oracle::matmul_nt(oracle::values(a), oracle::values(bt), 5, 7, 3)) <
        1e-12);
}

TEST_CASE("batched matmul multiplies each slice") {
  Rng rng(2);
  auto a = oracle::random({3, 4, 5}, rng);
  auto b = oracle::random({3, 5, 2}, rng);
  auto c = matmul(a, b);
  REQUIRE(c.shape() == Shape{3, 4, 2});
  for (std::size_t i = 0; i < 3; ++i) {
    oracle::Vec ai(a.data().begin() + long(i * 20), a.data().begin() + long(i * 20 + 20));
    oracle::Vec bi(b.data().begin() + long(i * 10), b.data().begin() + long(i * 10 + 10));
    oracle::Vec ci(c.data().begin() + long(i * 8), c.data().begin() + long(i * 8 + 8));
    CHECK(oracle::max_abs_diff(ci, oracle::matmul(ai, bi, 4, 5, 2)) < 1e-12);
  }
}

TEST_CASE("matmul rejects mismatched inner dimensions") {
  TensorD a({2, 3}), b({4, 2});
  CHECK_THROWS_AS(matmul(a, b), DimensionError);
}

TEST_CASE("conv2d agrees with the six-loop oracle") {
  Rng rng(3);
  struct Case {
    std::size_t cin, h, w, cout, k, stride, pad, dil;
  };
  for (const Case c : {Case{3, 8, 8, 4, 3, 1, 1, 1}, Case{2, 9, 7, 3, 3, 2, 1, 1},
                       Case{4, 8, 8, 2, 3, 1, 2, 2}, Case{3, 6, 6, 5, 1, 1, 0, 1}}) {
    auto x = oracle::random({c.cin, c.h, c.w}, rng);
    auto wt = oracle::random({c.cout, c.cin, c.k, c.k}, rng);
    auto bias = oracle::random({c.cout}, rng);
    auto y = conv2d(x, wt, bias, {c.stride, c.pad, c.dil});
    std::size_t oh, ow;
    const auto bv = oracle::values(bias);
    auto ref = oracle::conv2d(oracle::values(x), c.cin, c.h, c.w, oracle::values(wt), c.cout, c.k,
                              &bv, c.stride, c.pad, c.dil, oh, ow);
    REQUIRE(y.shape() == Shape{c.cout, oh, ow});
    CHECK(oracle::max_abs_diff(oracle::values(y), ref) < 1e-10);
  }
}

TEST_CASE("batched conv2d equals per-image conv2d") {
  Rng rng(4);
  auto x = oracle::random({2, 3, 6, 6}, rng);
  auto wt = oracle::random({4, 3, 3, 3}, rng);
  auto y = conv2d(x, wt, TensorD(), {1, 1, 1});
  REQUIRE(y.shape() == Shape{2, 4, 6, 6});
  for (std::size_t b = 0; b < 2; ++b) {
    auto yb = conv2d(slice(x, 0, b, b + 1), wt, TensorD(), {1, 1, 1});
    for (std::size_t i = 0; i < yb.numel(); ++i) CHECK(y[b * yb.numel() + i] == doctest::Approx(yb[i]));
  }
}

TEST_CASE("bilinear upsampling matches the interpolation formula") {
  Rng rng(5);
  auto x = oracle::random({2, 3, 4}, rng);
  auto y = bilinear_upsample(x, 7, 9);
  REQUIRE(y.shape() == Shape{2, 7, 9});
  for (std::size_t c = 0; c < 2; ++c) {
    oracle::Vec plane(x.data().begin() + long(c * 12), x.data().begin() + long(c * 12 + 12));
    oracle::Vec out(y.data().begin() + long(c * 63), y.data().begin() + long(c * 63 + 63));
    CHECK(oracle::max_abs_diff(out, oracle::bilinear(plane, 3, 4, 7, 9)) < 1e-12);
  }
  // Same-size resize is the identity.
  CHECK(oracle::max_abs_diff(oracle::values(bilinear_upsample(x, 3, 4)), oracle::values(x)) == 0);
}

TEST_CASE("softmax rows sum to one and match the reference") {
  Rng rng(6);
  auto x = oracle::random({4, 9}, rng, 5.0);
  auto y = softmax(x, 1);
  CHECK(oracle::max_abs_diff(oracle::values(y), oracle::softmax_rows(oracle::values(x), 4, 9)) <
        1e-14);
  // Large logits stay finite thanks to max subtraction.
  TensorD big({1, 3}, {1000.0, 1001.0, 999.0});
  auto s = softmax(big, 1);
  CHECK(s[0] + s[1] + s[2] == doctest::Approx(1.0));
}

TEST_CASE("layer_norm matches the reference") {
  Rng rng(7);
  auto x = oracle::random({5, 8}, rng);
  auto g = oracle::random({8}, rng);
  auto b = oracle::random({8}, rng);
  CHECK(oracle::max_abs_diff(oracle::values(layer_norm(x, g, b)),
                             oracle::layer_norm_rows(oracle::values(x), 5, 8, oracle::values(g),
                                                     oracle::values(b))) < 1e-12);
}

TEST_CASE("channel_norm normalizes each channel over space") {
  Rng rng(8);
  auto x = oracle::random({3, 4, 5}, rng, 3.0);
  TensorD g({3}, 1.0), b({3}, 0.0);
  auto y = channel_norm(x, g, b);
  for (std::size_t c = 0; c < 3; ++c) {
    double mu = 0, var = 0;
    for (std::size_t i = 0; i < 20; ++i) mu += y[c * 20 + i];
    mu /= 20;
    for (std::size_t i = 0; i < 20; ++i) var += (y[c * 20 + i] - mu) * (y[c * 20 + i] - mu);
    CHECK(mu == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(var / 20 == doctest::Approx(1.0).epsilon(1e-4));
  }
}

TEST_CASE("cross_entropy averages over non-ignored positions") {
  TensorD logits({3, 4}, {1.0, 2.0, 0.5, 0.0, 0.0, 1.0, 2.0, 0.0, -1.0, 0.0, 1.0, 3.0});
  std::vector<std::int32_t> targets{0, 1, 255, 2};
  const double loss = cross_entropy(logits, std::span<const std::int32_t>(targets)).item();
  double ref = 0;
  for (std::size_t p : {0u, 1u, 3u}) {
    double z = 0;
    for (std::size_t c = 0; c < 3; ++c) z += std::exp(logits[c * 4 + p]);
    ref += std::log(z) - logits[std::size_t(targets[p]) * 4 + p];
  }
  CHECK(loss == doctest::Approx(ref / 3).epsilon(1e-12));

  std::vector<std::int32_t> ignored(4, 255);
  CHECK(cross_entropy(logits, std::span<const std::int32_t>(ignored)).item() == 0.0);
  std::vector<std::int32_t> bad{0, 1, 7, 2};
  CHECK_THROWS_AS(cross_entropy(logits, std::span<const std::int32_t>(bad)), DataError);
}

TEST_CASE("permute, reshape, concat and slice move values correctly") {
  TensorD x({2, 3}, {0, 1, 2, 3, 4, 5});
  auto t = transpose(x);
  CHECK(oracle::values(t) == oracle::Vec{0, 3, 1, 4, 2, 5});
  auto p = permute(reshape(x, {2, 3, 1}), {2, 1, 0});
  CHECK(p.shape() == Shape{1, 3, 2});
  CHECK(oracle::values(p) == oracle::Vec{0, 3, 1, 4, 2, 5});
  auto c = concat<double>({x, x}, 0);
  CHECK(c.shape() == Shape{4, 3});
  auto s = slice(c, 1, 1, 2);
  CHECK(oracle::values(s) == oracle::Vec{1, 4, 1, 4});
  CHECK_THROWS_AS(reshape(x, {4, 2}), DimensionError);
}

TEST_CASE("the tape accumulates shared inputs and refuses a second replay") {
  TensorD x({3}, {1.0, 2.0, 3.0});
  x.set_requires_grad(true);
  Tape<double> tape;
  {
    TapeScope<double> scope(tape);
    auto y = sum(add(mul(x, x), x));  // dy/dx = 2x + 1
    tape.backward(y);
    CHECK(oracle::Vec(x.grad().begin(), x.grad().end()) == oracle::Vec{3.0, 5.0, 7.0});
    CHECK_THROWS_AS(tape.backward(y), StateError);
  }
}

TEST_CASE("ops record nothing without an active tape") {
  TensorD x({2}, {1.0, 2.0});
  x.set_requires_grad(true);
  auto y = sum(mul(x, x));
  CHECK(y.item() == 5.0);
  CHECK_FALSE(x.has_grad());
}

TEST_CASE("non-finite results name the op that produced them") {
  TensorD x({2}, {std::numeric_limits<double>::max(), 1.0});
  try {
    mul(x, x);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("mul") != std::string::npos);
  }
}

TEST_CASE("MAC counts follow the analytic formulas") {
  MacCounter counter;
  {
    MacLabel label("mm");
    matmul(TensorF({4, 5}), TensorF({5, 6}));
  }
  CHECK(counter.by_module().at("mm") == 4u * 5u * 6u);
  {
    MacLabel label("conv");
    conv2d(TensorF({3, 8, 8}), TensorF({2, 3, 1, 1}), TensorF());
  }
  CHECK(counter.by_module().at("conv") == 2u * 3u * 8u * 8u);
  CHECK(counter.total() == 120u + 384u);
}

TEST_CASE("finite differences agree with the tape on every shipped check") {
  for (const auto& r : run_gradcheck_suite(1e-4)) {
    INFO(r.name << " max rel error " << r.max_rel_error);
    CHECK(r.passed);
  }
}
