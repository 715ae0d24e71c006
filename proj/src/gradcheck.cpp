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

#include "trans2seg/gradcheck.hpp"

#include "trans2seg/conv_head.hpp"
#include "trans2seg/ops.hpp"
#include "trans2seg/params.hpp"
#include "trans2seg/transformer.hpp"

namespace t2s {

namespace {

TensorD random_tensor(Shape shape, Rng& rng, double stddev = 1.0) {
  TensorD t(std::move(shape));
  for (auto& v : t.data()) v = rng.normal(0.0, stddev);
  return t;
}

// Contracting with a fixed random tensor gives every output element a
// distinct weight, so a wrong gradient cannot hide behind symmetry.
TensorD probe(const TensorD& y, const TensorD& w) { return sum(mul(y, w)); }

}  // namespace

std::vector<GradCheckResult> run_gradcheck_suite(double tolerance, unsigned seed) {
  Rng rng(seed);
  std::vector<GradCheckResult> results;
  auto check = [&](const std::string& name, auto&& f, TensorD x) {
    const double err = grad_check(f, x);
    results.push_back({name, err, err <= tolerance});
  };

  constexpr std::size_t C = 16, M = 2, T = 16, N = 3;

  {
    auto b = random_tensor({5, 4}, rng);
    auto w = random_tensor({3, 4}, rng);
    check("matmul", [&](const TensorD& a) { return probe(matmul(a, b), w); },
          random_tensor({3, 5}, rng));
    auto b3 = random_tensor({2, 5, 4}, rng);
    auto w3 = random_tensor({2, 3, 4}, rng);
    check("matmul_batched", [&](const TensorD& a) { return probe(matmul(a, b3), w3); },
          random_tensor({2, 3, 5}, rng));
    auto bt = random_tensor({4, 5}, rng);
    check("matmul_nt", [&](const TensorD& a) { return probe(matmul_nt(a, bt), w); },
          random_tensor({3, 5}, rng));
  }
  {
    auto other = random_tensor({4, 6}, rng);
    auto w = random_tensor({4, 6}, rng);
    check("add", [&](const TensorD& a) { return probe(add(a, other), w); },
          random_tensor({4, 6}, rng));
    check("mul", [&](const TensorD& a) { return probe(mul(a, other), w); },
          random_tensor({4, 6}, rng));
    check("scale", [&](const TensorD& a) { return probe(scale(a, 0.37), w); },
          random_tensor({4, 6}, rng));
    auto x = random_tensor({4, 6}, rng);
    check("add_bias", [&](const TensorD& b) { return probe(add_bias(x, b), w); },
          random_tensor({6}, rng));
    // Keep inputs away from the kink at zero.
    auto r = random_tensor({4, 6}, rng);
    for (auto& v : r.data()) v += v >= 0 ? 0.05 : -0.05;
    check("relu", [&](const TensorD& a) { return probe(relu(a), w); }, r);
    check("softmax", [&](const TensorD& a) { return probe(softmax(a, 1), w); },
          random_tensor({4, 6}, rng));
    auto w3 = random_tensor({3, 4, 5}, rng);
    check("softmax_axis0", [&](const TensorD& a) { return probe(softmax(a, 0), w3); },
          random_tensor({3, 4, 5}, rng));
    auto many = random_tensor({N, 4, 5}, rng);
    auto wm = random_tensor({N, 4, 5}, rng);
    check("add_shared", [&](const TensorD& s) { return probe(add_shared(many, s), wm); },
          random_tensor({4, 5}, rng));
  }
  {
    auto gain = random_tensor({C}, rng);
    auto bias = random_tensor({C}, rng);
    auto w = random_tensor({T, C}, rng);
    check("layer_norm", [&](const TensorD& x) { return probe(layer_norm(x, gain, bias), w); },
          random_tensor({T, C}, rng));
    auto x = random_tensor({T, C}, rng);
    check("layer_norm_gain", [&](const TensorD& g) { return probe(layer_norm(x, g, bias), w); },
          random_tensor({C}, rng));
    auto cg = random_tensor({4}, rng);
    auto cb = random_tensor({4}, rng);
    auto wc = random_tensor({4, 5, 5}, rng);
    check("channel_norm",
          [&](const TensorD& v) { return probe(channel_norm(v, cg, cb), wc); },
          random_tensor({4, 5, 5}, rng));
  }
  {
    auto wt = random_tensor({4, 3, 3, 3}, rng, 0.5);
    auto bias = random_tensor({4}, rng);
    auto x = random_tensor({3, 7, 7}, rng);
    const Conv2dOptions s2{2, 1, 1};
    const Conv2dOptions dil{1, 2, 2};
    auto w_s2 = random_tensor({4, 4, 4}, rng);
    auto w_d = random_tensor({4, 7, 7}, rng);
    check("conv2d_input_stride2",
          [&](const TensorD& v) { return probe(conv2d(v, wt, bias, s2), w_s2); }, x);
    check("conv2d_weight_dilated",
          [&](const TensorD& k) { return probe(conv2d(x, k, bias, dil), w_d); }, wt);
    check("conv2d_bias", [&](const TensorD& b) { return probe(conv2d(x, wt, b, dil), w_d); },
          bias);
    auto wb = random_tensor({2, 4, 7, 7}, rng);
    check("conv2d_batched",
          [&](const TensorD& v) { return probe(conv2d(v, wt, bias, {1, 1, 1}), wb); },
          random_tensor({2, 3, 7, 7}, rng));
  }
  {
    auto w = random_tensor({2, 4, 9, 8}, rng);
    check("bilinear_upsample",
          [&](const TensorD& x) { return probe(bilinear_upsample(x, 9, 8), w); },
          random_tensor({2, 4, 3, 2}, rng));
    auto wp = random_tensor({4, 2, 3}, rng);
    check("permute_reshape",
          [&](const TensorD& x) { return probe(permute(reshape(x, {2, 3, 4}), {2, 0, 1}), wp); },
          random_tensor({6, 4}, rng));
    auto wt = random_tensor({5, 3}, rng);
    check("transpose", [&](const TensorD& x) { return probe(transpose(x), wt); },
          random_tensor({3, 5}, rng));
    auto other = random_tensor({2, 3}, rng);
    auto wcat = random_tensor({2, 7}, rng);
    check("concat", [&](const TensorD& x) { return probe(concat<double>({x, other}, 1), wcat); },
          random_tensor({2, 4}, rng));
    auto wsl = random_tensor({3, 2}, rng);
    check("slice", [&](const TensorD& x) { return probe(slice(x, 1, 1, 3), wsl); },
          random_tensor({3, 5}, rng));
    check("mean", [&](const TensorD& x) { return mean(mul(x, x)); }, random_tensor({3, 5}, rng));
    std::vector<std::int32_t> targets{0, 2, 255, 1, 3, 0};
    check("cross_entropy",
          [&](const TensorD& x) { return cross_entropy(x, std::span<const std::int32_t>(targets)); },
          random_tensor({4, 6}, rng));
  }

  // Composite checks on small real modules.
  ModelConfig cfg;
  cfg.embed_dim = C;
  cfg.heads = M;
  cfg.mlp_ratio = 2;
  cfg.enc_layers = 1;
  cfg.dec_layers = 1;
  cfg.num_classes = N;
  cfg.input_size = 64;  // 4x4 = 16 tokens
  {
    ParamStore<double> store;
    Rng init(seed + 1);
    AttentionWeights<double> aw = AttentionWeights<double>::create(store, "attn", C, init);
    auto kv = random_tensor({T, C}, rng);
    auto w = random_tensor({N, C}, rng);
    check("multi_head_attention",
          [&](const TensorD& q) { return probe(multi_head_attention(q, kv, kv, aw, M).out, w); },
          random_tensor({N, C}, rng));
  }
  {
    ParamStore<double> store;
    Rng init(seed + 2);
    TransformerEncoder<double> enc(cfg, store, init);
    auto w = random_tensor({T, C}, rng);
    check("encoder_layer", [&](const TensorD& x) { return probe(enc.layer_forward(0, x), w); },
          random_tensor({T, C}, rng));
    auto wf = random_tensor({T, C}, rng);
    check("encoder", [&](const TensorD& f) { return probe(enc.forward(f), wf); },
          random_tensor({C, 4, 4}, rng));
  }
  {
    ParamStore<double> store;
    Rng init(seed + 3);
    PrototypeDecoder<double> dec(cfg, store, init);
    auto encoded = random_tensor({T, C}, rng);
    auto w = random_tensor({N, C}, rng);
    check("decoder_layer_prototypes",
          [&](const TensorD& p) { return probe(dec.layer_forward(0, p, encoded), w); },
          random_tensor({N, C}, rng));
    auto wa = random_tensor({N, M, T}, rng);
    check("decoder_map_encoded",
          [&](const TensorD& e) { return probe(dec.forward(e), wa); }, encoded);
  }
  {
    ParamStore<double> store;
    Rng init(seed + 4);
    HeadConfig hc{8};
    ConvHead<double> head(M, 4, hc, store, init);
    auto res2 = random_tensor({4, 16, 16}, rng);
    auto w = random_tensor({N, 16, 16}, rng);
    check("conv_head_attn",
          [&](const TensorD& a) { return probe(head.forward(a, res2, 4, 4), w); },
          random_tensor({N, M, T}, rng));
    auto attn = random_tensor({N, M, T}, rng);
    check("conv_head_res2",
          [&](const TensorD& r) { return probe(head.forward(attn, r, 4, 4), w); }, res2);
  }
  return results;
}

}  // namespace t2s
