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

// Release acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails. `--only NAME` runs a single criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "trans2seg/cli.hpp"
#include "trans2seg/gradcheck.hpp"
#include "trans2seg/metrics.hpp"
#include "trans2seg/ops.hpp"
#include "trans2seg/training.hpp"

using namespace t2s;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), f, a, b, c, d);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path config_path(const char* name) { return fs::path(T2S_SOURCE_DIR) / "configs" / name; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome gradient_integrity() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto results = run_gradcheck_suite(1e-4);
  const double secs = seconds_since(t0);
  double worst = 0;
  std::string worst_name;
  bool ok = true;
  for (const auto& r : results) {
    ok = ok && r.passed;
    if (r.max_rel_error >= worst) {
      worst = r.max_rel_error;
      worst_name = r.name;
    }
  }
  ok = ok && secs < 120.0;
  return {ok, std::to_string(results.size()) + " checks, worst " + worst_name + " " +
                  fmt("%.2e, %.1fs", worst, secs)};
}

Outcome shape_conformance() {
  std::size_t checked = 0;
  for (std::size_t size : {64u, 128u}) {
    for (std::size_t heads : {2u, 3u}) {
      ModelConfig cfg;
      cfg.num_classes = 12;
      cfg.input_size = size;
      cfg.heads = heads;
      // The small preset's width 128 is not divisible by three heads.
      if (heads == 3) {
        cfg.embed_dim = 96;
        cfg.backbone.stage_channels[3] = 96;
      }
      SegModel<float> model(cfg, 0);
      Rng rng(size + heads);
      TensorF img({3, size, size});
      for (auto& v : img.data()) v = float(rng.uniform());
      const auto t = model.trace(img);
      const std::size_t C = cfg.embed_dim, h = size / 16, T = h * h;
      const auto mask = model.predict(img);
      const bool ok = t.feature.shape() == Shape{C, h, h} && t.encoded.shape() == Shape{T, C} &&
                      t.attn.shape() == Shape{12, heads, T} &&
                      t.logits.shape() == Shape{12, size / 4, size / 4} && mask.width == size &&
                      mask.height == size;
      if (!ok) {
        return {false, "mismatch at " + std::to_string(size) + "x" + std::to_string(size) +
                           ", M=" + std::to_string(heads)};
      }
      ++checked;
    }
  }
  return {true, std::to_string(checked) + " (size, M) combinations exact"};
}

Outcome equation_fidelity() {
  Rng rng(101);
  double worst = 0;
  for (int trial = 0; trial < 10; ++trial) {
    ModelConfig cfg;
    cfg.heads = 1;
    cfg.literal_decoder = true;
    cfg.num_classes = std::size_t(rng.integer(2, 12));
    cfg.embed_dim = std::size_t(rng.integer(4, 32));
    cfg.backbone.stage_channels[3] = cfg.embed_dim;
    cfg.input_size = 16 * std::size_t(rng.integer(1, 4));
    cfg.dec_layers = std::size_t(rng.integer(1, 3));
    ParamStore<double> store;
    Rng init(200 + std::uint64_t(trial));
    PrototypeDecoder<double> dec(cfg, store, init);
    const std::size_t T = cfg.tokens(), C = cfg.embed_dim, N = cfg.num_classes;
    auto f = oracle::random({T, C}, rng);
    const auto got = dec.forward(f);
    const auto ref =
        oracle::literal_decoder_map(oracle::values(dec.prototypes()), oracle::values(f), N, T, C,
                                    cfg.dec_layers);
    worst = std::max(worst, oracle::max_abs_diff(oracle::values(got), ref));
  }
  return {worst <= 1e-8, fmt("10 instances, max abs diff %.2e", worst)};
}

Outcome attention_normalization() {
  Rng rng(303);
  double worst = 0;
  std::size_t rows = 0;
  auto sweep = [&](auto tag) {
    using T = decltype(tag);
    for (int trial = 0; trial < 25; ++trial) {
      const std::size_t heads = std::size_t(rng.integer(1, 4));
      const std::size_t dim = heads * std::size_t(rng.integer(1, 16));
      const std::size_t tq = std::size_t(rng.integer(1, 20)), tk = std::size_t(rng.integer(1, 64));
      ParamStore<T> store;
      Rng init{std::uint64_t(trial)};
      auto w = AttentionWeights<T>::create(store, "a", dim, init);
      Tensor<T> q({tq, dim}), kv({tk, dim});
      const double spread = rng.uniform(0.1, 8.0);
      for (auto& v : q.data()) v = T(rng.normal(0, spread));
      for (auto& v : kv.data()) v = T(rng.normal(0, spread));
      const auto a = multi_head_attention(q, kv, kv, w, heads).weights;
      for (std::size_t r = 0; r < heads * tq; ++r) {
        double s = 0;
        for (std::size_t j = 0; j < tk; ++j) s += double(a[r * tk + j]);
        worst = std::max(worst, std::abs(s - 1.0));
        ++rows;
      }
    }
  };
  sweep(float{});
  sweep(double{});
  return {worst <= 1e-6, std::to_string(rows) + " rows over 50 shapes, max |sum-1| " +
                             fmt("%.2e", worst)};
}

Outcome metric_oracles() {
  Rng rng(404);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = std::size_t(rng.integer(2, 8));
    MaskImage truth(8, 8), pred(8, 8);
    for (auto& v : truth.labels) v = rng.uniform() < 0.08 ? 255 : std::uint8_t(rng.integer(0, long(n) - 1));
    for (auto& v : pred.labels) v = std::uint8_t(rng.integer(0, long(n) - 1));
    if (std::all_of(truth.labels.begin(), truth.labels.end(), [](auto v) { return v == 255; })) {
      truth.labels[0] = 0;
    }
    ConfusionMatrix cm(n);
    accumulate(cm, pred, truth);
    const auto ref = oracle::brute_scores({pred}, {truth}, n);
    const auto r = iou_per_class(cm);
    bool same = pixel_accuracy(cm) == ref.accuracy && r.miou == ref.miou;
    for (std::size_t c = 0; c < n; ++c) {
      same = same && r.included[c] == !std::isnan(ref.iou[c]) &&
             (!r.included[c] || r.iou[c] == ref.iou[c]);
    }
    mismatches += !same;
  }
  std::vector<MaskImage> blobs;
  std::size_t cmcc_mismatches = 0;
  for (int i = 0; i < 50; ++i) {
    blobs.push_back(oracle::blob_mask(rng, 24, 24, 5));
    for (std::uint8_t c = 1; c < 5; ++c) {
      cmcc_mismatches += count_components(blobs.back(), c) != oracle::flood_fill_components(blobs.back(), c);
    }
  }
  for (std::uint8_t c = 1; c < 5; ++c) {
    std::size_t comps = 0, imgs = 0;
    for (const auto& m : blobs) {
      const auto k = oracle::flood_fill_components(m, c);
      comps += k;
      imgs += k > 0;
    }
    if (imgs) cmcc_mismatches += cmcc(blobs, c) != double(comps) / double(imgs);
  }
  return {mismatches == 0 && cmcc_mismatches == 0,
          std::to_string(mismatches) + "/100 score mismatches, " + std::to_string(cmcc_mismatches) +
              " CMCC mismatches on 50 blob masks"};
}

Outcome toy_convergence() {
  const RunConfig cfg = load_run_config(config_path("toy.ini"));
  const Splits splits = load_splits(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  SegModel<float> model(cfg.model, cfg.train.seed);
  TrainConfig tc = cfg.train;
  tc.checkpoint_every = 0;
  train(model, splits.train, splits.val, tc);
  const auto cm = evaluate(model, splits.val);
  const double secs = seconds_since(t0);
  const double m = miou(cm), acc = pixel_accuracy(cm);
  return {m >= 0.80 && acc >= 0.90 && secs <= 900.0,
          fmt("val mIoU %.4f, ACC %.4f, %.0fs", m, acc, secs) + " (" + std::to_string(splits.train.size()) + " train / " +
              std::to_string(splits.val.size()) + " val)"};
}

Outcome ablation_trend() {
  const RunConfig cfg = load_run_config(config_path("ablation.ini"));
  const Splits splits = load_splits(cfg);
  std::vector<AblationEntry> grid;
  for (auto scale : cfg.ablation_scales)
    for (auto v : cfg.ablation_variants)
      for (auto s : cfg.ablation_seeds) grid.push_back({v, scale, s});
  TrainConfig tc = cfg.train;
  tc.checkpoint_every = 0;
  const auto rows = ablation_run(cfg.model, tc, grid, splits.train, splits.val, &std::cerr);
  auto median = [&](Variant v) {
    std::vector<double> xs;
    for (const auto& r : rows)
      if (r.variant == v) xs.push_back(r.miou);
    std::sort(xs.begin(), xs.end());
    return xs[xs.size() / 2];
  };
  const double full = median(Variant::full), no_dec = median(Variant::no_dec),
               no_enc_dec = median(Variant::no_enc_dec);
  const bool ok = full >= no_dec && no_dec >= no_enc_dec && full - no_enc_dec >= 0.03;
  return {ok, fmt("median mIoU full %.4f, no_dec %.4f, no_enc_dec %.4f (gap %.4f)", full, no_dec,
                  no_enc_dec, full - no_enc_dec)};
}

Outcome scale_trend() {
  std::vector<std::pair<std::size_t, std::uint64_t>> v;
  for (Scale s : {Scale::small, Scale::medium, Scale::large}) {
    ModelConfig cfg;
    cfg.apply_scale(s);
    SegModel<float> model(cfg, 0);
    std::uint64_t macs = 0;
    for (const auto& [_, m] : count_macs(model)) macs += m;
    v.emplace_back(model.params().count(), macs);
  }
  const bool ok = v[0].first < v[1].first && v[1].first < v[2].first && v[0].second < v[1].second &&
                  v[1].second < v[2].second;
  return {ok, fmt("params %.3fM < %.3fM < ", v[0].first / 1e6, v[1].first / 1e6) +
                  fmt("%.3fM; MACs %.1fM < ", v[2].first / 1e6, v[0].second / 1e6) +
                  fmt("%.1fM < %.1fM", v[1].second / 1e6, v[2].second / 1e6)};
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "t2s_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  RunConfig cfg = load_run_config(config_path("toy.ini"));
  cfg.train.epochs = 2;
  cfg.data.synth_train = 24;
  cfg.data.synth_val = 8;
  cfg.train.checkpoint_every = 0;
  std::ofstream(root / "run.ini") << format_run_config(cfg);
  std::string logs[2], csvs[2];
  for (int i = 0; i < 2; ++i) {
    const fs::path out = root / ("run" + std::to_string(i));
    std::ostringstream o, e;
    CommonOptions opts{root / "run.ini", 7, out};
    if (cmd_train(opts, o, e) != 0) return {false, "train failed: " + e.str()};
    if (cmd_eval(opts, out / "model.t2sg", "val", o, e) != 0) return {false, "eval failed: " + e.str()};
    logs[i] = slurp(out / "train.log");
    csvs[i] = slurp(out / "eval.csv");
  }
  fs::remove_all(root);
  const bool ok = !logs[0].empty() && logs[0] == logs[1] && !csvs[0].empty() && csvs[0] == csvs[1];
  return {ok, "train.log " + std::string(logs[0] == logs[1] ? "identical" : "differs") +
                  ", eval.csv " + (csvs[0] == csvs[1] ? "identical" : "differs")};
}

Outcome checkpoint_round_trip() {
  ModelConfig cfg;
  cfg.num_classes = 12;
  SegModel<float> a(cfg, 1), b(cfg, 2);
  std::stringstream buf;
  save_checkpoint(a.params(), buf);
  load_checkpoint(b.params(), buf);
  Rng rng(505);
  std::size_t equal = 0;
  for (int i = 0; i < 5; ++i) {
    TensorF img({3, 64, 64});
    for (auto& v : img.data()) v = float(rng.uniform());
    const auto x = a.forward(img), y = b.forward(img);
    equal += std::equal(x.data().begin(), x.data().end(), y.data().begin(), y.data().end());
  }
  return {equal == 5, std::to_string(equal) + "/5 forwards bit-identical"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient_integrity", gradient_integrity},
      {"shape_conformance", shape_conformance},
      {"equation_fidelity", equation_fidelity},
      {"attention_normalization", attention_normalization},
      {"metric_oracle_equivalence", metric_oracles},
      {"toy_convergence", toy_convergence},
      {"ablation_trend", ablation_trend},
      {"scale_trend", scale_trend},
      {"determinism", determinism},
      {"checkpoint_round_trip", checkpoint_round_trip},
  };
  std::string only;
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--only") only = argv[i + 1];
  }
  int failures = 0, ran = 0;
  for (const auto& [name, check] : criteria) {
    if (!only.empty() && name != only) continue;
    ++ran;
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    failures += !o.pass;
  }
  if (ran == 0) {
    std::cerr << "no criterion named '" << only << "'\n";
    return 2;
  }
  return failures == 0 ? 0 : 1;
}
