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

#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "trans2seg/errors.hpp"
#include "trans2seg/training.hpp"

using namespace t2s;

namespace {

ModelConfig tiny_config(std::size_t classes = 4) {
  ModelConfig cfg;
  cfg.embed_dim = 16;
  cfg.heads = 2;
  cfg.num_classes = classes;
  cfg.input_size = 32;
  cfg.backbone.stage_channels = {4, 8, 8, 16};
  cfg.head.hidden_channels = 8;
  return cfg;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("adam matches the scalar recurrence over three steps") {
  const AdamOptions opt{0.9, 0.999, 1e-8, 0.01};
  const double lr = 0.05;
  std::vector<double> p{0.7};
  AdamState<double> state;
  double ref = 0.7, m = 0, v = 0;
  for (int t = 1; t <= 3; ++t) {
    const double g = 0.3 * t - 0.5;
    std::vector<double> grad{g};
    adam_step<double>(p, grad, state, lr, opt);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1 - std::pow(0.9, t)), vh = v / (1 - std::pow(0.999, t));
    ref = ref - lr * 0.01 * ref - lr * mh / (std::sqrt(vh) + 1e-8);
    CHECK(std::abs(p[0] - ref) <= 1e-12);
  }
}

TEST_CASE("adam's first step has magnitude lr against the gradient") {
  std::vector<double> p{1.0, -2.0};
  std::vector<double> g{0.25, -4.0};
  AdamState<double> state;
  adam_step<double>(p, g, state, 1e-3, {0.9, 0.999, 1e-8, 0.0});
  CHECK(p[0] == doctest::Approx(1.0 - 1e-3).epsilon(1e-6));
  CHECK(p[1] == doctest::Approx(-2.0 + 1e-3).epsilon(1e-6));

  std::vector<double> q{3.0};
  std::vector<double> zero{0.0};
  AdamState<double> s2;
  adam_step<double>(q, zero, s2, 1e-3, {0.9, 0.999, 1e-8, 0.0});
  CHECK(q[0] == 3.0);

  std::vector<double> wrong{1.0, 2.0, 3.0};
  CHECK_THROWS_AS(adam_step<double>(p, wrong, state, 1e-3, {}), DimensionError);
}

TEST_CASE("poly decay endpoints, midpoint and monotonicity") {
  CHECK(poly_lr(1e-4, 0, 100, 0.9) == 1e-4);
  CHECK(poly_lr(1e-4, 100, 100, 0.9) == 0.0);
  CHECK(poly_lr(1e-4, 50, 100, 0.9) == doctest::Approx(1e-4 * std::pow(0.5, 0.9)).epsilon(1e-15));
  for (std::size_t i = 1; i <= 100; ++i) CHECK(poly_lr(1.0, i, 100, 0.9) <= poly_lr(1.0, i - 1, 100, 0.9));
}

TEST_CASE("log lines use the fixed tab-separated format") {
  CHECK(format_log_line({3, 1e-4, 0.5, 0.25}) == "3\t1.000000e-04\t0.500000\t0.2500");
}

TEST_CASE("training is deterministic and writes its artifacts") {
  const auto data = synth_dataset(3, 6, 32, 4);
  std::vector<Sample> train_set(data.begin(), data.begin() + 4), val(data.begin() + 4, data.end());
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 2;
  tc.lr = 1e-3;
  tc.seed = 9;
  const auto dir = std::filesystem::temp_directory_path() / "t2s_train_test";
  std::filesystem::remove_all(dir);
  std::ostringstream log_a, log_b;
  SegModel<float> a(tiny_config(), tc.seed), b(tiny_config(), tc.seed);
  const auto logs = train(a, train_set, val, tc, {dir / "a", &log_a});
  train(b, train_set, val, tc, {dir / "b", &log_b});
  CHECK(logs.size() == 2);
  CHECK(log_a.str() == log_b.str());
  CHECK(slurp(dir / "a" / "train.log") == log_a.str());
  CHECK(slurp(dir / "a" / "model.t2sg") == slurp(dir / "b" / "model.t2sg"));
  CHECK(std::filesystem::exists(dir / "a" / "epoch_001.t2sg"));
  CHECK(std::filesystem::exists(dir / "a" / "epoch_002.t2sg"));
  for (const auto& e : logs) {
    CHECK(e.val_miou >= 0.0);
    CHECK(e.val_miou <= 1.0);
  }

  // The final checkpoint restores the trained weights exactly.
  SegModel<float> c(tiny_config(), 77);
  load_checkpoint(c.params(), (dir / "a" / "model.t2sg").string());
  CHECK(oracle::values(c.forward(train_set[0].image)) ==
        oracle::values(a.forward(train_set[0].image)));
  std::filesystem::remove_all(dir);
}

TEST_CASE("training loss decreases on a small synthetic set") {
  const auto data = synth_dataset(5, 16, 32, 4);
  TrainConfig tc;
  tc.epochs = 12;
  tc.batch_size = 4;
  tc.lr = 1e-3;
  SegModel<float> model(tiny_config(), 1);
  const auto logs = train(model, data, {}, tc);
  CHECK(logs.back().mean_loss < logs.front().mean_loss);
}

TEST_CASE("training rejects empty data and bad hyperparameters") {
  SegModel<float> model(tiny_config(), 1);
  TrainConfig tc;
  CHECK_THROWS_AS(train(model, {}, {}, tc), DataError);
  const auto data = synth_dataset(1, 2, 32, 4);
  tc.lr = 0;
  CHECK_THROWS_AS(train(model, data, {}, tc), ConfigError);
}

TEST_CASE("loss targets sample pixel centres at stride four") {
  MaskImage m(8, 8, 0);
  m.at(2, 2) = 1;  // centre of the top-left 4x4 cell
  m.at(5, 1) = 2;  // not a centre
  const auto t = loss_targets(m, 8);
  CHECK(t == std::vector<std::int32_t>{1, 0, 0, 0});
}

TEST_CASE("eval CSV layout") {
  ConfusionMatrix cm(3);
  cm.add(0, 0, 6);
  cm.add(1, 1, 3);
  cm.add(1, 0, 1);
  std::ostringstream out;
  write_eval_csv(out, make_eval_report(cm, {"bg", "shelf", "jar"}));
  CHECK(out.str() == "class,iou\nbg,0.8571\nshelf,0.7500\njar,NA\nACC,0.9000\nmIoU,0.8036\n");
}

TEST_CASE("ablation rows carry capacity columns") {
  const auto data = synth_dataset(2, 4, 32, 4);
  TrainConfig tc;
  tc.epochs = 1;
  tc.checkpoint_every = 0;
  std::vector<AblationEntry> grid{{Variant::full, Scale::small, 0},
                                  {Variant::no_dec, Scale::small, 0},
                                  {Variant::no_enc_dec, Scale::small, 0}};
  ModelConfig base = tiny_config();
  base.input_size = 32;
  base.backbone.stage_channels = {4, 8, 8, 128};
  const auto rows = ablation_run(base, tc, grid, data, data);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].param_count > rows[1].param_count);
  CHECK(rows[1].param_count > rows[2].param_count);
  for (const auto& r : rows) {
    CHECK(r.miou >= 0.0);
    CHECK(r.miou <= 1.0);
    CHECK(r.mac_count > 0);
  }
  std::ostringstream csv;
  write_ablation_csv(csv, rows);
  CHECK(csv.str().rfind("variant,scale,seed,mIoU,ACC,param_count,mac_count\nfull,small,0,", 0) == 0);
  CHECK_THROWS_AS(ablation_run(base, tc, {}, data, data), ConfigError);
}
