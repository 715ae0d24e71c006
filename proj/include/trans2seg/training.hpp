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
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trans2seg/config.hpp"
#include "trans2seg/data.hpp"
#include "trans2seg/metrics.hpp"
#include "trans2seg/model.hpp"

namespace t2s {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;  // decoupled: p -= lr * wd * p
};

template <typename T>
struct AdamState {
  std::vector<T> m, v;
  std::size_t step = 0;  // updates applied so far
};

/// One Adam update with bias correction and decoupled weight decay.
/// Initializes zero moments on first use.
template <typename T>
void adam_step(std::span<T> param, std::span<const T> grad, AdamState<T>& state, double lr,
               const AdamOptions& opt);

/// Adam over every parameter of a store. Missing gradients count as zero.
template <typename T>
class Adam {
 public:
  Adam(ParamStore<T>& params, AdamOptions opt) : params_(&params), opt_(opt) {}
  void step(double lr);
  std::size_t steps() const { return steps_; }

 private:
  ParamStore<T>* params_;
  AdamOptions opt_;
  std::vector<AdamState<T>> state_;
  std::size_t steps_ = 0;
};

/// base_lr * (1 - iter / max_iter)^power.
double poly_lr(double base_lr, std::size_t iter, std::size_t max_iter, double power);

struct TrainConfig {
  double lr = 1e-4;
  double adam_eps = 1e-8;
  double weight_decay = 1e-4;
  std::size_t batch_size = 4;
  std::size_t epochs = 50;
  double poly_power = 0.9;
  std::uint64_t seed = 0;
  Variant variant = Variant::full;
  Scale scale = Scale::small;
  std::size_t checkpoint_every = 1;  // 0 disables per-epoch checkpoints
};

struct EpochLog {
  std::size_t epoch;  // 1-based
  double lr;          // learning rate at the epoch's first step
  double mean_loss;
  double val_miou;
};

/// "epoch\tlr\tmean_loss\tval_mIoU" with fixed formatting.
std::string format_log_line(const EpochLog& e);

struct TrainOutputs {
  std::optional<std::filesystem::path> out_dir;  // checkpoints + train.log
  std::ostream* log = nullptr;                   // epoch lines echoed here
};

/// Trains in place. Samples are resized to the model's input size; the loss is
/// per-position cross-entropy of the stride-4 logits against the mask
/// downsampled by nearest neighbour, ignore id 255. Deterministic in cfg.seed.
/// A non-finite value aborts with NumericalError naming the op that produced it.
std::vector<EpochLog> train(SegModel<float>& model, const std::vector<Sample>& train_set,
                            const std::vector<Sample>& val_set, const TrainConfig& cfg,
                            const TrainOutputs& outputs = {});

/// Confusion matrix of model predictions at full mask resolution.
ConfusionMatrix evaluate(const SegModel<float>& model, const std::vector<Sample>& samples);

/// Cross-entropy targets for stride-4 logits.
std::vector<std::int32_t> loss_targets(const MaskImage& mask, std::size_t input_size);

struct EvalReport {
  std::vector<std::string> class_names;
  IoUReport iou;
  double accuracy = 0;
};

EvalReport make_eval_report(const ConfusionMatrix& cm, std::vector<std::string> class_names);

/// "class,iou" rows (excluded classes read NA) then "ACC,x" and "mIoU,x"; 4 decimals.
void write_eval_csv(std::ostream& out, const EvalReport& report);
void write_eval_table(std::ostream& out, const EvalReport& report);

struct AblationEntry {
  Variant variant;
  Scale scale;
  std::uint64_t seed;
};

struct AblationRow {
  Variant variant;
  Scale scale;
  std::uint64_t seed;
  double miou;
  double accuracy;
  std::size_t param_count;
  std::uint64_t mac_count;
};

/// Trains and evaluates one model per grid entry. `base` supplies everything
/// but variant and scale; `train_cfg` everything but the seed.
std::vector<AblationRow> ablation_run(const ModelConfig& base, const TrainConfig& train_cfg,
                                      const std::vector<AblationEntry>& grid,
                                      const std::vector<Sample>& train_set,
                                      const std::vector<Sample>& val_set,
                                      std::ostream* progress = nullptr);

/// Header "variant,scale,seed,mIoU,ACC,param_count,mac_count".
void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows);

/// Model config for one (variant, scale) cell built from `base`.
ModelConfig with_variant_scale(ModelConfig base, Variant variant, Scale scale);

}  // namespace t2s
