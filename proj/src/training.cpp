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

#include "trans2seg/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>

#include "trans2seg/ops.hpp"

namespace t2s {

template <typename T>
void adam_step(std::span<T> param, std::span<const T> grad, AdamState<T>& state, double lr,
               const AdamOptions& opt) {
  if (!grad.empty() && grad.size() != param.size()) {
    throw DimensionError("adam_step: gradient length differs from parameter length");
  }
  if (state.m.empty()) {
    state.m.assign(param.size(), T(0));
    state.v.assign(param.size(), T(0));
  }
  if (state.m.size() != param.size() || state.v.size() != param.size()) {
    throw DimensionError("adam_step: moment buffers are not shaped like the parameter");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(opt.beta1, double(state.step));
  const double c2 = 1.0 - std::pow(opt.beta2, double(state.step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad.empty() ? 0.0 : double(grad[i]);
    const double m = opt.beta1 * double(state.m[i]) + (1.0 - opt.beta1) * g;
    const double v = opt.beta2 * double(state.v[i]) + (1.0 - opt.beta2) * g * g;
    state.m[i] = T(m);
    state.v[i] = T(v);
    double p = double(param[i]);
    p -= lr * opt.weight_decay * p;
    p -= lr * (m / c1) / (std::sqrt(v / c2) + opt.eps);
    param[i] = T(p);
  }
}

template <typename T>
void Adam<T>::step(double lr) {
  const auto& entries = params_->entries();
  if (state_.size() != entries.size()) state_.resize(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    Tensor<T> p = entries[i].second;
    adam_step<T>(p.data(), p.has_grad() ? p.grad() : std::span<const T>{}, state_[i], lr, opt_);
  }
  ++steps_;
}

double poly_lr(double base_lr, std::size_t iter, std::size_t max_iter, double power) {
  if (max_iter == 0) return base_lr;
  const double frac = 1.0 - double(std::min(iter, max_iter)) / double(max_iter);
  return base_lr * std::pow(frac, power);
}

std::string format_log_line(const EpochLog& e) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%zu\t%.6e\t%.6f\t%.4f", e.epoch, e.lr, e.mean_loss,
                e.val_miou);
  return buf;
}

std::vector<std::int32_t> loss_targets(const MaskImage& mask, std::size_t input_size) {
  const std::size_t g = input_size / 4;
  MaskImage small = resize_mask_nearest(mask, g, g);
  return {small.labels.begin(), small.labels.end()};
}

ConfusionMatrix evaluate(const SegModel<float>& model, const std::vector<Sample>& samples) {
  const std::size_t s = model.config().input_size;
  ConfusionMatrix cm(model.config().num_classes);
  for (const auto& raw : samples) {
    Sample sample = resize_sample(raw, s);
    accumulate(cm, model.predict(sample.image), sample.mask);
  }
  return cm;
}

namespace {

double safe_miou(const ConfusionMatrix& cm) { return cm.total() ? miou(cm) : 0.0; }

}  // namespace

std::vector<EpochLog> train(SegModel<float>& model, const std::vector<Sample>& train_set,
                            const std::vector<Sample>& val_set, const TrainConfig& cfg,
                            const TrainOutputs& outputs) {
  if (train_set.empty()) throw DataError("training set is empty");
  if (cfg.lr <= 0) throw ConfigError("lr must be positive");
  if (cfg.epochs == 0) throw ConfigError("epochs must be >= 1");
  if (cfg.batch_size == 0) throw ConfigError("batch_size must be >= 1");
  const auto& mcfg = model.config();
  const std::size_t s = mcfg.input_size;
  const std::size_t positions = (s / 4) * (s / 4);

  std::vector<Sample> samples;
  std::vector<std::vector<std::int32_t>> targets;
  samples.reserve(train_set.size());
  for (const auto& raw : train_set) {
    samples.push_back(resize_sample(raw, s));
    targets.push_back(loss_targets(samples.back().mask, s));
  }

  std::ofstream log_file;
  if (outputs.out_dir) {
    std::filesystem::create_directories(*outputs.out_dir);
    log_file.open(*outputs.out_dir / "train.log", std::ios::trunc);
    if (!log_file) throw ConfigError("cannot write " + (*outputs.out_dir / "train.log").string());
  }

  Adam<float> adam(model.params(), {0.9, 0.999, cfg.adam_eps, cfg.weight_decay});
  Rng shuffle_rng(cfg.seed ^ 0x5eed5eed5eedULL);
  const std::size_t steps_per_epoch = (samples.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t max_iter = steps_per_epoch * cfg.epochs;
  std::vector<std::size_t> order(samples.size());
  std::vector<EpochLog> logs;
  std::size_t iter = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), shuffle_rng.engine());
    const double epoch_lr = poly_lr(cfg.lr, iter, max_iter, cfg.poly_power);
    double loss_sum = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const float inv_batch = 1.f / float(end - start);
      model.params().zero_grad();
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t idx = order[k];
        Tape<float> tape;
        TapeScope<float> scope(tape);
        try {
          auto logits = model.forward(samples[idx].image);
          auto loss = cross_entropy(reshape(logits, {mcfg.num_classes, positions}),
                                    std::span<const std::int32_t>(targets[idx]));
          loss_sum += loss.item();
          tape.backward(scale(loss, inv_batch));
        } catch (const NumericalError& e) {
          throw NumericalError("epoch " + std::to_string(epoch) + ", sample '" +
                               samples[idx].stem + "': " + e.what());
        }
      }
      adam.step(poly_lr(cfg.lr, iter, max_iter, cfg.poly_power));
      ++iter;
    }
    model.params().zero_grad();
    EpochLog entry{epoch, epoch_lr, loss_sum / double(samples.size()),
                   val_set.empty() ? 0.0 : safe_miou(evaluate(model, val_set))};
    logs.push_back(entry);
    const std::string line = format_log_line(entry);
    if (outputs.log) *outputs.log << line << '\n' << std::flush;
    if (log_file.is_open()) log_file << line << '\n' << std::flush;
    if (outputs.out_dir && cfg.checkpoint_every && epoch % cfg.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof(name), "epoch_%03zu.t2sg", epoch);
      save_checkpoint(model.params(), (*outputs.out_dir / name).string());
    }
  }
  if (outputs.out_dir) save_checkpoint(model.params(), (*outputs.out_dir / "model.t2sg").string());
  return logs;
}

EvalReport make_eval_report(const ConfusionMatrix& cm, std::vector<std::string> class_names) {
  if (class_names.size() != cm.num_classes()) {
    throw ConfigError("class name list does not match the class count");
  }
  return {std::move(class_names), iou_per_class(cm), pixel_accuracy(cm)};
}

void write_eval_csv(std::ostream& out, const EvalReport& report) {
  char buf[64];
  out << "class,iou\n";
  for (std::size_t c = 0; c < report.class_names.size(); ++c) {
    out << report.class_names[c] << ',';
    if (report.iou.included[c]) {
      std::snprintf(buf, sizeof(buf), "%.4f", report.iou.iou[c]);
      out << buf << '\n';
    } else {
      out << "NA\n";
    }
  }
  std::snprintf(buf, sizeof(buf), "%.4f", report.accuracy);
  out << "ACC," << buf << '\n';
  std::snprintf(buf, sizeof(buf), "%.4f", report.iou.miou);
  out << "mIoU," << buf << '\n';
}

void write_eval_table(std::ostream& out, const EvalReport& report) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%-12s %8s\n", "class", "IoU");
  out << buf;
  for (std::size_t c = 0; c < report.class_names.size(); ++c) {
    if (report.iou.included[c]) {
      std::snprintf(buf, sizeof(buf), "%-12s %8.4f\n", report.class_names[c].c_str(),
                    report.iou.iou[c]);
    } else {
      std::snprintf(buf, sizeof(buf), "%-12s %8s\n", report.class_names[c].c_str(),
                    "excluded");
    }
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "%-12s %8.4f\n%-12s %8.4f\n", "ACC", report.accuracy, "mIoU",
                report.iou.miou);
  out << buf;
}

ModelConfig with_variant_scale(ModelConfig base, Variant variant, Scale scale) {
  base.variant = variant;
  base.apply_scale(scale);
  return base;
}

std::vector<AblationRow> ablation_run(const ModelConfig& base, const TrainConfig& train_cfg,
                                      const std::vector<AblationEntry>& grid,
                                      const std::vector<Sample>& train_set,
                                      const std::vector<Sample>& val_set, std::ostream* progress) {
  if (grid.empty()) throw ConfigError("ablation grid is empty");
  std::vector<AblationRow> rows;
  for (const auto& cell : grid) {
    TrainConfig tc = train_cfg;
    tc.seed = cell.seed;
    tc.variant = cell.variant;
    tc.scale = cell.scale;
    SegModel<float> model(with_variant_scale(base, cell.variant, cell.scale), cell.seed);
    train(model, train_set, val_set, tc);
    const auto cm = evaluate(model, val_set);
    std::uint64_t macs = 0;
    for (const auto& [_, v] : count_macs(model)) macs += v;
    rows.push_back({cell.variant, cell.scale, cell.seed, miou(cm), pixel_accuracy(cm),
                    model.params().count(), macs});
    if (progress) {
      char buf[160];
      std::snprintf(buf, sizeof(buf), "%s/%s seed %llu: mIoU %.4f ACC %.4f\n",
                    to_string(cell.variant).c_str(), to_string(cell.scale).c_str(),
                    static_cast<unsigned long long>(cell.seed), rows.back().miou,
                    rows.back().accuracy);
      *progress << buf << std::flush;
    }
  }
  return rows;
}

void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows) {
  out << "variant,scale,seed,mIoU,ACC,param_count,mac_count\n";
  char buf[64];
  for (const auto& r : rows) {
    out << to_string(r.variant) << ',' << to_string(r.scale) << ',' << r.seed << ',';
    std::snprintf(buf, sizeof(buf), "%.4f,%.4f,", r.miou, r.accuracy);
    out << buf << r.param_count << ',' << r.mac_count << '\n';
  }
}

template void adam_step(std::span<float>, std::span<const float>, AdamState<float>&, double,
                        const AdamOptions&);
template void adam_step(std::span<double>, std::span<const double>, AdamState<double>&, double,
                        const AdamOptions&);
template class Adam<float>;
template class Adam<double>;

}  // namespace t2s
