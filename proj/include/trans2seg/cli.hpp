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
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "trans2seg/config.hpp"
#include "trans2seg/data.hpp"
#include "trans2seg/training.hpp"

namespace t2s {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitData = 3,
  kExitNumerical = 4,
};

struct DataConfig {
  std::optional<std::filesystem::path> root;  // holds train/ and val/ splits
  std::uint64_t synth_seed = 0;
  std::size_t synth_train = 200;
  std::size_t synth_val = 50;
  std::size_t synth_size = 64;
};

/// Everything a command needs, resolved from a config file plus flags.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DataConfig data;
  std::optional<std::filesystem::path> out_dir;
  std::vector<Variant> ablation_variants{Variant::full, Variant::no_dec, Variant::no_enc_dec};
  std::vector<Scale> ablation_scales{Scale::small};
  std::vector<std::uint64_t> ablation_seeds{0, 1, 2};
};

/// Parses the flat "key = value" format with [model], [train] and [data]
/// sections. '#' and ';' start comments. The scale preset is applied before
/// any explicit model key, whatever the order in the file. Unknown sections or
/// keys and malformed values throw ConfigError naming the offender.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

/// Renders a config that parse_run_config reads back to the same values.
std::string format_run_config(const RunConfig& cfg);

/// Common command-line overrides.
struct CommonOptions {
  std::optional<std::filesystem::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
};

RunConfig resolve_run_config(const CommonOptions& opts);

/// Train/val splits from the data root, or the synthetic corpus when no root
/// is configured: one draw of synth_train + synth_val images, split in order.
struct Splits {
  std::vector<Sample> train, val;
};
Splits load_splits(const RunConfig& cfg);

/// The commands return an exit code and never throw; diagnostics go to err.
int cmd_train(const CommonOptions& opts, std::ostream& out, std::ostream& err);
int cmd_eval(const CommonOptions& opts, const std::filesystem::path& checkpoint,
             const std::string& split, std::ostream& out, std::ostream& err);
int cmd_infer(const CommonOptions& opts, const std::filesystem::path& checkpoint,
              const std::filesystem::path& image, const std::filesystem::path& output,
              std::ostream& out, std::ostream& err);
int cmd_ablate(const CommonOptions& opts, std::ostream& out, std::ostream& err);
int cmd_stats(const CommonOptions& opts, const std::optional<std::filesystem::path>& root,
              std::ostream& out, std::ostream& err);
int cmd_gradcheck(std::ostream& out, std::ostream& err);
int cmd_flops(const CommonOptions& opts, std::ostream& out, std::ostream& err);

/// Per-class corpus statistics: images containing the class, mean connected
/// components per such image, and share of foreground pixels.
struct StatsRow {
  std::string name;
  std::size_t images = 0;
  std::optional<double> cmcc;  // empty when the class never occurs
  double pixel_ratio = 0;
};
std::vector<StatsRow> corpus_stats(const std::vector<MaskImage>& masks, std::size_t num_classes);
void write_stats(std::ostream& out, const std::vector<StatsRow>& rows, std::size_t total_images);

/// Entry point shared by the executable and the Python module.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace t2s
