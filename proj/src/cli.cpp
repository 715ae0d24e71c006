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

#include "trans2seg/cli.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "trans2seg/errors.hpp"
#include "trans2seg/gradcheck.hpp"
#include "trans2seg/metrics.hpp"

namespace t2s {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename U>
U parse_unsigned(const std::string& key, const std::string& v) {
  U out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("key '" + key + "': expected true or false, got '" + v + "'");
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

std::size_t as_size(const std::string& k, const std::string& v) {
  return parse_unsigned<std::size_t>(k, v);
}

const std::map<std::string, std::map<std::string, Setter>>& schema() {
  static const std::map<std::string, std::map<std::string, Setter>> s = {
      {"model",
       {
           // "scale" is handled separately so that it never overrides explicit keys.
           {"variant", [](RunConfig& c, auto&, auto& v) { c.model.variant = parse_variant(v); }},
           {"embed_dim",
            [](RunConfig& c, auto& k, auto& v) {
              c.model.embed_dim = as_size(k, v);
              c.model.backbone.stage_channels[3] = c.model.embed_dim;
            }},
           {"layers",
            [](RunConfig& c, auto& k, auto& v) {
              c.model.enc_layers = c.model.dec_layers = as_size(k, v);
            }},
           {"enc_layers", [](RunConfig& c, auto& k, auto& v) { c.model.enc_layers = as_size(k, v); }},
           {"dec_layers", [](RunConfig& c, auto& k, auto& v) { c.model.dec_layers = as_size(k, v); }},
           {"heads", [](RunConfig& c, auto& k, auto& v) { c.model.heads = as_size(k, v); }},
           {"mlp_ratio", [](RunConfig& c, auto& k, auto& v) { c.model.mlp_ratio = as_size(k, v); }},
           {"num_classes",
            [](RunConfig& c, auto& k, auto& v) { c.model.num_classes = as_size(k, v); }},
           {"input_size", [](RunConfig& c, auto& k, auto& v) { c.model.input_size = as_size(k, v); }},
           {"stage_channels",
            [](RunConfig& c, auto& k, auto& v) {
              const auto parts = split_list(v);
              if (parts.size() != 4) {
                throw ConfigError("key '" + k + "': expected 4 comma-separated widths");
              }
              for (std::size_t i = 0; i < 4; ++i) {
                c.model.backbone.stage_channels[i] = as_size(k, parts[i]);
              }
            }},
           {"last_stage_dilation",
            [](RunConfig& c, auto& k, auto& v) {
              c.model.backbone.last_stage_dilation = as_size(k, v);
            }},
           {"head_hidden",
            [](RunConfig& c, auto& k, auto& v) { c.model.head.hidden_channels = as_size(k, v); }},
           {"literal_decoder",
            [](RunConfig& c, auto& k, auto& v) { c.model.literal_decoder = parse_bool(k, v); }},
       }},
      {"train",
       {
           {"lr", [](RunConfig& c, auto& k, auto& v) { c.train.lr = parse_real(k, v); }},
           {"adam_eps", [](RunConfig& c, auto& k, auto& v) { c.train.adam_eps = parse_real(k, v); }},
           {"weight_decay",
            [](RunConfig& c, auto& k, auto& v) { c.train.weight_decay = parse_real(k, v); }},
           {"batch_size", [](RunConfig& c, auto& k, auto& v) { c.train.batch_size = as_size(k, v); }},
           {"epochs", [](RunConfig& c, auto& k, auto& v) { c.train.epochs = as_size(k, v); }},
           {"poly_power",
            [](RunConfig& c, auto& k, auto& v) { c.train.poly_power = parse_real(k, v); }},
           {"seed",
            [](RunConfig& c, auto& k, auto& v) {
              c.train.seed = parse_unsigned<std::uint64_t>(k, v);
            }},
           {"checkpoint_every",
            [](RunConfig& c, auto& k, auto& v) { c.train.checkpoint_every = as_size(k, v); }},
           {"out_dir", [](RunConfig& c, auto&, auto& v) { c.out_dir = v; }},
           {"ablation_variants",
            [](RunConfig& c, auto&, auto& v) {
              c.ablation_variants.clear();
              for (const auto& p : split_list(v)) c.ablation_variants.push_back(parse_variant(p));
            }},
           {"ablation_scales",
            [](RunConfig& c, auto&, auto& v) {
              c.ablation_scales.clear();
              for (const auto& p : split_list(v)) c.ablation_scales.push_back(parse_scale(p));
            }},
           {"ablation_seeds",
            [](RunConfig& c, auto& k, auto& v) {
              c.ablation_seeds.clear();
              for (const auto& p : split_list(v)) {
                c.ablation_seeds.push_back(parse_unsigned<std::uint64_t>(k, p));
              }
            }},
       }},
      {"data",
       {
           {"root", [](RunConfig& c, auto&, auto& v) { c.data.root = v; }},
           {"synth_seed",
            [](RunConfig& c, auto& k, auto& v) {
              c.data.synth_seed = parse_unsigned<std::uint64_t>(k, v);
            }},
           {"synth_train", [](RunConfig& c, auto& k, auto& v) { c.data.synth_train = as_size(k, v); }},
           {"synth_val", [](RunConfig& c, auto& k, auto& v) { c.data.synth_val = as_size(k, v); }},
           {"synth_size", [](RunConfig& c, auto& k, auto& v) { c.data.synth_size = as_size(k, v); }},
       }},
  };
  return s;
}

void validate_run_config(const RunConfig& c) {
  c.model.validate();
  if (!(c.train.lr > 0)) throw ConfigError("lr must be positive");
  if (c.train.epochs == 0) throw ConfigError("epochs must be >= 1");
  if (c.train.batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (!(c.train.adam_eps > 0)) throw ConfigError("adam_eps must be positive");
  if (c.train.weight_decay < 0) throw ConfigError("weight_decay must be >= 0");
  if (!(c.train.poly_power > 0)) throw ConfigError("poly_power must be positive");
  if (c.data.synth_size == 0 || c.data.synth_size % 16 != 0) {
    throw ConfigError("synth_size must be a positive multiple of 16");
  }
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  std::istringstream in(text);
  std::string line, section;
  std::map<std::string, std::map<std::string, std::string>> values;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto cut = line.find_first_of("#;");
    if (cut != std::string::npos) line.erase(cut);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      if (!schema().count(section)) throw ConfigError("unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty()) {
      throw ConfigError("key '" + key + "' appears before any [model], [train] or [data] section");
    }
    const bool known = schema().at(section).count(key) || (section == "model" && key == "scale");
    if (!known) throw ConfigError("unknown key '" + key + "' in [" + section + "]");
    if (!values[section].emplace(key, value).second) {
      throw ConfigError("duplicate key '" + key + "' in [" + section + "]");
    }
  }

  RunConfig cfg;
  cfg.model.apply_scale(Scale::small);
  if (auto it = values["model"].find("scale"); it != values["model"].end()) {
    cfg.train.scale = parse_scale(it->second);
    cfg.model.apply_scale(cfg.train.scale);
    cfg.ablation_scales = {cfg.train.scale};
  }
  for (const auto& [section, kv] : values) {
    for (const auto& [key, value] : kv) {
      if (section == "model" && key == "scale") continue;
      schema().at(section).at(key)(cfg, key, value);
    }
  }
  cfg.train.variant = cfg.model.variant;
  validate_run_config(cfg);
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string format_run_config(const RunConfig& c) {
  std::ostringstream o;
  o.precision(17);
  const auto& m = c.model;
  const auto& sc = m.backbone.stage_channels;
  o << "[model]\n"
    << "scale = " << to_string(c.train.scale) << '\n'
    << "variant = " << to_string(m.variant) << '\n'
    << "embed_dim = " << m.embed_dim << '\n'
    << "enc_layers = " << m.enc_layers << '\n'
    << "dec_layers = " << m.dec_layers << '\n'
    << "heads = " << m.heads << '\n'
    << "mlp_ratio = " << m.mlp_ratio << '\n'
    << "num_classes = " << m.num_classes << '\n'
    << "input_size = " << m.input_size << '\n'
    << "stage_channels = " << sc[0] << ',' << sc[1] << ',' << sc[2] << ',' << sc[3] << '\n'
    << "last_stage_dilation = " << m.backbone.last_stage_dilation << '\n'
    << "head_hidden = " << m.head.hidden_channels << '\n'
    << "literal_decoder = " << (m.literal_decoder ? "true" : "false") << '\n';
  o << "\n[train]\n"
    << "lr = " << c.train.lr << '\n'
    << "adam_eps = " << c.train.adam_eps << '\n'
    << "weight_decay = " << c.train.weight_decay << '\n'
    << "batch_size = " << c.train.batch_size << '\n'
    << "epochs = " << c.train.epochs << '\n'
    << "poly_power = " << c.train.poly_power << '\n'
    << "seed = " << c.train.seed << '\n'
    << "checkpoint_every = " << c.train.checkpoint_every << '\n';
  if (c.out_dir) o << "out_dir = " << c.out_dir->string() << '\n';
  auto join = [&](const auto& xs, auto fmt) {
    std::string s;
    for (const auto& x : xs) s += (s.empty() ? "" : ",") + fmt(x);
    return s;
  };
  o << "ablation_variants = "
    << join(c.ablation_variants, [](Variant v) { return to_string(v); }) << '\n'
    << "ablation_scales = " << join(c.ablation_scales, [](Scale s) { return to_string(s); })
    << '\n'
    << "ablation_seeds = "
    << join(c.ablation_seeds, [](std::uint64_t s) { return std::to_string(s); }) << '\n';
  o << "\n[data]\n";
  if (c.data.root) o << "root = " << c.data.root->string() << '\n';
  o << "synth_seed = " << c.data.synth_seed << '\n'
    << "synth_train = " << c.data.synth_train << '\n'
    << "synth_val = " << c.data.synth_val << '\n'
    << "synth_size = " << c.data.synth_size << '\n';
  return o.str();
}

RunConfig resolve_run_config(const CommonOptions& opts) {
  RunConfig cfg = opts.config ? load_run_config(*opts.config) : parse_run_config("");
  if (opts.seed) cfg.train.seed = *opts.seed;
  if (opts.out) cfg.out_dir = *opts.out;
  return cfg;
}

Splits load_splits(const RunConfig& cfg) {
  const std::size_t n = cfg.model.num_classes;
  Splits s;
  if (cfg.data.root) {
    if (!std::filesystem::is_directory(*cfg.data.root)) {
      throw DataError("data root " + cfg.data.root->string() + " is not a directory");
    }
    s.train = load_dataset(*cfg.data.root / "train", n);
    s.val = load_dataset(*cfg.data.root / "val", n);
    if (s.train.empty()) {
      throw DataError("no training images under " + (*cfg.data.root / "train").string());
    }
    return s;
  }
  auto all = synth_dataset(cfg.data.synth_seed, cfg.data.synth_train + cfg.data.synth_val,
                           cfg.data.synth_size, n);
  s.val.assign(all.begin() + std::ptrdiff_t(cfg.data.synth_train), all.end());
  all.resize(cfg.data.synth_train);
  s.train = std::move(all);
  return s;
}

namespace {

// Maps the error hierarchy onto exit codes.
int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const DimensionError& e) {
    err << "dimension error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ConfigError("cannot write " + path.string());
  f << text;
}

}  // namespace

int cmd_train(const CommonOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    RunConfig cfg = resolve_run_config(opts);
    Splits splits = load_splits(cfg);
    if (cfg.out_dir) {
      std::filesystem::create_directories(*cfg.out_dir);
      write_text(*cfg.out_dir / "config.ini", format_run_config(cfg));
    }
    SegModel<float> model(cfg.model, cfg.train.seed);
    train(model, splits.train, splits.val, cfg.train, {cfg.out_dir, &out});
    return int(kExitOk);
  });
}

int cmd_eval(const CommonOptions& opts, const std::filesystem::path& checkpoint,
             const std::string& split, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    RunConfig cfg = resolve_run_config(opts);
    if (split != "train" && split != "val") {
      throw ConfigError("unknown split '" + split + "' (expected train or val)");
    }
    SegModel<float> model(cfg.model, cfg.train.seed);
    load_checkpoint(model.params(), checkpoint.string());
    Splits splits = load_splits(cfg);
    const auto& samples = split == "train" ? splits.train : splits.val;
    if (samples.empty()) throw DataError("split '" + split + "' is empty");
    const auto report =
        make_eval_report(evaluate(model, samples), default_class_names(cfg.model.num_classes));
    write_eval_table(out, report);
    if (cfg.out_dir) {
      std::filesystem::create_directories(*cfg.out_dir);
      std::ostringstream csv;
      write_eval_csv(csv, report);
      write_text(*cfg.out_dir / "eval.csv", csv.str());
    }
    return int(kExitOk);
  });
}

int cmd_infer(const CommonOptions& opts, const std::filesystem::path& checkpoint,
              const std::filesystem::path& image, const std::filesystem::path& output,
              std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    RunConfig cfg = resolve_run_config(opts);
    SegModel<float> model(cfg.model, cfg.train.seed);
    load_checkpoint(model.params(), checkpoint.string());
    const RgbImage rgb = read_rgb_png(image);
    Sample sample{to_tensor(rgb), MaskImage(rgb.width, rgb.height), image.stem().string(), ""};
    const Sample resized = resize_sample(sample, cfg.model.input_size);
    const MaskImage pred = model.predict(resized.image);
    const MaskImage full = resize_mask_nearest(pred, rgb.width, rgb.height);
    write_rgb_png(output, colorize(full));
    out << "wrote " << output.string() << " (" << rgb.width << "x" << rgb.height << ")\n";
    return int(kExitOk);
  });
}

int cmd_ablate(const CommonOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    RunConfig cfg = resolve_run_config(opts);
    Splits splits = load_splits(cfg);
    if (splits.val.empty()) throw DataError("ablation needs a non-empty validation split");
    std::vector<AblationEntry> grid;
    for (auto scale : cfg.ablation_scales) {
      for (auto variant : cfg.ablation_variants) {
        for (auto seed : cfg.ablation_seeds) grid.push_back({variant, scale, seed});
      }
    }
    TrainConfig tc = cfg.train;
    tc.checkpoint_every = 0;
    const auto rows = ablation_run(cfg.model, tc, grid, splits.train, splits.val, &err);
    std::ostringstream csv;
    write_ablation_csv(csv, rows);
    out << csv.str();
    if (cfg.out_dir) {
      std::filesystem::create_directories(*cfg.out_dir);
      write_text(*cfg.out_dir / "ablation.csv", csv.str());
    }
    return int(kExitOk);
  });
}

std::vector<StatsRow> corpus_stats(const std::vector<MaskImage>& masks, std::size_t num_classes) {
  const auto names = default_class_names(num_classes);
  std::vector<StatsRow> rows;
  for (std::size_t c = 1; c < num_classes; ++c) {
    StatsRow r;
    r.name = names[c];
    r.images = images_containing(masks, std::uint8_t(c));
    if (r.images) r.cmcc = cmcc(masks, std::uint8_t(c));
    std::uint64_t fg = 0;
    for (const auto& m : masks) {
      for (auto v : m.labels) fg += v != 0 && v != kIgnoreLabel;
    }
    r.pixel_ratio = fg ? pixel_ratio(masks, std::uint8_t(c)) : 0.0;
    rows.push_back(r);
  }
  return rows;
}

void write_stats(std::ostream& out, const std::vector<StatsRow>& rows, std::size_t total_images) {
  char buf[128];
  out << "class,image_num,cmcc,pixel_ratio\n";
  double ratio_sum = 0;
  for (const auto& r : rows) {
    out << r.name << ',' << r.images << ',';
    if (r.cmcc) {
      std::snprintf(buf, sizeof(buf), "%.4f", *r.cmcc);
      out << buf;
    } else {
      out << "NA";
    }
    // Six decimals keep the column sum within 1e-4 of one after rounding.
    std::snprintf(buf, sizeof(buf), ",%.6f\n", r.pixel_ratio);
    out << buf;
    ratio_sum += r.pixel_ratio;
  }
  std::snprintf(buf, sizeof(buf), "total,%zu,,%.6f\n", total_images, ratio_sum);
  out << buf;
}

int cmd_stats(const CommonOptions& opts, const std::optional<std::filesystem::path>& root,
              std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    RunConfig cfg = resolve_run_config(opts);
    if (root) cfg.data.root = *root;
    std::vector<MaskImage> masks;
    auto take = [&](const std::vector<Sample>& samples) {
      for (const auto& s : samples) masks.push_back(s.mask);
    };
    if (cfg.data.root && std::filesystem::is_directory(*cfg.data.root / "images")) {
      take(load_dataset(*cfg.data.root, cfg.model.num_classes));
    } else {
      Splits s = load_splits(cfg);
      take(s.train);
      take(s.val);
    }
    if (masks.empty()) throw DataError("no masks found");
    write_stats(out, corpus_stats(masks, cfg.model.num_classes), masks.size());
    return int(kExitOk);
  });
}

int cmd_gradcheck(std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    constexpr double kTolerance = 1e-4;
    bool ok = true;
    char buf[128];
    for (const auto& r : run_gradcheck_suite(kTolerance)) {
      std::snprintf(buf, sizeof(buf), "%-28s %.3e %s\n", r.name.c_str(), r.max_rel_error,
                    r.passed ? "ok" : "FAIL");
      out << buf;
      ok = ok && r.passed;
    }
    if (!ok) err << "gradcheck: at least one op exceeds " << kTolerance << '\n';
    return int(ok ? kExitOk : kExitNumerical);
  });
}

int cmd_flops(const CommonOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    RunConfig cfg = resolve_run_config(opts);
    SegModel<float> model(cfg.model, cfg.train.seed);
    const auto params = model.param_count_by_module();
    const auto macs = count_macs(model);
    std::map<std::string, std::pair<std::size_t, std::uint64_t>> rows;
    for (const auto& [k, v] : params) rows[k].first = v;
    for (const auto& [k, v] : macs) rows[k].second = v;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%-12s %14s %16s\n", "module", "params", "MACs");
    out << buf;
    std::size_t total_p = 0;
    std::uint64_t total_m = 0;
    for (const auto& [k, pm] : rows) {
      std::snprintf(buf, sizeof(buf), "%-12s %14zu %16llu\n", k.c_str(), pm.first,
                    static_cast<unsigned long long>(pm.second));
      out << buf;
      total_p += pm.first;
      total_m += pm.second;
    }
    std::snprintf(buf, sizeof(buf), "%-12s %14zu %16llu\n", "total", total_p,
                  static_cast<unsigned long long>(total_m));
    out << buf;
    out << "input " << cfg.model.input_size << "x" << cfg.model.input_size
        << "; one MAC is one multiply-accumulate (about 2 FLOPs)\n";
    return int(kExitOk);
  });
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Transparent-object segmentation with a hybrid CNN-Transformer", "trans2seg"};
  app.require_subcommand(1);

  CommonOptions common;
  std::string config, out_dir;
  std::uint64_t seed = 0;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "Run configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Seed for initialization and shuffling");
    sub->add_option("--out", out_dir, "Output directory");
  };

  auto* train_cmd = app.add_subcommand("train", "Train a model");
  add_common(train_cmd);

  std::string checkpoint, split = "val";
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_common(eval_cmd);
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--split", split, "train or val");

  std::string image, output;
  auto* infer_cmd = app.add_subcommand("infer", "Write a colour-coded mask for one image");
  add_common(infer_cmd);
  infer_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  infer_cmd->add_option("--image", image, "Input PNG")->required();
  infer_cmd->add_option("--output", output, "Output PNG")->required();

  auto* ablate_cmd = app.add_subcommand("ablate", "Train and evaluate a variant/scale grid");
  add_common(ablate_cmd);

  std::string root;
  auto* stats_cmd = app.add_subcommand("stats", "Per-class corpus statistics");
  add_common(stats_cmd);
  stats_cmd->add_option("root", root, "Dataset root or split directory");

  auto* gradcheck_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  auto* flops_cmd = app.add_subcommand("flops", "Parameter and MAC counts per module");
  add_common(flops_cmd);

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    return kExitConfig;
  }

  auto* sub = app.get_subcommands().front();
  if (!config.empty()) common.config = config;
  if (sub != gradcheck_cmd && sub->count("--seed")) common.seed = seed;
  if (!out_dir.empty()) common.out = out_dir;

  if (sub == train_cmd) return cmd_train(common, out, err);
  if (sub == eval_cmd) return cmd_eval(common, checkpoint, split, out, err);
  if (sub == infer_cmd) return cmd_infer(common, checkpoint, image, output, out, err);
  if (sub == ablate_cmd) return cmd_ablate(common, out, err);
  if (sub == stats_cmd) {
    return cmd_stats(common, root.empty() ? std::nullopt : std::optional<std::filesystem::path>(root),
                     out, err);
  }
  if (sub == gradcheck_cmd) return cmd_gradcheck(out, err);
  return cmd_flops(common, out, err);
}

}  // namespace t2s
