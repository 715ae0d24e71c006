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

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "trans2seg/tensor.hpp"

namespace t2s {

/// Seeded generator shared by initialization, shuffling and data synthesis.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }
  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  /// Uniform integer in [lo, hi].
  std::int64_t integer(std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(engine_);
  }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

/// Named, insertion-ordered parameter collection. Names are unique.
template <typename T>
class ParamStore {
 public:
  Tensor<T> add(const std::string& name, Tensor<T> value) {
    if (index_.count(name)) throw ConfigError("duplicate parameter name '" + name + "'");
    value.set_requires_grad(true);
    index_.emplace(name, entries_.size());
    entries_.emplace_back(name, value);
    return value;
  }

  Tensor<T> normal(const std::string& name, Shape shape, double stddev, Rng& rng) {
    Tensor<T> t(std::move(shape));
    for (auto& v : t.data()) v = T(rng.normal(0.0, stddev));
    return add(name, t);
  }

  Tensor<T> constant(const std::string& name, Shape shape, T value) {
    return add(name, Tensor<T>(std::move(shape), value));
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  Tensor<T> get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("no parameter named '" + name + "'");
    return entries_[it->second].second;
  }

  const std::vector<std::pair<std::string, Tensor<T>>>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  /// Total number of scalar parameters.
  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& [_, t] : entries_) n += t.numel();
    return n;
  }

  /// Parameter count of entries whose name starts with `prefix`.
  std::size_t count(const std::string& prefix) const {
    std::size_t n = 0;
    for (const auto& [name, t] : entries_) {
      if (name.rfind(prefix, 0) == 0) n += t.numel();
    }
    return n;
  }

  void zero_grad() {
    for (auto& [_, t] : entries_) t.clear_grad();
  }

 private:
  std::vector<std::pair<std::string, Tensor<T>>> entries_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace t2s
