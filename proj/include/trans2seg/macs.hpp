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
#include <map>
#include <string>

namespace t2s {

/// Multiply-accumulate tally of forward matmuls and convolutions, keyed by
/// module label. One MAC is one multiply plus one add (about 2 FLOPs).
/// Element-wise ops, norms and softmax are not counted.
class MacCounter {
 public:
  MacCounter();
  ~MacCounter();
  MacCounter(const MacCounter&) = delete;
  MacCounter& operator=(const MacCounter&) = delete;

  const std::map<std::string, std::uint64_t>& by_module() const { return by_module_; }
  std::uint64_t total() const;

  /// Called by ops; no-op when no counter is active on this thread.
  static void add(std::uint64_t macs);

 private:
  friend class MacLabel;
  std::map<std::string, std::uint64_t> by_module_;
  std::string label_ = "other";
  MacCounter* prev_;
};

/// Attributes MACs counted inside the scope to `label`.
class MacLabel {
 public:
  explicit MacLabel(std::string label);
  ~MacLabel();
  MacLabel(const MacLabel&) = delete;
  MacLabel& operator=(const MacLabel&) = delete;

 private:
  std::string prev_;
  bool active_;
};

}  // namespace t2s
