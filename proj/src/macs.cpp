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

#include "trans2seg/macs.hpp"

#include <utility>

namespace t2s {

namespace {
thread_local MacCounter* g_active = nullptr;
}

MacCounter::MacCounter() : prev_(g_active) { g_active = this; }
MacCounter::~MacCounter() { g_active = prev_; }

std::uint64_t MacCounter::total() const {
  std::uint64_t t = 0;
  for (const auto& [_, v] : by_module_) t += v;
  return t;
}

void MacCounter::add(std::uint64_t macs) {
  if (g_active) g_active->by_module_[g_active->label_] += macs;
}

MacLabel::MacLabel(std::string label) : active_(g_active != nullptr) {
  if (active_) prev_ = std::exchange(g_active->label_, std::move(label));
}

MacLabel::~MacLabel() {
  if (active_ && g_active) g_active->label_ = std::move(prev_);
}

}  // namespace t2s
