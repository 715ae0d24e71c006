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

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "trans2seg/tensor.hpp"

namespace t2s {

/// Compares the tape gradient of scalar f at x with central differences.
///
/// Returns max_i |analytic_i - (f(x + eps e_i) - f(x - eps e_i)) / 2eps| / max(1, |analytic_i|).
/// x is perturbed in place and restored; f must be deterministic.
template <typename F>
double grad_check(F&& f, TensorD x, double eps = 1e-4) {
  std::vector<double> analytic;
  {
    Tape<double> tape;
    TapeScope<double> scope(tape);
    const bool had = x.requires_grad();
    x.set_requires_grad(true);
    x.clear_grad();
    TensorD y = f(x);
    if (y.numel() != 1) {
      throw DimensionError("grad_check: f must return a scalar, got " + shape_str(y.shape()));
    }
    tape.backward(y);
    analytic.assign(x.grad().begin(), x.grad().end());
    if (analytic.empty()) analytic.assign(x.numel(), 0.0);
    x.clear_grad();
    x.set_requires_grad(had);
  }
  double worst = 0;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const double orig = x[i];
    x[i] = orig + eps;
    const double up = f(x).item();
    x[i] = orig - eps;
    const double down = f(x).item();
    x[i] = orig;
    const double numeric = (up - down) / (2 * eps);
    worst = std::max(worst, std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i])));
  }
  return worst;
}

struct GradCheckResult {
  std::string name;
  double max_rel_error;
  bool passed;
};

/// The shipped op-level and composite checks run by `trans2seg gradcheck`.
/// Everything runs in 64-bit mode at the tiny config (C=16, M=2, T=16).
std::vector<GradCheckResult> run_gradcheck_suite(double tolerance = 1e-4, unsigned seed = 7);

}  // namespace t2s
