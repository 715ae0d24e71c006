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

#include <stdexcept>
#include <string>

namespace t2s {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shape or rank disagreement between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input data (masks, images, dataset layout).
class DataError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf produced by a forward op, or a metric that is undefined.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration, or a checkpoint that does not match the model.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Misuse of stateful objects, e.g. replaying a tape twice.
class StateError : public Error {
 public:
  using Error::Error;
};

}  // namespace t2s
