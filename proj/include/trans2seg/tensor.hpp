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
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "trans2seg/errors.hpp"

namespace t2s {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

namespace detail {

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until a gradient is accumulated
  bool requires_grad = false;

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
  }
};

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

}  // namespace detail

/// Dense row-major n-dimensional array with an optional gradient buffer.
///
/// A Tensor is a handle: copies share storage, the way parameters are shared
/// between a module and the optimizer. clone() makes an independent copy.
/// Ops never alias their inputs; every op allocates a fresh output.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T(0)) : node_(std::make_shared<detail::Node<T>>()) {
    for (auto d : shape) {
      if (d == 0) throw DimensionError("tensor dims must be positive, got " + shape_str(shape));
    }
    node_->data.assign(shape_numel(shape), fill);
    node_->shape = std::move(shape);
  }

  Tensor(Shape shape, std::vector<T> values) : node_(std::make_shared<detail::Node<T>>()) {
    for (auto d : shape) {
      if (d == 0) throw DimensionError("tensor dims must be positive, got " + shape_str(shape));
    }
    if (shape_numel(shape) != values.size()) {
      throw DimensionError("shape " + shape_str(shape) + " does not hold " +
                           std::to_string(values.size()) + " values");
    }
    node_->shape = std::move(shape);
    node_->data = std::move(values);
  }

  static Tensor scalar(T v) { return Tensor(Shape{1}, std::vector<T>{v}); }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t numel() const { return node_->data.size(); }

  std::span<T> data() { return node_->data; }
  std::span<const T> data() const { return node_->data; }
  T* ptr() { return node_->data.data(); }
  const T* ptr() const { return node_->data.data(); }
  T& operator[](std::size_t i) { return node_->data[i]; }
  const T& operator[](std::size_t i) const { return node_->data[i]; }

  T item() const {
    if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape_str(shape()));
    return node_->data[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool on = true) {
    node_->requires_grad = on;
    return *this;
  }

  bool has_grad() const { return node_->grad.size() == node_->data.size(); }
  std::span<const T> grad() const { return node_->grad; }
  // Tensors are handles; the gradient buffer belongs to the shared node.
  std::span<T> mutable_grad() const {
    node_->ensure_grad();
    return node_->grad;
  }
  void zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), T(0)); }
  void clear_grad() { node_->grad.clear(); }

  /// Deep copy of the values; the copy does not require grad.
  Tensor clone() const { return Tensor(shape(), node_->data); }

  bool same_storage(const Tensor& other) const { return node_ == other.node_; }

  const detail::NodePtr<T>& node() const { return node_; }
  static Tensor from_node(detail::NodePtr<T> node) {
    Tensor t;
    t.node_ = std::move(node);
    return t;
  }

 private:
  detail::NodePtr<T> node_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

template <typename T>
class Tape;

namespace detail {
template <typename T>
Tape<T>*& active_tape_slot() {
  thread_local Tape<T>* slot = nullptr;
  return slot;
}
}  // namespace detail

/// Records differentiable ops in execution order and replays them backward once.
///
/// Ops record onto the tape that is active on the current thread (see
/// TapeScope). With no active tape, ops run as plain forward computation.
template <typename T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(std::vector<detail::NodePtr<T>> inputs, detail::NodePtr<T> output,
              std::function<void()> backward) {
    if (replayed_) throw StateError("cannot record on a tape that was already replayed");
    entries_.push_back({std::move(inputs), std::move(output), std::move(backward)});
  }

  std::size_t size() const { return entries_.size(); }
  bool replayed() const { return replayed_; }

  /// Seeds d(loss)/d(loss) = 1 and runs every recorded backward rule in reverse.
  /// Gradients accumulate into leaf buffers; leaves that do not reach the loss
  /// end up with zero-filled gradients.
  void backward(const Tensor<T>& loss) {
    if (replayed_) throw StateError("backward called twice on the same tape");
    if (loss.numel() != 1) {
      throw DimensionError("backward needs a scalar loss, got " + shape_str(loss.shape()));
    }
    replayed_ = true;
    std::unordered_set<detail::Node<T>*> produced;
    for (const auto& e : entries_) produced.insert(e.output.get());
    for (const auto& e : entries_) {
      for (const auto& in : e.inputs) {
        if (in->requires_grad && !produced.count(in.get())) in->ensure_grad();
      }
    }
    if (!produced.count(loss.node().get())) {
      // Loss is a leaf (or was not recorded here); only its own gradient is defined.
      if (loss.requires_grad()) loss.node()->ensure_grad(), loss.node()->grad[0] += T(1);
      entries_.clear();
      return;
    }
    loss.node()->ensure_grad();
    loss.node()->grad[0] += T(1);
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
      if (it->output->grad.empty()) continue;  // not reachable from the loss
      it->backward();
      it->output->grad.clear();
      it->output->grad.shrink_to_fit();
    }
    entries_.clear();
  }

 private:
  struct Entry {
    std::vector<detail::NodePtr<T>> inputs;
    detail::NodePtr<T> output;
    std::function<void()> backward;
  };
  std::vector<Entry> entries_;
  bool replayed_ = false;
};

/// Makes a tape active on this thread for the lifetime of the scope.
template <typename T>
class TapeScope {
 public:
  explicit TapeScope(Tape<T>& tape) : prev_(detail::active_tape_slot<T>()) {
    detail::active_tape_slot<T>() = &tape;
  }
  ~TapeScope() { detail::active_tape_slot<T>() = prev_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape<T>* prev_;
};

template <typename T>
Tape<T>* active_tape() {
  return detail::active_tape_slot<T>();
}

/// Runs backward on the thread's active tape.
template <typename T>
void backward(const Tensor<T>& loss) {
  auto* tape = active_tape<T>();
  if (!tape) throw StateError("backward called with no active tape");
  tape->backward(loss);
}

}  // namespace t2s
