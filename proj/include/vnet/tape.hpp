// Copyright 2026 The VNet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Reverse-mode differentiation over Tensor5 values.
//
// A Var is a shared handle to a node holding a value and, once backward has
// touched it, a gradient of the same shape. Ops append an entry to the Tape
// whenever one of their inputs requires a gradient; Tape::backward replays the
// entries in reverse. Leaf gradients accumulate across backward calls until
// zero_grad(), intermediate gradients are recomputed from scratch each call.

#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "vnet/tensor.hpp"

namespace vnet {

struct Node {
  Tensor5 value;
  Tensor5 grad;
  bool requires_grad = false;
  bool leaf = true;

  /// Gradient buffer, allocated (zeroed) on first use.
  Tensor5& grad_buffer();
};

using Var = std::shared_ptr<Node>;

/// Trainable leaf.
Var parameter(Tensor5 value);
/// Non-trainable leaf (inputs, labels, constants).
Var constant(Tensor5 value);

void zero_grad(const Var& v);

class Tape {
 public:
  using BackwardFn = std::function<void()>;

  /// A tape constructed with `recording = false` executes ops without keeping
  /// any backward state, releasing intermediates as soon as they go out of
  /// scope. Used for inference.
  explicit Tape(bool recording = true) : recording_(recording) {}

  bool recording() const noexcept { return recording_; }
  std::size_t size() const noexcept { return entries_.size(); }

  /// Creates the output node of an op. It requires a gradient iff recording
  /// and any input does.
  Var make_output(Tensor5 value, std::initializer_list<const Var*> inputs);

  /// Registers the backward rule for `output`; ignored when output does not
  /// require a gradient. The rule reads output->grad and accumulates into the
  /// inputs' grad_buffer().
  void record(const Var& output, BackwardFn fn);

  /// Seeds d(root)/d(root) = 1 and propagates to every recorded input.
  /// Throws StateError when nothing was recorded for `root` and ShapeError when
  /// root is not a scalar.
  void backward(const Var& root);

  void clear() { entries_.clear(); }

 private:
  struct Entry {
    Var output;
    BackwardFn fn;
  };
  bool recording_;
  std::vector<Entry> entries_;
};

}  // namespace vnet
