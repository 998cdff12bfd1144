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

#include "vnet/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "vnet/error.hpp"
#include "vnet/tape.hpp"

namespace vnet {

std::string to_string(const Shape& s) {
  return "(" + std::to_string(s.n) + "," + std::to_string(s.c) + "," + std::to_string(s.d) + "," +
         std::to_string(s.h) + "," + std::to_string(s.w) + ")";
}

namespace {
void check_shape(const Shape& s) {
  for (int e : s.as_array()) {
    if (e <= 0) {
      throw InvalidArgument("tensor extents must be positive, got " + to_string(s));
    }
  }
}
}  // namespace

Tensor5::Tensor5(Shape shape) : shape_(shape) {
  check_shape(shape_);
  values_.assign(shape_.count(), 0.0);
}

Tensor5::Tensor5(Shape shape, std::vector<double> values)
    : shape_(shape), values_(std::move(values)) {
  check_shape(shape_);
  if (values_.size() != shape_.count()) {
    throw ShapeError("tensor of shape " + to_string(shape_) + " given " +
                     std::to_string(values_.size()) + " values");
  }
}

void Tensor5::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

void require_finite(std::span<const double> values, const std::string& what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw NumericError(what + ": non-finite value at flat index " + std::to_string(i));
    }
  }
}

// ---------------------------------------------------------------------------
// Tape

Tensor5& Node::grad_buffer() {
  if (grad.shape() != value.shape()) {
    grad = Tensor5(value.shape());
  }
  return grad;
}

Var parameter(Tensor5 value) {
  auto v = std::make_shared<Node>();
  v->value = std::move(value);
  v->requires_grad = true;
  return v;
}

Var constant(Tensor5 value) {
  auto v = std::make_shared<Node>();
  v->value = std::move(value);
  return v;
}

void zero_grad(const Var& v) {
  if (!v->grad.empty()) {
    v->grad.fill(0.0);
  }
}

Var Tape::make_output(Tensor5 value, std::initializer_list<const Var*> inputs) {
  auto out = std::make_shared<Node>();
  out->value = std::move(value);
  out->leaf = false;
  if (recording_) {
    out->requires_grad =
        std::any_of(inputs.begin(), inputs.end(), [](const Var* in) { return (*in)->requires_grad; });
  }
  return out;
}

void Tape::record(const Var& output, BackwardFn fn) {
  if (!recording_ || !output->requires_grad) {
    return;
  }
  entries_.push_back({output, std::move(fn)});
}

void Tape::backward(const Var& root) {
  if (root->value.size() != 1) {
    throw ShapeError("backward needs a scalar root, got shape " + to_string(root->value.shape()));
  }
  auto it = std::find_if(entries_.rbegin(), entries_.rend(),
                         [&](const Entry& e) { return e.output == root; });
  if (it == entries_.rend()) {
    throw StateError("backward called on a value that no recorded op produced");
  }
  for (auto& e : entries_) {
    e.output->grad_buffer().fill(0.0);
  }
  root->grad[0] = 1.0;
  for (; it != entries_.rend(); ++it) {
    it->fn();
  }
}

}  // namespace vnet
