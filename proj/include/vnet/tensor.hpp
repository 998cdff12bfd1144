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

#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace vnet {

/// Extent of a rank-5 tensor laid out as (N, C, D, H, W), W fastest.
struct Shape {
  int n = 1;
  int c = 1;
  int d = 1;
  int h = 1;
  int w = 1;

  std::size_t count() const noexcept { return spatial() * static_cast<std::size_t>(c) * n; }
  std::size_t spatial() const noexcept {
    return static_cast<std::size_t>(d) * static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  }
  std::size_t index(int in, int ic, int z, int y, int x) const noexcept {
    return (((static_cast<std::size_t>(in) * c + ic) * d + z) * h + y) * w + x;
  }
  std::array<int, 5> as_array() const noexcept { return {n, c, d, h, w}; }
  bool operator==(const Shape&) const = default;
};

std::string to_string(const Shape& shape);

/// Dense rank-5 array of doubles.
class Tensor5 {
 public:
  Tensor5() = default;
  /// Zero-filled tensor; throws InvalidArgument on a non-positive extent.
  explicit Tensor5(Shape shape);
  Tensor5(Shape shape, std::vector<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double* data() noexcept { return values_.data(); }
  const double* data() const noexcept { return values_.data(); }
  std::span<double> span() noexcept { return values_; }
  std::span<const double> span() const noexcept { return values_; }
  std::vector<double>& values() noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }

  double& operator[](std::size_t i) noexcept { return values_[i]; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  double& at(int n, int c, int z, int y, int x) noexcept { return values_[shape_.index(n, c, z, y, x)]; }
  double at(int n, int c, int z, int y, int x) const noexcept {
    return values_[shape_.index(n, c, z, y, x)];
  }

  void fill(double v);

 private:
  Shape shape_{0, 0, 0, 0, 0};
  std::vector<double> values_;
};

/// Throws NumericError naming `what` if any entry is NaN or infinite.
void require_finite(std::span<const double> values, const std::string& what);

}  // namespace vnet
