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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace vnet {

/// Voxel grid extent in (z, y, x) order; x is the fastest-varying axis.
struct Dims {
  int d = 0;
  int h = 0;
  int w = 0;

  std::size_t count() const noexcept {
    return static_cast<std::size_t>(d) * static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  }
  std::size_t index(int z, int y, int x) const noexcept {
    return (static_cast<std::size_t>(z) * h + y) * w + x;
  }
  bool operator==(const Dims&) const = default;
};

/// Millimetres per voxel along (z, y, x).
struct Spacing {
  double z = 1.0;
  double y = 1.0;
  double x = 1.0;
  bool operator==(const Spacing&) const = default;
};

std::string to_string(const Dims& dims);

enum class VolumeKind { image, label };

/// Single-channel scalar field on a regular lattice. The element type decides
/// the kind: `double` intensities for images, `uint8_t` {0,1} for labels.
template <typename T>
class BasicVolume {
 public:
  using value_type = T;

  BasicVolume() = default;
  /// Throws InvalidArgument when dims/spacing/data violate the invariants.
  BasicVolume(Dims dims, Spacing spacing, std::vector<T> data);
  BasicVolume(Dims dims, Spacing spacing);

  const Dims& dims() const noexcept { return dims_; }
  const Spacing& spacing() const noexcept { return spacing_; }
  std::size_t size() const noexcept { return data_.size(); }

  const std::vector<T>& data() const noexcept { return data_; }
  std::vector<T>& data() noexcept { return data_; }

  T& at(int z, int y, int x) noexcept { return data_[dims_.index(z, y, x)]; }
  const T& at(int z, int y, int x) const noexcept { return data_[dims_.index(z, y, x)]; }

  bool operator==(const BasicVolume&) const = default;

 private:
  Dims dims_;
  Spacing spacing_;
  std::vector<T> data_;
};

using Volume = BasicVolume<double>;
using LabelVolume = BasicVolume<std::uint8_t>;

extern template class BasicVolume<double>;
extern template class BasicVolume<std::uint8_t>;

/// Number of voxels equal to 1.
std::size_t foreground_count(const LabelVolume& label);

// VVOL1 container. Intensities are stored as little-endian float32, so a
// double that is not exactly representable in single precision is rounded on
// save; everything produced by load_volume and generate_synthetic round-trips
// bit-exactly.
Volume load_volume(const std::filesystem::path& path);
LabelVolume load_label(const std::filesystem::path& path);
VolumeKind peek_volume_kind(const std::filesystem::path& path);
void save_volume(const Volume& volume, const std::filesystem::path& path);
void save_volume(const LabelVolume& label, const std::filesystem::path& path);

enum class ShapeKind { sphere, ellipsoid };

struct SyntheticSpec {
  Dims dims{32, 32, 32};
  Spacing spacing{};
  ShapeKind shape = ShapeKind::sphere;
  /// Shape centre in voxel coordinates (z, y, x).
  double center_z = 15.5;
  double center_y = 15.5;
  double center_x = 15.5;
  /// Semi-axes in voxels (z, y, x). A sphere requires all three equal.
  double radius_z = 8.0;
  double radius_y = 8.0;
  double radius_x = 8.0;
  double foreground_mean = 1.0;
  double foreground_stddev = 0.1;
  double background_mean = 0.0;
  double background_stddev = 0.1;
  double noise_stddev = 0.05;
  std::uint64_t seed = 0;
};

/// Point-in-shape test at voxel centre (z, y, x).
bool inside_shape(const SyntheticSpec& spec, int z, int y, int x);

/// Image/label pair for one analytic shape. Image values are rounded to single
/// precision. Throws InvalidArgument if no voxel centre falls inside the shape.
std::pair<Volume, LabelVolume> generate_synthetic(const SyntheticSpec& spec);

/// `count` specs derived from `base`: the centre is jittered by up to
/// `center_jitter` voxels per axis and radii scaled by a factor drawn from
/// [1 - radius_jitter, 1 + radius_jitter], all from `base.seed`.
std::vector<SyntheticSpec> derive_specs(const SyntheticSpec& base, int count,
                                        double center_jitter, double radius_jitter);

/// A named image/label pair as found in a dataset directory.
struct Sample {
  std::string name;
  Volume image;
  LabelVolume label;
};

using Dataset = std::vector<Sample>;

/// Loads every `<name>_image.vvol` with its `<name>_label.vvol`, sorted by name.
Dataset load_dataset(const std::filesystem::path& dir);
void save_sample(const Sample& sample, const std::filesystem::path& dir);

}  // namespace vnet
