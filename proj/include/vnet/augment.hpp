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

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

#include "vnet/config.hpp"
#include "vnet/volume.hpp"

namespace vnet {

/// Independent generator for a tuple of stream coordinates, e.g.
/// (seed, iteration, slot). Equal tuples give equal streams.
std::mt19937_64 make_stream(std::initializer_list<std::uint64_t> coordinates);

/// Displacement in voxels along (z, y, x).
struct Displacement {
  double z = 0.0;
  double y = 0.0;
  double x = 0.0;
  bool operator==(const Displacement&) const = default;
};

/// size^3 control points spanning the volume corner to corner, z-major.
struct ControlGrid {
  int size = 2;
  std::vector<Displacement> points;

  Displacement& at(int z, int y, int x) { return points[static_cast<std::size_t>((z * size + y) * size + x)]; }
  const Displacement& at(int z, int y, int x) const {
    return points[static_cast<std::size_t>((z * size + y) * size + x)];
  }
};

/// Control points with i.i.d. N(0, sigma^2) components, drawn z, y, x per
/// point in grid order.
ControlGrid sample_control_grid(double sigma, std::mt19937_64& rng, int size = 2);

struct DeformationField {
  Dims dims;
  std::vector<Displacement> vectors;

  const Displacement& at(int z, int y, int x) const { return vectors[dims.index(z, y, x)]; }
};

/// Tensor-product B-spline of `degree` over clamped uniform knots, evaluated
/// at t = i / (n - 1) on each axis. Degree 1 on a 2-point grid is trilinear
/// interpolation of the corners. Constant grids give exactly constant fields
/// and corner voxels reproduce their control point exactly.
DeformationField densify(const ControlGrid& grid, Dims dims, int degree = 1);

/// output(p) = input(p + f(p)) with border clamp: trilinear for images.
Volume warp(const Volume& volume, const DeformationField& field);
/// Nearest neighbour for labels, so they stay binary.
LabelVolume warp(const LabelVolume& label, const DeformationField& field);

/// Monotone remapping of `src` so its 256-bin piecewise-linear CDF follows
/// that of `ref`. Output stays within [min ref, max ref]. A constant `ref`
/// maps everything to its value; a constant `src` maps to the median of ref.
Volume histogram_match(const Volume& src, const Volume& ref, int bins = 256);

/// Trilinear resampling to `target` spacing; extent n * spacing is kept to
/// within one voxel. Throws InvalidArgument on non-positive spacing.
Volume resample(const Volume& volume, Spacing target);

struct NormalizedVolume {
  Volume volume;
  /// Set when the input was constant and the output is all zeros.
  bool constant = false;
};

/// (v - mean) / stddev with the population stddev.
NormalizedVolume normalize_zscore(const Volume& volume);

struct AugmentPolicy {
  bool deform = true;
  /// Stddev of control point displacements in voxels.
  double sigma = 15.0;
  int grid_size = 2;
  int spline_degree = 1;
  bool histogram_match = true;

  void validate() const;
};

struct AugmentedPair {
  Volume image;
  LabelVolume label;
};

/// Histogram matching against `reference` (when enabled and given), then the
/// same random deformation for image and label, then z-score normalisation.
AugmentedPair augment_pair(const Volume& image, const LabelVolume& label, const Volume* reference,
                           const AugmentPolicy& policy, std::mt19937_64& rng);

}  // namespace vnet
