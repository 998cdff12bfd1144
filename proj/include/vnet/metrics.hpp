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
#include <chrono>
#include <optional>
#include <string>
#include <vector>

#include "vnet/error.hpp"
#include "vnet/model.hpp"
#include "vnet/volume.hpp"

namespace vnet {

/// Raised when a distance metric is asked about an empty mask.
class EmptyMaskError : public Error {
 public:
  explicit EmptyMaskError(const std::string& what) : Error(what) {}
  const char* kind() const noexcept override { return "missing_prediction"; }
};

/// 2|A n B| / (|A| + |B|); 1 when both are empty. Throws ShapeError on a dims
/// mismatch.
double dice_metric(const LabelVolume& a, const LabelVolume& b);

/// Foreground voxels with a background 6-neighbour or on the volume edge,
/// as (z, y, x) indices in raster order.
std::vector<std::array<int, 3>> boundary_voxels(const LabelVolume& mask);

/// Symmetric Hausdorff distance between the boundary voxel centres of `a`
/// and `b` in millimetres. Throws EmptyMaskError if either mask is empty and
/// ShapeError when dims or spacing differ.
double hausdorff_mm(const LabelVolume& a, const LabelVolume& b);

/// As hausdorff_mm, but each directed distance is the `percentile` (0..100,
/// nearest rank) of the per-point nearest distances instead of their maximum.
double hausdorff_percentile_mm(const LabelVolume& a, const LabelVolume& b, double percentile);

struct SegmentationResult {
  /// Foreground probability per voxel.
  Volume probability;
  /// 1 exactly where probability > 0.5.
  LabelVolume mask;
  std::chrono::duration<double> elapsed{};
};

/// Foreground mask of a probability volume, strict > 0.5.
LabelVolume threshold_mask(const Volume& probability);

/// Z-score normalises `image`, runs the network without recording and
/// thresholds the softmax foreground channel. Throws ShapeError when the
/// image dims differ from the model input.
SegmentationResult segment(const VNetModel& model, const Volume& image);

struct MetricsRow {
  std::string volume;
  double dice = 0.0;
  /// Unset when the status is not "ok".
  std::optional<double> hausdorff_mm;
  std::string status = "ok";
};

struct MetricsReport {
  std::vector<MetricsRow> rows;
  std::size_t included = 0;
  std::size_t excluded = 0;
  double mean_dice = 0.0;
  double stddev_dice = 0.0;
  double mean_hausdorff_mm = 0.0;
  double stddev_hausdorff_mm = 0.0;

  /// `volume,dice,hausdorff_mm,status`, one line per row, then `mean` and
  /// `stddev` (population) over the ok rows and an `excluded` line whose
  /// status column holds the count of rows left out.
  std::string to_csv() const;
};

struct Prediction {
  std::string name;
  LabelVolume predicted;
  LabelVolume truth;
};

/// Rows in input order; a row whose metric raises is kept with the error
/// kind as status and left out of the aggregates.
MetricsReport evaluate(const std::vector<Prediction>& predictions);
MetricsReport evaluate(const VNetModel& model, const Dataset& dataset);

}  // namespace vnet
