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
#include <string>
#include <vector>

#include "vnet/config.hpp"
#include "vnet/volume.hpp"

namespace vnet {

struct StageSpec {
  int conv_count = 1;
  int kernel = 5;
  int channels = 16;
  bool residual = true;
};

/// Declarative description of a V-shaped residual network.
///
/// Encoder level l (0-based) runs at input/2^l resolution with
/// base_channels * 2^l channels. Decoder level l runs at the same resolution
/// with twice that width: its input is the up-convolved deeper signal
/// concatenated with the encoder level-l output. Skip links always pair
/// encoder level l with decoder level l.
struct NetworkConfig {
  Dims input{64, 128, 128};
  int base_channels = 16;
  int kernel = 5;
  /// Conv layers per encoder stage, shallowest first.
  std::vector<int> convs_down{1, 2, 3, 3, 3};
  /// Conv layers per decoder stage, deepest first (the order data flows).
  std::vector<int> convs_up{3, 3, 2, 1};

  /// Five stages, 16 base channels, 128x128x64 input.
  static NetworkConfig paper_default();
  /// Three stages, 4 base channels, 32^3 input.
  static NetworkConfig desk_default();
  /// `stages` levels with conv counts min(l + 1, 3) down and their mirror up.
  static NetworkConfig with_stages(int stages, int base_channels, Dims input);

  int stages() const { return static_cast<int>(convs_down.size()); }
  int encoder_channels(int level) const { return base_channels << level; }
  int decoder_channels(int level) const { return 2 * encoder_channels(level); }
  Dims level_dims(int level) const;

  std::vector<StageSpec> encoder_stages() const;
  /// Decoder stages in data-flow order (deepest first).
  std::vector<StageSpec> decoder_stages() const;

  /// Throws InvalidArgument on inconsistent counts, a spatial axis not
  /// divisible by 2^(stages-1), or an even kernel.
  void validate() const;

  /// Reads `stages`, `base_channels`, `kernel`, `input` (X,Y,Z),
  /// `convs_down`, `convs_up` over `base`.
  static NetworkConfig from_kv(const KeyValues& kv, NetworkConfig base);
  void to_kv(KeyValues& kv) const;
  static const std::vector<std::string>& keys();

  bool operator==(const NetworkConfig&) const = default;
};

struct ReceptiveFieldRow {
  std::string layer;
  /// Largest spatial extent of the grid the layer group runs on.
  int input_size = 0;
  /// Cubic receptive field edge length in input voxels.
  std::int64_t receptive_field = 0;
};

struct ReceptiveFieldReport {
  /// L-Stage 1..S, then R-Stage S-1..1, then Output.
  std::vector<ReceptiveFieldRow> rows;

  const ReceptiveFieldRow& find(const std::string& layer) const;
};

/// Tracks receptive field r and jump j (input voxels per step) through a
/// chain of layers.
class ReceptiveFieldTracker {
 public:
  /// r += (k - 1) * j, then j *= s.
  void conv(int kernel, int stride);
  /// Transposed convolution: j /= s, then r += (k - 1) * j.
  void transposed_conv(int kernel, int stride);
  std::int64_t field() const { return field_; }
  std::int64_t jump() const { return jump_; }

 private:
  std::int64_t field_ = 1;
  std::int64_t jump_ = 1;
};

ReceptiveFieldReport receptive_fields(const NetworkConfig& config);

/// Two side-by-side column groups (encoder | decoder + output), one row per
/// encoder stage.
std::string format_receptive_field_table(const ReceptiveFieldReport& report);

}  // namespace vnet
