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

#include "vnet/network_config.hpp"
#include "vnet/ops.hpp"

namespace vnet {

struct NamedParameter {
  std::string name;
  Var var;
};

/// Instantiated network: parameters plus the fixed wiring described by a
/// NetworkConfig.
///
/// Every residual stage is a chain of (k^3 conv, padding k/2) -> PReLU layers
/// whose output is added to the stage input. The first encoder stage tiles its
/// single input channel to the stage width for that addition. Encoder levels
/// are joined by a 2x2x2 stride-2 down-convolution doubling the channels,
/// decoder levels by a 2x2x2 up-convolution, each followed by a PReLU. The
/// head is a 1x1x1 convolution to two channels with no nonlinearity, so
/// forward() returns logits; apply softmax_voxelwise for probabilities.
///
/// forward() does not mutate the model and may run concurrently on separate
/// tapes.
class VNetModel {
 public:
  /// Zero-mean Gaussian weights with stddev sqrt(2 / fan_in), zero biases and
  /// 0.25 PReLU slopes, drawn in a fixed order from `seed`.
  static VNetModel build(const NetworkConfig& config, std::uint64_t seed);

  const NetworkConfig& config() const { return config_; }

  /// (N, 1, D, H, W) -> (N, 2, D, H, W) logits.
  Var forward(Tape& tape, const Var& input) const;

  /// Residual stage at encoder `level` applied to its (post down-conv) input.
  Var encoder_stage(Tape& tape, int level, const Var& in) const;
  /// Residual stage at decoder `level` applied to its concatenated input.
  Var decoder_stage(Tape& tape, int level, const Var& in) const;

  const std::vector<NamedParameter>& parameters() const { return params_; }
  std::size_t parameter_count() const;
  /// Looks a parameter up by name; throws InvalidArgument when absent.
  const Var& parameter(const std::string& name) const;

 private:
  struct ResidualStage {
    std::vector<ConvParams> convs;
    std::vector<PReLUParams> activations;
  };
  struct Transition {
    ConvParams conv;
    PReLUParams activation;
  };

  Var run_stage(Tape& tape, const ResidualStage& stage, const Var& in) const;

  NetworkConfig config_;
  std::vector<ResidualStage> encoder_;
  std::vector<ResidualStage> decoder_;  // indexed by level
  std::vector<Transition> down_;        // down_[l] feeds encoder level l + 1
  std::vector<Transition> up_;          // up_[l] feeds decoder level l
  ConvParams head_;
  std::vector<NamedParameter> params_;
};

/// Output shape of forward() for a batch of `batch`, derived by shape
/// propagation alone (no arithmetic), validating every intermediate.
Shape infer_output_shape(const NetworkConfig& config, int batch);

}  // namespace vnet
