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
#include <span>
#include <string>
#include <vector>

#include "vnet/tape.hpp"

namespace vnet {

/// Added to numerator and denominator of the soft Dice so empty/empty is
/// defined and its gradient finite.
inline constexpr double kDiceSmoothing = 1e-6;
/// Probability floor applied before the logarithm of the logistic loss.
inline constexpr double kProbabilityFloor = 1e-12;

struct DiceLossResult {
  double dice = 0.0;
  double loss = 0.0;
  /// dD/dp, one entry per voxel.
  std::vector<double> grad;
};

/// D = (2 sum p g + eps) / (sum p^2 + sum g^2 + eps), loss = 1 - D.
/// Throws InvalidArgument on a length mismatch, p outside [0, 1] or g not
/// binary.
DiceLossResult dice_forward(std::span<const double> p, std::span<const double> g,
                            double eps = kDiceSmoothing);

/// dD/dp_j = [2 g_j (S + eps) - 2 p_j (2 I + eps)] / (S + eps)^2 with
/// S = sum p^2 + sum g^2 and I = sum p g. Same checks as dice_forward.
std::vector<double> dice_backward(std::span<const double> p, std::span<const double> g,
                                  double eps = kDiceSmoothing);

struct ClassWeights {
  double background = 1.0;
  double foreground = 1.0;

  /// Throws InvalidArgument on a negative or non-finite weight or both zero.
  void validate() const;
  double operator[](int cls) const { return cls ? foreground : background; }
};

/// w_c = N / (2 N_c) over the given labels, 0 for an absent class.
ClassWeights inverse_frequency_weights(std::span<const std::uint8_t> labels);

struct LogisticResult {
  double loss = 0.0;
  /// Gradient with respect to the two-channel logits.
  Tensor5 grad_logits;
};

/// probs: (N, 2, D, H, W) softmax output; labels: N*D*H*W values in {0, 1},
/// batch-major. loss = -(1/M) sum_i w_{g_i} log max(p_{i,g_i}, floor) over all
/// M voxels; the gradient is that of the loss composed with the softmax.
LogisticResult weighted_logistic(const Tensor5& probs, std::span<const std::uint8_t> labels,
                                 const ClassWeights& weights);

enum class DiceReduction {
  /// One Dice per volume, averaged over the minibatch.
  mean_per_volume,
  /// A single Dice over every voxel of the minibatch.
  batch,
};

DiceReduction parse_dice_reduction(const std::string& text);
std::string to_string(DiceReduction reduction);

/// Scalar 1 - D on the foreground channel of `probs` (N, 2, D, H, W).
Var dice_loss(Tape& tape, const Var& probs, std::span<const std::uint8_t> labels,
              DiceReduction reduction = DiceReduction::mean_per_volume);

/// Scalar weighted logistic loss taking raw logits; applies the softmax
/// itself so the gradient flows straight to the logits.
Var weighted_logistic_loss(Tape& tape, const Var& logits, std::span<const std::uint8_t> labels,
                           const ClassWeights& weights);

}  // namespace vnet
