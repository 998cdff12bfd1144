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
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vnet/augment.hpp"
#include "vnet/checkpoint.hpp"
#include "vnet/losses.hpp"
#include "vnet/model.hpp"
#include "vnet/volume.hpp"

namespace vnet {

enum class LossKind { dice, weighted_logistic };

LossKind parse_loss_kind(const std::string& text);
std::string to_string(LossKind kind);

struct TrainConfig {
  int batch_size = 2;
  double momentum = 0.99;
  double learning_rate = 1e-4;
  double decay_factor = 0.1;
  int decay_interval = 25000;
  int max_iterations = 30000;
  LossKind loss = LossKind::dice;
  DiceReduction dice_reduction = DiceReduction::mean_per_volume;
  /// Fixed logistic class weights; per-minibatch inverse frequency when unset.
  std::optional<ClassWeights> class_weights;
  /// A checkpoint is written every this many iterations and after the last.
  int checkpoint_interval = 1000;
  /// Parameter initialisation and minibatch selection.
  std::uint64_t seed = 0;
  AugmentPolicy augment;
  /// Augmentation streams; `seed` when unset.
  std::optional<std::uint64_t> augment_seed;

  /// Minibatch 2, momentum 0.99, LR 1e-4 divided by 10 every 25000 of
  /// 30000 iterations, deformation sigma 15 voxels, histogram matching on.
  static TrainConfig paper();
  /// As paper() but starting from LR 1e-3, decayed every 200 of 600 iterations,
  /// with a checkpoint every 100.
  static TrainConfig desk();

  std::uint64_t effective_augment_seed() const { return augment_seed.value_or(seed); }
  bool augmenting() const { return augment.deform || augment.histogram_match; }

  void validate() const;
  static TrainConfig from_kv(const KeyValues& kv, TrainConfig base);
  void to_kv(KeyValues& kv) const;
  static const std::vector<std::string>& keys();
};

/// lr0 * decay_factor^floor(iter / decay_interval).
double lr_schedule(int iteration, const TrainConfig& config);

/// v <- mu v - lr g; w <- w + v, elementwise. Throws ShapeError on a length
/// mismatch and NumericError, leaving w and v untouched, on a non-finite g.
void sgd_momentum_step(std::span<double> weights, std::span<const double> grads,
                       std::span<double> velocity, double lr, double momentum);

struct HistoryRow {
  int iteration = 0;
  double lr = 0.0;
  double loss = 0.0;
  /// Hard Dice of the thresholded foreground probabilities, averaged over
  /// the minibatch.
  double train_dice = 0.0;
  bool operator==(const HistoryRow&) const = default;
};

/// `iter,lr,loss,train_dice` with a header line; reals printed with 17
/// significant digits.
std::string format_history(const std::vector<HistoryRow>& rows);
std::vector<HistoryRow> parse_history(const std::string& text);

struct TrainRun {
  /// Completed iterations.
  int iteration = 0;
  /// One per model parameter, same order and shapes.
  std::vector<Tensor5> velocities;
  std::vector<HistoryRow> history;
};

struct TrainOptions {
  /// Receives history.csv and ckpt_<k>.vpar files; nothing is written when unset.
  std::optional<std::filesystem::path> out_dir;
  /// Called after every iteration from the training thread.
  std::function<void(const HistoryRow&)> on_iteration;
};

/// Runs iterations run.iteration .. config.max_iterations - 1 on `model`,
/// starting from `run` (empty for a fresh start). Minibatches are assembled
/// and augmented by a producer thread through a queue of capacity 2; every
/// random draw is indexed by (seed, iteration, slot), so the result does not
/// depend on thread timing. Throws NumericError naming the iteration on a
/// non-finite loss or gradient and ShapeError when a sample does not match
/// the model input.
TrainRun train(const Dataset& dataset, VNetModel& model, const TrainConfig& config,
               const TrainOptions& options = {}, TrainRun run = {});

/// Parameters, velocities, both configs and the iteration count. The random
/// state is implied by (seed, augment_seed, iteration).
Checkpoint make_checkpoint(const VNetModel& model, const TrainConfig& config, const TrainRun& run);

struct RestoredTraining {
  VNetModel model;
  TrainConfig config;
  TrainRun run;
};

/// Rebuilds model, config and optimiser state. `history` rows at or beyond
/// the checkpoint iteration are dropped.
RestoredTraining restore_checkpoint(const Checkpoint& checkpoint,
                                    std::vector<HistoryRow> history = {});

/// Model only, for inference.
VNetModel load_model(const std::filesystem::path& path);

std::string checkpoint_filename(int iteration);

}  // namespace vnet
