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

#include "vnet/losses.hpp"

#include <algorithm>
#include <cmath>

#include "vnet/error.hpp"
#include "vnet/ops.hpp"

namespace vnet {

namespace {

struct DiceSums {
  double pg = 0.0;
  double pp = 0.0;
  double gg = 0.0;
};

void check_dice_inputs(std::span<const double> p, std::span<const double> g) {
  if (p.size() != g.size()) {
    throw InvalidArgument("dice: " + std::to_string(p.size()) + " probabilities but " +
                          std::to_string(g.size()) + " labels");
  }
  for (double v : p) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw InvalidArgument("dice: probability " + std::to_string(v) + " outside [0, 1]");
    }
  }
  for (double v : g) {
    if (v != 0.0 && v != 1.0) {
      throw InvalidArgument("dice: label " + std::to_string(v) + " is not 0 or 1");
    }
  }
}

DiceSums dice_sums(std::span<const double> p, std::span<const double> g) {
  DiceSums s;
  for (std::size_t i = 0; i < p.size(); ++i) {
    s.pg += p[i] * g[i];
    s.pp += p[i] * p[i];
    s.gg += g[i] * g[i];
  }
  return s;
}

void dice_gradient(std::span<const double> p, std::span<const double> g, const DiceSums& s,
                   double eps, double scale, double* out) {
  const double denom = s.pp + s.gg + eps;
  const double numer = 2.0 * s.pg + eps;
  const double inv = 1.0 / (denom * denom);
  for (std::size_t j = 0; j < p.size(); ++j) {
    out[j] += scale * (2.0 * g[j] * denom - 2.0 * p[j] * numer) * inv;
  }
}

std::vector<double> labels_as_real(std::span<const std::uint8_t> labels) {
  std::vector<double> g(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] > 1) {
      throw InvalidArgument("label value " + std::to_string(labels[i]) + " is not 0 or 1");
    }
    g[i] = labels[i];
  }
  return g;
}

void check_two_channel(const Shape& s, std::size_t labels, const char* what) {
  if (s.c != 2) {
    throw ShapeError(std::string(what) + ": needs 2 channels, got " + to_string(s));
  }
  if (labels != s.spatial() * static_cast<std::size_t>(s.n)) {
    throw ShapeError(std::string(what) + ": " + std::to_string(labels) + " labels for " +
                     to_string(s));
  }
}

}  // namespace

DiceLossResult dice_forward(std::span<const double> p, std::span<const double> g, double eps) {
  check_dice_inputs(p, g);
  const DiceSums s = dice_sums(p, g);
  DiceLossResult r;
  r.dice = (2.0 * s.pg + eps) / (s.pp + s.gg + eps);
  r.loss = 1.0 - r.dice;
  r.grad.assign(p.size(), 0.0);
  dice_gradient(p, g, s, eps, 1.0, r.grad.data());
  return r;
}

std::vector<double> dice_backward(std::span<const double> p, std::span<const double> g,
                                  double eps) {
  check_dice_inputs(p, g);
  std::vector<double> grad(p.size(), 0.0);
  dice_gradient(p, g, dice_sums(p, g), eps, 1.0, grad.data());
  return grad;
}

void ClassWeights::validate() const {
  if (!std::isfinite(background) || !std::isfinite(foreground) || background < 0.0 ||
      foreground < 0.0) {
    throw InvalidArgument("class weights must be finite and non-negative");
  }
  if (background == 0.0 && foreground == 0.0) {
    throw InvalidArgument("class weights must not both be zero");
  }
}

ClassWeights inverse_frequency_weights(std::span<const std::uint8_t> labels) {
  const auto fg = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  const std::size_t bg = labels.size() - fg;
  const double n = static_cast<double>(labels.size());
  ClassWeights w;
  w.background = bg ? n / (2.0 * static_cast<double>(bg)) : 0.0;
  w.foreground = fg ? n / (2.0 * static_cast<double>(fg)) : 0.0;
  return w;
}

LogisticResult weighted_logistic(const Tensor5& probs, std::span<const std::uint8_t> labels,
                                 const ClassWeights& weights) {
  const Shape& s = probs.shape();
  check_two_channel(s, labels.size(), "weighted_logistic");
  weights.validate();
  const std::size_t sp = s.spatial();
  const double inv_m = 1.0 / static_cast<double>(labels.size());

  LogisticResult r;
  r.grad_logits = Tensor5(s);
  double total = 0.0;
  for (int n = 0; n < s.n; ++n) {
    const std::size_t b0 = static_cast<std::size_t>(n) * 2 * sp;
    const std::size_t b1 = b0 + sp;
    for (std::size_t i = 0; i < sp; ++i) {
      const std::uint8_t cls = labels[static_cast<std::size_t>(n) * sp + i];
      if (cls > 1) {
        throw InvalidArgument("label value " + std::to_string(cls) + " is not 0 or 1");
      }
      const double w = weights[cls];
      const double p_true = probs[cls ? b1 + i : b0 + i];
      total -= w * std::log(std::max(p_true, kProbabilityFloor));
      r.grad_logits[b0 + i] = inv_m * w * (probs[b0 + i] - (cls == 0 ? 1.0 : 0.0));
      r.grad_logits[b1 + i] = inv_m * w * (probs[b1 + i] - (cls == 1 ? 1.0 : 0.0));
    }
  }
  r.loss = total * inv_m;
  return r;
}

DiceReduction parse_dice_reduction(const std::string& text) {
  if (text == "mean_per_volume") return DiceReduction::mean_per_volume;
  if (text == "batch") return DiceReduction::batch;
  throw InvalidArgument("dice_reduction must be mean_per_volume or batch, got '" + text + "'");
}

std::string to_string(DiceReduction reduction) {
  return reduction == DiceReduction::batch ? "batch" : "mean_per_volume";
}

Var dice_loss(Tape& tape, const Var& probs, std::span<const std::uint8_t> labels,
              DiceReduction reduction) {
  const Shape& s = probs->value.shape();
  check_two_channel(s, labels.size(), "dice_loss");
  const std::size_t sp = s.spatial();
  const std::vector<double> g = labels_as_real(labels);

  // Foreground channel, batch-major, contiguous.
  std::vector<double> p(g.size());
  for (int n = 0; n < s.n; ++n) {
    const double* src = probs->value.data() + (static_cast<std::size_t>(n) * 2 + 1) * sp;
    std::copy(src, src + sp, p.begin() + static_cast<std::ptrdiff_t>(n * sp));
  }
  check_dice_inputs(p, g);

  const std::size_t groups = reduction == DiceReduction::batch ? 1 : static_cast<std::size_t>(s.n);
  const std::size_t group_size = p.size() / groups;
  std::vector<DiceSums> sums(groups);
  double mean_dice = 0.0;
  for (std::size_t k = 0; k < groups; ++k) {
    const std::span<const double> pk(p.data() + k * group_size, group_size);
    const std::span<const double> gk(g.data() + k * group_size, group_size);
    sums[k] = dice_sums(pk, gk);
    mean_dice += (2.0 * sums[k].pg + kDiceSmoothing) / (sums[k].pp + sums[k].gg + kDiceSmoothing);
  }
  mean_dice /= static_cast<double>(groups);

  Tensor5 value(Shape{1, 1, 1, 1, 1}, {1.0 - mean_dice});
  require_finite(value.span(), "dice_loss");
  Var out = tape.make_output(std::move(value), {&probs});
  tape.record(out, [out, probs, p = std::move(p), g, sums, groups, group_size, sp] {
    const double scale = -out->grad[0] / static_cast<double>(groups);
    std::vector<double> dp(p.size(), 0.0);
    for (std::size_t k = 0; k < groups; ++k) {
      const std::span<const double> pk(p.data() + k * group_size, group_size);
      const std::span<const double> gk(g.data() + k * group_size, group_size);
      dice_gradient(pk, gk, sums[k], kDiceSmoothing, scale, dp.data() + k * group_size);
    }
    Tensor5& gx = probs->grad_buffer();
    const std::size_t batch = p.size() / sp;
    for (std::size_t n = 0; n < batch; ++n) {
      double* dst = gx.data() + (n * 2 + 1) * sp;
      for (std::size_t i = 0; i < sp; ++i) {
        dst[i] += dp[n * sp + i];
      }
    }
  });
  return out;
}

Var weighted_logistic_loss(Tape& tape, const Var& logits, std::span<const std::uint8_t> labels,
                           const ClassWeights& weights) {
  const Shape& s = logits->value.shape();
  check_two_channel(s, labels.size(), "weighted_logistic_loss");
  Tape scratch(false);
  const Var probs = softmax_voxelwise(scratch, constant(logits->value));
  LogisticResult r = weighted_logistic(probs->value, labels, weights);

  Tensor5 value(Shape{1, 1, 1, 1, 1}, {r.loss});
  require_finite(value.span(), "weighted_logistic_loss");
  Var out = tape.make_output(std::move(value), {&logits});
  tape.record(out, [out, logits, grad = std::move(r.grad_logits)] {
    const double g = out->grad[0];
    Tensor5& gx = logits->grad_buffer();
    for (std::size_t i = 0; i < grad.size(); ++i) {
      gx[i] += g * grad[i];
    }
  });
  return out;
}

}  // namespace vnet
