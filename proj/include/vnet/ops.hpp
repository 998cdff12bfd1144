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

// Differentiable primitives the network is assembled from. Every op validates
// shapes, rejects non-finite results with NumericError, and records its
// backward rule on the tape when an input requires a gradient.

#pragma once

#include "vnet/conv_kernels.hpp"
#include "vnet/tape.hpp"

namespace vnet {

/// Weight block (Cout, Cin, k, k, k), bias (1, Cout, 1, 1, 1).
struct ConvParams {
  Var weight;
  Var bias;
  int stride = 1;
  int padding = 0;

  int kernel() const { return weight->value.shape().d; }
  ConvGeometry geometry() const { return {kernel(), stride, padding}; }
};

/// One slope per channel, shape (1, C, 1, 1, 1).
struct PReLUParams {
  Var slope;
};

Var conv3d(Tape& tape, const Var& x, const ConvParams& p);

/// 2x2x2 stride-2 convolution; halves every spatial axis. Throws ShapeError on
/// an odd axis.
Var down_conv(Tape& tape, const Var& x, const ConvParams& p);

/// Transposed 2x2x2 stride-2 convolution; doubles every spatial axis. The
/// weight is laid out (Cin, Cout, 2, 2, 2) so that up_conv with a given block
/// is the exact adjoint of down_conv with the same block.
Var up_conv(Tape& tape, const Var& x, const ConvParams& p);

Var prelu(Tape& tape, const Var& x, const PReLUParams& p);

/// Softmax across the channel axis at every voxel; requires C = 2.
Var softmax_voxelwise(Tape& tape, const Var& x);

Var add(Tape& tape, const Var& x, const Var& y);
Var concat_channels(Tape& tape, const Var& x, const Var& y);

/// Repeats a single-channel tensor `channels` times along C.
Var tile_channels(Tape& tape, const Var& x, int channels);

Var multiply(Tape& tape, const Var& x, const Var& y);

/// Sum of all entries as a (1,1,1,1,1) tensor.
Var sum(Tape& tape, const Var& x);

}  // namespace vnet
