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

// Direct volumetric convolution kernels (no bias, no tape).
//
// Weights are laid out (Cout, Cin, k, k, k). Every output element is summed in
// a fixed order that does not depend on the OpenMP thread count, so results are
// bitwise reproducible however the work is split.

#pragma once

#include "vnet/tensor.hpp"

namespace vnet {

struct ConvGeometry {
  int kernel = 1;
  int stride = 1;
  int padding = 0;
};

/// floor((S + 2p - k) / s) + 1 per spatial axis; throws ShapeError when the
/// padded input is smaller than the kernel.
Shape conv_output_shape(const Shape& input, int out_channels, const ConvGeometry& g);

/// (S - 1) * s - 2p + k per spatial axis: the input shape a convolution maps
/// onto `output`.
Shape conv_transpose_output_shape(const Shape& input, int out_channels, const ConvGeometry& g);

/// y = conv(x, w). `y` must already have conv_output_shape(...); it is overwritten.
void conv_forward(const Tensor5& x, const Tensor5& w, const ConvGeometry& g, Tensor5& y);

/// gx += conv^T(gy, w), the gradient of <conv(x, w), gy> with respect to x.
void conv_backward_input(const Tensor5& gy, const Tensor5& w, const ConvGeometry& g, Tensor5& gx);

/// gw += d<conv(x, w), gy>/dw.
void conv_backward_weight(const Tensor5& x, const Tensor5& gy, const ConvGeometry& g, Tensor5& gw);

}  // namespace vnet
