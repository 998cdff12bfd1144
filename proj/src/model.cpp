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

#include "vnet/model.hpp"

#include <cmath>
#include <random>

#include "vnet/error.hpp"

namespace vnet {

namespace {

constexpr double kInitialSlope = 0.25;

class ParameterFactory {
 public:
  ParameterFactory(std::uint64_t seed, std::vector<NamedParameter>& out) : rng_(seed), out_(out) {}

  Var gaussian(const std::string& name, Shape shape, int fan_in) {
    Tensor5 t(shape);
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / fan_in));
    for (double& v : t.values()) {
      v = normal(rng_);
    }
    return add(name, std::move(t));
  }

  Var filled(const std::string& name, Shape shape, double value) {
    Tensor5 t(shape);
    t.fill(value);
    return add(name, std::move(t));
  }

  ConvParams conv(const std::string& name, int cin, int cout, int k, int stride, int padding) {
    ConvParams p;
    p.weight = gaussian(name + ".weight", Shape{cout, cin, k, k, k}, cin * k * k * k);
    p.bias = filled(name + ".bias", Shape{1, cout, 1, 1, 1}, 0.0);
    p.stride = stride;
    p.padding = padding;
    return p;
  }

  // Transposed 2x2x2 stride-2: each output voxel sees one tap per input channel.
  ConvParams up_conv(const std::string& name, int cin, int cout) {
    ConvParams p;
    p.weight = gaussian(name + ".weight", Shape{cin, cout, 2, 2, 2}, cin);
    p.bias = filled(name + ".bias", Shape{1, cout, 1, 1, 1}, 0.0);
    p.stride = 2;
    p.padding = 0;
    return p;
  }

  PReLUParams prelu(const std::string& name, int channels) {
    return {filled(name + ".slope", Shape{1, channels, 1, 1, 1}, kInitialSlope)};
  }

 private:
  Var add(const std::string& name, Tensor5 t) {
    Var v = vnet::parameter(std::move(t));
    out_.push_back({name, v});
    return v;
  }

  std::mt19937_64 rng_;
  std::vector<NamedParameter>& out_;
};

}  // namespace

VNetModel VNetModel::build(const NetworkConfig& config, std::uint64_t seed) {
  config.validate();
  VNetModel m;
  m.config_ = config;
  ParameterFactory make(seed, m.params_);
  const int k = config.kernel;
  const int pad = k / 2;
  const int stages = config.stages();

  for (int l = 0; l < stages; ++l) {
    const std::string prefix = "enc" + std::to_string(l);
    if (l > 0) {
      m.down_.push_back({make.conv("down" + std::to_string(l - 1), config.encoder_channels(l - 1),
                                   config.encoder_channels(l), 2, 2, 0),
                         make.prelu("down" + std::to_string(l - 1) + ".prelu",
                                    config.encoder_channels(l))});
    }
    ResidualStage stage;
    const int width = config.encoder_channels(l);
    for (int i = 0; i < config.convs_down[static_cast<std::size_t>(l)]; ++i) {
      const int cin = (l == 0 && i == 0) ? 1 : width;
      const std::string name = prefix + ".conv" + std::to_string(i);
      stage.convs.push_back(make.conv(name, cin, width, k, 1, pad));
      stage.activations.push_back(make.prelu(prefix + ".prelu" + std::to_string(i), width));
    }
    m.encoder_.push_back(std::move(stage));
  }

  m.decoder_.resize(static_cast<std::size_t>(stages - 1));
  m.up_.resize(static_cast<std::size_t>(stages - 1));
  for (int i = 0; i < stages - 1; ++i) {
    const int level = stages - 2 - i;
    const int deeper_width =
        level == stages - 2 ? config.encoder_channels(stages - 1) : config.decoder_channels(level + 1);
    const std::string up_name = "up" + std::to_string(level);
    m.up_[static_cast<std::size_t>(level)] = {
        make.up_conv(up_name, deeper_width, config.encoder_channels(level)),
        make.prelu(up_name + ".prelu", config.encoder_channels(level))};

    ResidualStage stage;
    const int width = config.decoder_channels(level);
    const std::string prefix = "dec" + std::to_string(level);
    for (int c = 0; c < config.convs_up[static_cast<std::size_t>(i)]; ++c) {
      stage.convs.push_back(make.conv(prefix + ".conv" + std::to_string(c), width, width, k, 1, pad));
      stage.activations.push_back(make.prelu(prefix + ".prelu" + std::to_string(c), width));
    }
    m.decoder_[static_cast<std::size_t>(level)] = std::move(stage);
  }
  m.head_ = make.conv("head", config.decoder_channels(0), 2, 1, 1, 0);
  return m;
}

Var VNetModel::run_stage(Tape& tape, const ResidualStage& stage, const Var& in) const {
  Var h = in;
  for (std::size_t i = 0; i < stage.convs.size(); ++i) {
    h = prelu(tape, conv3d(tape, h, stage.convs[i]), stage.activations[i]);
  }
  const int width = h->value.shape().c;
  const Var residual = in->value.shape().c == width ? in : tile_channels(tape, in, width);
  return add(tape, h, residual);
}

Var VNetModel::encoder_stage(Tape& tape, int level, const Var& in) const {
  return run_stage(tape, encoder_.at(static_cast<std::size_t>(level)), in);
}

Var VNetModel::decoder_stage(Tape& tape, int level, const Var& in) const {
  return run_stage(tape, decoder_.at(static_cast<std::size_t>(level)), in);
}

Var VNetModel::forward(Tape& tape, const Var& input) const {
  const Shape& s = input->value.shape();
  const Dims& in = config_.input;
  if (s.c != 1 || s.d != in.d || s.h != in.h || s.w != in.w) {
    throw ShapeError("model expects input (N,1," + std::to_string(in.d) + "," +
                     std::to_string(in.h) + "," + std::to_string(in.w) + "), got " + to_string(s));
  }
  const int stages = config_.stages();
  std::vector<Var> skips;
  Var h = input;
  for (int l = 0; l < stages; ++l) {
    if (l > 0) {
      const Transition& t = down_[static_cast<std::size_t>(l - 1)];
      h = prelu(tape, down_conv(tape, h, t.conv), t.activation);
    }
    h = encoder_stage(tape, l, h);
    if (l < stages - 1) {
      skips.push_back(h);
    }
  }
  for (int level = stages - 2; level >= 0; --level) {
    const Transition& t = up_[static_cast<std::size_t>(level)];
    Var up = prelu(tape, up_conv(tape, h, t.conv), t.activation);
    h = decoder_stage(tape, level, concat_channels(tape, up, skips[static_cast<std::size_t>(level)]));
  }
  return conv3d(tape, h, head_);
}

std::size_t VNetModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) {
    n += p.var->value.size();
  }
  return n;
}

const Var& VNetModel::parameter(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) {
      return p.var;
    }
  }
  throw InvalidArgument("model has no parameter '" + name + "'");
}

Shape infer_output_shape(const NetworkConfig& config, int batch) {
  config.validate();
  const int k = config.kernel;
  const ConvGeometry same{k, 1, k / 2};
  const ConvGeometry down{2, 2, 0};
  const int stages = config.stages();

  Shape h{batch, 1, config.input.d, config.input.h, config.input.w};
  std::vector<Shape> skips;
  for (int l = 0; l < stages; ++l) {
    if (l > 0) {
      if (h.d % 2 || h.h % 2 || h.w % 2) {
        throw ShapeError("odd extent " + to_string(h) + " before down-convolution");
      }
      h = conv_output_shape(h, config.encoder_channels(l), down);
    }
    for (int i = 0; i < config.convs_down[static_cast<std::size_t>(l)]; ++i) {
      h = conv_output_shape(h, config.encoder_channels(l), same);
    }
    if (l < stages - 1) {
      skips.push_back(h);
    }
  }
  for (int level = stages - 2; level >= 0; --level) {
    Shape up = conv_transpose_output_shape(h, config.encoder_channels(level), down);
    const Shape& skip = skips[static_cast<std::size_t>(level)];
    if (up.d != skip.d || up.h != skip.h || up.w != skip.w) {
      throw ShapeError("skip " + to_string(skip) + " does not match upsampled " + to_string(up));
    }
    h = Shape{batch, up.c + skip.c, up.d, up.h, up.w};
    const int i = stages - 2 - level;
    for (int c = 0; c < config.convs_up[static_cast<std::size_t>(i)]; ++c) {
      h = conv_output_shape(h, config.decoder_channels(level), same);
    }
  }
  return conv_output_shape(h, 2, ConvGeometry{1, 1, 0});
}

}  // namespace vnet
