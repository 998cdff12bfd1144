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

#include <doctest.h>

#include <cmath>
#include <random>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "vnet/error.hpp"
#include "vnet/losses.hpp"
#include "vnet/model.hpp"

using vnet::Shape;
using vnet::Tape;
using vnet::Tensor5;
using vnet::Var;

namespace {

vnet::NetworkConfig toy() { return vnet::NetworkConfig::with_stages(3, 4, vnet::Dims{8, 16, 16}); }

// Parameter count of the wiring written out layer by layer.
std::size_t expected_parameters(const vnet::NetworkConfig& c) {
  const std::size_t k3 = static_cast<std::size_t>(c.kernel) * c.kernel * c.kernel;
  std::size_t n = 0;
  auto conv = [&](std::size_t cin, std::size_t cout, std::size_t taps) { n += cin * cout * taps + cout; };
  for (int l = 0; l < c.stages(); ++l) {
    const std::size_t w = c.encoder_channels(l);
    if (l > 0) {
      conv(c.encoder_channels(l - 1), w, 8);
      n += w;
    }
    for (int i = 0; i < c.convs_down[l]; ++i) {
      conv(l == 0 && i == 0 ? 1 : w, w, k3);
      n += w;
    }
  }
  for (int i = 0; i + 1 < c.stages(); ++i) {
    const int level = c.stages() - 2 - i;
    const std::size_t deeper = level == c.stages() - 2 ? c.encoder_channels(c.stages() - 1)
                                                       : c.decoder_channels(level + 1);
    conv(deeper, c.encoder_channels(level), 8);
    n += c.encoder_channels(level);
    for (int j = 0; j < c.convs_up[i]; ++j) {
      conv(c.decoder_channels(level), c.decoder_channels(level), k3);
      n += c.decoder_channels(level);
    }
  }
  conv(c.decoder_channels(0), 2, 1);
  return n;
}

}  // namespace

TEST_CASE("shape inference on the full-size configuration") {
  const auto c = vnet::NetworkConfig::paper_default();
  CHECK(vnet::infer_output_shape(c, 1) == Shape{1, 2, 64, 128, 128});
  CHECK(vnet::infer_output_shape(c, 2) == Shape{2, 2, 64, 128, 128});
  auto odd = c;
  odd.input = {48, 128, 128};  // 48 / 16 = 3 is fine, 48 / 32 is not
  odd.convs_down.push_back(3);
  odd.convs_up.insert(odd.convs_up.begin(), 3);
  CHECK_THROWS_AS(vnet::infer_output_shape(odd, 1), vnet::InvalidArgument);
  CHECK(expected_parameters(c) > 0);
}

TEST_CASE("parameter layout and initialisation") {
  const auto c = toy();
  const auto m = vnet::VNetModel::build(c, 7);
  CHECK(m.parameter_count() == expected_parameters(c));
  CHECK(m.parameter("enc0.conv0.weight")->value.shape() == Shape{4, 1, 5, 5, 5});
  CHECK(m.parameter("down0.weight")->value.shape() == Shape{8, 4, 2, 2, 2});
  CHECK(m.parameter("up1.weight")->value.shape() == Shape{16, 8, 2, 2, 2});
  CHECK(m.parameter("up0.weight")->value.shape() == Shape{16, 4, 2, 2, 2});
  CHECK(m.parameter("dec0.conv0.weight")->value.shape() == Shape{8, 8, 5, 5, 5});
  CHECK(m.parameter("head.weight")->value.shape() == Shape{2, 8, 1, 1, 1});
  CHECK_THROWS_AS(m.parameter("nope"), vnet::InvalidArgument);

  for (double v : m.parameter("enc1.prelu0.slope")->value.values()) CHECK(v == 0.25);
  for (double v : m.parameter("dec1.conv0.bias")->value.values()) CHECK(v == 0.0);
  // Sample stddev of a large weight tensor near sqrt(2 / fan_in).
  const auto& w = m.parameter("dec1.conv0.weight")->value;
  double ss = 0.0;
  for (double v : w.values()) ss += v * v;
  const double fan_in = 16.0 * 125.0;
  CHECK(std::sqrt(ss / w.size()) == doctest::Approx(std::sqrt(2.0 / fan_in)).epsilon(0.03));

  const auto same = vnet::VNetModel::build(c, 7);
  const auto other = vnet::VNetModel::build(c, 8);
  CHECK(same.parameter("enc2.conv2.weight")->value.values() ==
        m.parameter("enc2.conv2.weight")->value.values());
  CHECK_FALSE(other.parameter("enc2.conv2.weight")->value.values() ==
              m.parameter("enc2.conv2.weight")->value.values());
}

TEST_CASE("forward produces two-channel logits of the input size") {
  const auto m = vnet::VNetModel::build(toy(), 1);
  std::mt19937_64 rng(2);
  Tape tape(false);
  const Var x = vnet::constant(oracle::random_tensor(Shape{2, 1, 8, 16, 16}, rng));
  const Var y = m.forward(tape, x);
  CHECK(y->value.shape() == vnet::infer_output_shape(toy(), 2));
  CHECK_THROWS_AS(m.forward(tape, vnet::constant(Tensor5(Shape{1, 1, 8, 16, 8}))), vnet::ShapeError);
  CHECK_THROWS_AS(m.forward(tape, vnet::constant(Tensor5(Shape{1, 2, 8, 16, 16}))), vnet::ShapeError);
}

TEST_CASE("batch items are processed independently") {
  const auto m = vnet::VNetModel::build(toy(), 3);
  std::mt19937_64 rng(4);
  const Tensor5 a = oracle::random_tensor(Shape{1, 1, 8, 16, 16}, rng);
  const Tensor5 b = oracle::random_tensor(Shape{1, 1, 8, 16, 16}, rng);
  Tensor5 ab(Shape{2, 1, 8, 16, 16});
  std::copy(a.values().begin(), a.values().end(), ab.values().begin());
  std::copy(b.values().begin(), b.values().end(), ab.values().begin() + a.size());
  Tape tape(false);
  const auto ya = m.forward(tape, vnet::constant(a))->value;
  const auto yb = m.forward(tape, vnet::constant(b))->value;
  const auto yab = m.forward(tape, vnet::constant(ab))->value;
  for (std::size_t i = 0; i < ya.size(); ++i) {
    CHECK(yab[i] == ya[i]);
    CHECK(yab[ya.size() + i] == yb[i]);
  }
}

TEST_CASE("a stage with zeroed convolutions passes its input through") {
  auto m = vnet::VNetModel::build(toy(), 5);
  for (const auto& p : m.parameters()) {
    if (p.name.rfind("enc1.conv", 0) == 0) p.var->value.fill(0.0);
  }
  std::mt19937_64 rng(6);
  const Var in = vnet::constant(oracle::random_tensor(Shape{1, 8, 4, 8, 8}, rng));
  Tape tape(false);
  CHECK(m.encoder_stage(tape, 1, in)->value.values() == in->value.values());

  for (const auto& p : m.parameters()) {
    if (p.name.rfind("enc0.conv", 0) == 0) p.var->value.fill(0.0);
  }
  const Var x = vnet::constant(oracle::random_tensor(Shape{1, 1, 8, 16, 16}, rng));
  const Var y = m.encoder_stage(tape, 0, x);
  REQUIRE(y->value.shape() == Shape{1, 4, 8, 16, 16});
  for (int c = 0; c < 4; ++c) CHECK(y->value.at(0, c, 3, 5, 7) == x->value.at(0, 0, 3, 5, 7));
}

TEST_CASE("every parameter receives a gradient") {
  const auto m = vnet::VNetModel::build(toy(), 9);
  std::mt19937_64 rng(10);
  Tape tape;
  const Var x = vnet::constant(oracle::random_tensor(Shape{1, 1, 8, 16, 16}, rng));
  const Var probs = vnet::softmax_voxelwise(tape, m.forward(tape, x));
  std::vector<std::uint8_t> labels(8 * 16 * 16, 0);
  for (std::size_t i = 0; i < labels.size(); i += 3) labels[i] = 1;
  const Var loss = vnet::dice_loss(tape, probs, labels);
  tape.backward(loss);
  for (const auto& p : m.parameters()) {
    CAPTURE(p.name);
    REQUIRE(p.var->grad.shape() == p.var->value.shape());
    double norm = 0.0;
    for (double g : p.var->grad.values()) norm += g * g;
    CHECK(norm > 0.0);
  }
}

TEST_CASE("model gradients match finite differences on a small network") {
  auto c = vnet::NetworkConfig::with_stages(2, 2, vnet::Dims{4, 4, 4});
  c.kernel = 3;
  const auto m = vnet::VNetModel::build(c, 11);
  std::mt19937_64 rng(12);
  const Var x = vnet::constant(oracle::random_tensor(Shape{1, 1, 4, 4, 4}, rng));
  std::vector<std::uint8_t> labels(64, 0);
  for (std::size_t i = 0; i < 64; i += 2) labels[i] = 1;
  auto f = [&](Tape& t) { return vnet::dice_loss(t, vnet::softmax_voxelwise(t, m.forward(t, x)), labels); };
  std::vector<Var> params;
  for (const auto& p : m.parameters()) params.push_back(p.var);
  const auto r = gradcheck::compare(f, params, 6, 1e-6, 1e-8, rng);
  CHECK(r.checked > 50);
  CHECK(r.max_rel_error < 1e-4);
}
