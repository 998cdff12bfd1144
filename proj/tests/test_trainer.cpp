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
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "vnet/checkpoint.hpp"
#include "vnet/error.hpp"
#include "vnet/trainer.hpp"

namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("vnet_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

vnet::Dataset small_dataset(int count, vnet::Dims dims) {
  vnet::SyntheticSpec base;
  base.dims = dims;
  base.center_z = (dims.d - 1) / 2.0;
  base.center_y = (dims.h - 1) / 2.0;
  base.center_x = (dims.w - 1) / 2.0;
  base.radius_z = base.radius_y = base.radius_x = dims.d / 4.0;
  base.seed = 3;
  vnet::Dataset ds;
  int i = 0;
  for (const auto& spec : vnet::derive_specs(base, count, 1.0, 0.15)) {
    auto [img, label] = vnet::generate_synthetic(spec);
    ds.push_back({"s" + std::to_string(i++), img, label});
  }
  return ds;
}

vnet::NetworkConfig tiny_net() { return vnet::NetworkConfig::with_stages(2, 2, vnet::Dims{8, 8, 8}); }

vnet::TrainConfig quick(int iterations) {
  auto c = vnet::TrainConfig::desk();
  c.max_iterations = iterations;
  c.checkpoint_interval = 3;
  c.seed = 4;
  c.augment.sigma = 2.0;
  return c;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("learning rate staircase") {
  const auto c = vnet::TrainConfig::paper();
  CHECK(vnet::lr_schedule(0, c) == 1e-4);
  CHECK(vnet::lr_schedule(24999, c) == 1e-4);
  CHECK(vnet::lr_schedule(25000, c) == 1e-5);
  CHECK(vnet::lr_schedule(50000, c) == 1e-6);
  CHECK(vnet::lr_schedule(50001, c) == 1e-6);
  auto half = c;
  half.decay_factor = 0.5;
  half.decay_interval = 10;
  CHECK(vnet::lr_schedule(25, half) == 0.25e-4);
  CHECK_THROWS_AS(vnet::lr_schedule(-1, c), vnet::InvalidArgument);
  const auto desk = vnet::TrainConfig::desk();
  CHECK(vnet::lr_schedule(199, desk) == 1e-3);
  CHECK(vnet::lr_schedule(200, desk) == 1e-4);
}

TEST_CASE("momentum step arithmetic") {
  std::vector<double> w{1.0, -2.0}, v{0.0, 0.0};
  const std::vector<double> g{1.0, 0.5};
  vnet::sgd_momentum_step(w, g, v, 1e-4, 0.99);
  CHECK(v[0] == -1e-4);
  CHECK(w[0] == 1.0 - 1e-4);

  // Two steps with constant g: v2 = -lr g (1 + mu), w2 = w0 - lr g (2 + mu).
  std::vector<double> w2{0.3}, v2{0.0};
  const std::vector<double> g2{0.7};
  const double lr = 0.01, mu = 0.9;
  vnet::sgd_momentum_step(w2, g2, v2, lr, mu);
  vnet::sgd_momentum_step(w2, g2, v2, lr, mu);
  CHECK(std::abs(v2[0] - (-lr * 0.7 * (1 + mu))) < 1e-15);
  CHECK(std::abs(w2[0] - (0.3 - lr * 0.7 * (2 + mu))) < 1e-15);

  // Zero momentum is plain gradient descent.
  std::vector<double> w3{5.0}, v3{123.0};
  const std::vector<double> g3{2.0};
  vnet::sgd_momentum_step(w3, g3, v3, 0.1, 0.0);
  CHECK(w3[0] == 5.0 - 0.2);

  // Zero gradient: velocity decays geometrically.
  std::vector<double> w4{0.0}, v4{1.0};
  const std::vector<double> zero{0.0};
  for (int i = 0; i < 5; ++i) vnet::sgd_momentum_step(w4, zero, v4, 0.1, 0.99);
  CHECK(v4[0] == doctest::Approx(std::pow(0.99, 5)).epsilon(1e-15));

  std::vector<double> bad{std::numeric_limits<double>::quiet_NaN()};
  std::vector<double> w5{1.0}, v5{0.0};
  CHECK_THROWS_AS(vnet::sgd_momentum_step(w5, bad, v5, 0.1, 0.9), vnet::NumericError);
  CHECK(w5[0] == 1.0);
  std::vector<double> longer{1.0, 2.0};
  CHECK_THROWS_AS(vnet::sgd_momentum_step(w5, longer, v5, 0.1, 0.9), vnet::ShapeError);
}

TEST_CASE("history text round-trips bit-exactly") {
  const std::vector<vnet::HistoryRow> rows = {{0, 1e-4, 0.91349691367424881, 0.1}, {1, 1e-4, 1.0 / 3.0, 0.0}};
  const std::string text = vnet::format_history(rows);
  CHECK(text.rfind("iter,lr,loss,train_dice\n0,", 0) == 0);
  CHECK(vnet::parse_history(text) == rows);
  CHECK_THROWS_AS(vnet::parse_history("iter,loss\n"), vnet::FormatError);
  CHECK_THROWS_AS(vnet::parse_history("iter,lr,loss,train_dice\n1,2\n"), vnet::FormatError);
}

TEST_CASE("train configuration keys") {
  auto c = vnet::TrainConfig::desk();
  c.loss = vnet::LossKind::weighted_logistic;
  c.class_weights = vnet::ClassWeights{0.5, 30.0};
  c.augment_seed = 77;
  vnet::KeyValues kv;
  c.to_kv(kv);
  const auto back = vnet::TrainConfig::from_kv(kv, vnet::TrainConfig::paper());
  CHECK(back.loss == c.loss);
  CHECK(back.class_weights->foreground == 30.0);
  CHECK(back.augment_seed == 77u);
  CHECK(back.learning_rate == c.learning_rate);
  CHECK(back.decay_interval == 200);
  for (const auto& [k, v] : kv.entries()) {
    CHECK(std::find(vnet::TrainConfig::keys().begin(), vnet::TrainConfig::keys().end(), k) !=
          vnet::TrainConfig::keys().end());
  }
  auto bad = [](const std::string& key, const std::string& value) {
    vnet::KeyValues k;
    k.set(key, value);
    return k;
  };
  CHECK_THROWS_AS(vnet::TrainConfig::from_kv(bad("momentum", "1.0"), {}), vnet::InvalidArgument);
  CHECK_THROWS_AS(vnet::TrainConfig::from_kv(bad("batch_size", "0"), {}), vnet::InvalidArgument);
  CHECK_THROWS_AS(vnet::TrainConfig::from_kv(bad("loss", "hinge"), {}), vnet::InvalidArgument);
  CHECK_THROWS_AS(vnet::TrainConfig::from_kv(bad("class_weights", "1,2,3"), {}), vnet::InvalidArgument);
  CHECK_THROWS_AS(vnet::TrainConfig::from_kv(bad("deform_order", "2"), {}), vnet::InvalidArgument);
}

TEST_CASE("checkpoint container") {
  const fs::path dir = scratch_dir("ckpt");
  vnet::Checkpoint c;
  c.meta.set("iteration", "12");
  c.meta.set("note", "a b=c");
  c.blocks.emplace_back("w", vnet::Tensor5(vnet::Shape{1, 2, 1, 1, 3}, {1, 2, 3, 4, 5, 0.1}));
  c.blocks.emplace_back("velocity/w", vnet::Tensor5(vnet::Shape{1, 1, 1, 1, 1}, {-7e-300}));
  vnet::save_checkpoint(c, dir / "a.vpar");
  const auto back = vnet::load_checkpoint(dir / "a.vpar");
  CHECK(back.meta.entries() == c.meta.entries());
  REQUIRE(back.blocks.size() == 2);
  CHECK(back.find("w")->values() == c.blocks[0].second.values());
  CHECK(back.find("velocity/w")->values()[0] == -7e-300);
  CHECK(back.find("missing") == nullptr);

  const std::string bytes = read_text(dir / "a.vpar");
  auto field_of = [&](const std::string& text) {
    std::ofstream(dir / "b.vpar", std::ios::binary) << text;
    try {
      vnet::load_checkpoint(dir / "b.vpar");
    } catch (const vnet::FormatError& e) {
      return e.field();
    }
    return std::string("none");
  };
  CHECK(field_of("VPAR2\n") == "magic");
  CHECK(field_of("VPAR1\nblocks x\n") == "blocks");
  CHECK(field_of("VPAR1\nblocks 1\nblock w 1 1 0 1 1\n") == "block");
  CHECK(field_of(bytes.substr(0, bytes.size() - 3)) == "data");
  CHECK(field_of(bytes + "x") == "data");
  CHECK_THROWS_AS(vnet::load_checkpoint(dir / "absent.vpar"), vnet::IoError);

  vnet::Checkpoint spaced;
  spaced.blocks.emplace_back("a b", vnet::Tensor5(vnet::Shape{1, 1, 1, 1, 1}));
  CHECK_THROWS_AS(vnet::save_checkpoint(spaced, dir / "c.vpar"), vnet::InvalidArgument);
}

TEST_CASE("training is reproducible and resumable") {
  const auto ds = small_dataset(3, {8, 8, 8});
  const auto config = quick(6);
  const fs::path a = scratch_dir("train_a");
  const fs::path b = scratch_dir("train_b");

  auto m1 = vnet::VNetModel::build(tiny_net(), config.seed);
  const auto r1 = vnet::train(ds, m1, config, {a, {}});
  auto m2 = vnet::VNetModel::build(tiny_net(), config.seed);
  const auto r2 = vnet::train(ds, m2, config, {b, {}});
  CHECK(r1.iteration == 6);
  REQUIRE(r1.history.size() == 6);
  CHECK(r1.history == r2.history);
  CHECK(read_text(a / "history.csv") == read_text(b / "history.csv"));
  CHECK(fs::exists(a / "ckpt_3.vpar"));
  CHECK(fs::exists(a / "ckpt_6.vpar"));

  const auto restored =
      vnet::restore_checkpoint(vnet::load_checkpoint(a / "ckpt_3.vpar"),
                               vnet::parse_history(read_text(a / "history.csv")));
  CHECK(restored.run.iteration == 3);
  CHECK(restored.run.history.size() == 3);
  auto m3 = restored.model;
  const auto r3 = vnet::train(ds, m3, restored.config, {}, restored.run);
  CHECK(r3.history == r1.history);
  for (std::size_t i = 0; i < m1.parameters().size(); ++i) {
    CHECK(m3.parameters()[i].var->value.values() == m1.parameters()[i].var->value.values());
    CHECK(r3.velocities[i].values() == r1.velocities[i].values());
  }

  const auto loaded = vnet::load_model(a / "ckpt_6.vpar");
  CHECK(loaded.parameter("head.weight")->value.values() == m1.parameter("head.weight")->value.values());
}

TEST_CASE("history rows report the scheduled rate and a bounded dice") {
  const auto ds = small_dataset(2, {8, 8, 8});
  auto config = quick(4);
  config.decay_interval = 2;
  config.loss = vnet::LossKind::weighted_logistic;
  auto m = vnet::VNetModel::build(tiny_net(), 1);
  std::vector<vnet::HistoryRow> seen;
  vnet::TrainOptions opts;
  opts.on_iteration = [&](const vnet::HistoryRow& r) { seen.push_back(r); };
  const auto run = vnet::train(ds, m, config, opts);
  CHECK(seen == run.history);
  for (const auto& r : run.history) {
    CHECK(r.lr == vnet::lr_schedule(r.iteration, config));
    CHECK(r.train_dice >= 0.0);
    CHECK(r.train_dice <= 1.0);
    CHECK(std::isfinite(r.loss));
  }
}

TEST_CASE("training loss falls on an easy task") {
  const auto ds = small_dataset(2, {16, 16, 16});
  auto config = vnet::TrainConfig::desk();
  config.max_iterations = 50;
  config.augment.deform = false;
  config.augment.histogram_match = false;
  auto m = vnet::VNetModel::build(vnet::NetworkConfig::with_stages(3, 4, vnet::Dims{16, 16, 16}), 2);
  const auto run = vnet::train(ds, m, config);
  CHECK(run.history.back().loss < run.history.front().loss);
}

TEST_CASE("training reports the failing iteration") {
  const auto ds = small_dataset(2, {8, 8, 8});
  auto m = vnet::VNetModel::build(tiny_net(), 1);
  m.parameter("enc1.conv0.weight")->value[0] = std::numeric_limits<double>::infinity();
  try {
    vnet::train(ds, m, quick(3));
    FAIL("expected a numeric error");
  } catch (const vnet::NumericError& e) {
    CHECK(std::string(e.what()).find("iteration 0") != std::string::npos);
  }

  auto fine = vnet::VNetModel::build(tiny_net(), 1);
  CHECK_THROWS_AS(vnet::train(small_dataset(1, {16, 8, 8}), fine, quick(2)), vnet::ShapeError);
  CHECK_THROWS_AS(vnet::train({}, fine, quick(2)), vnet::InvalidArgument);
  vnet::TrainRun wrong;
  wrong.velocities.resize(2);
  CHECK_THROWS_AS(vnet::train(ds, fine, quick(2), {}, wrong), vnet::ShapeError);
}
