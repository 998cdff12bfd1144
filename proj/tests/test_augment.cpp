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
#include <set>

#include "oracles.hpp"
#include "vnet/augment.hpp"
#include "vnet/error.hpp"

namespace {

vnet::Volume random_volume(vnet::Dims d, std::mt19937_64& rng) {
  vnet::Volume v(d, vnet::Spacing{});
  std::normal_distribution<double> nd(3.0, 2.0);
  for (double& x : v.data()) x = nd(rng);
  return v;
}

vnet::ControlGrid constant_grid(int size, vnet::Displacement u) {
  vnet::ControlGrid g;
  g.size = size;
  g.points.assign(static_cast<std::size_t>(size * size * size), u);
  return g;
}

}  // namespace

TEST_CASE("zero sigma deformation is the identity") {
  std::mt19937_64 rng(31);
  const vnet::Dims d{9, 10, 11};
  const auto img = random_volume(d, rng);
  const auto mask = oracle::random_mask(d, 0.3, rng);
  const auto grid = vnet::sample_control_grid(0.0, rng, 4);
  for (int degree : {1, 2, 3}) {
    const auto field = vnet::densify(grid, d, degree);
    CHECK(vnet::warp(img, field) == img);
    CHECK(vnet::warp(mask, field) == mask);
  }
}

TEST_CASE("constant control displacement translates the volume") {
  std::mt19937_64 rng(32);
  const vnet::Dims d{8, 9, 10};
  const auto img = random_volume(d, rng);
  const auto mask = oracle::random_mask(d, 0.5, rng);
  const vnet::Displacement u{2.0, -1.0, 3.0};
  for (int size : {2, 3, 5}) {
    for (int degree = 1; degree < size; ++degree) {
      const auto field = vnet::densify(constant_grid(size, u), d, degree);
      for (const auto& v : field.vectors) CHECK(v == u);
      const auto wi = vnet::warp(img, field);
      const auto wm = vnet::warp(mask, field);
      for (int z = 0; z < d.d; ++z)
        for (int y = 0; y < d.h; ++y)
          for (int x = 0; x < d.w; ++x) {
            const int sz = std::clamp(z + 2, 0, d.d - 1);
            const int sy = std::clamp(y - 1, 0, d.h - 1);
            const int sx = std::clamp(x + 3, 0, d.w - 1);
            CHECK(wi.at(z, y, x) == img.at(sz, sy, sx));
            CHECK(wm.at(z, y, x) == mask.at(sz, sy, sx));
          }
    }
  }
}

TEST_CASE("field interpolates the corner control points") {
  std::mt19937_64 rng(33);
  const auto grid = vnet::sample_control_grid(5.0, rng, 2);
  const vnet::Dims d{5, 6, 7};
  const auto field = vnet::densify(grid, d, 1);
  CHECK(field.at(0, 0, 0) == grid.at(0, 0, 0));
  CHECK(field.at(4, 5, 6) == grid.at(1, 1, 1));
  CHECK(field.at(0, 5, 0) == grid.at(0, 1, 0));
  // Trilinear at the centre is the mean of the eight corners.
  auto mid = vnet::densify(grid, vnet::Dims{3, 3, 3}, 1).at(1, 1, 1);
  double zsum = 0.0;
  for (const auto& p : grid.points) zsum += p.z;
  CHECK(mid.z == doctest::Approx(zsum / 8.0).epsilon(1e-14));
}

TEST_CASE("warped labels stay binary") {
  std::mt19937_64 rng(34);
  const vnet::Dims d{12, 12, 12};
  const auto mask = oracle::random_mask(d, 0.4, rng);
  for (int t = 0; t < 10; ++t) {
    const auto field = vnet::densify(vnet::sample_control_grid(15.0, rng, 3), d, 2);
    const auto w = vnet::warp(mask, field);
    for (auto v : w.data()) CHECK((v == 0 || v == 1));
  }
}

TEST_CASE("control point displacement stddev matches sigma") {
  auto rng = vnet::make_stream({7, 0});
  std::vector<double> draws;
  while (draws.size() < 10000) {
    const auto grid = vnet::sample_control_grid(15.0, rng, 2);
    for (const auto& p : grid.points) {
      draws.push_back(p.z);
      draws.push_back(p.y);
      draws.push_back(p.x);
    }
  }
  double mean = 0.0;
  for (double v : draws) mean += v;
  mean /= draws.size();
  double ss = 0.0;
  for (double v : draws) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (draws.size() - 1));
  CHECK(sd >= 14.5);
  CHECK(sd <= 15.5);
}

TEST_CASE("histogram self-matching is the identity within one bin") {
  std::mt19937_64 rng(35);
  const auto img = random_volume(vnet::Dims{10, 12, 14}, rng);
  const auto out = vnet::histogram_match(img, img);
  const auto [lo, hi] = std::minmax_element(img.data().begin(), img.data().end());
  const double bin = (*hi - *lo) / 256.0;
  for (std::size_t i = 0; i < img.size(); ++i) CHECK(std::abs(out.data()[i] - img.data()[i]) <= bin);
}

TEST_CASE("histogram matching maps onto the reference distribution") {
  std::mt19937_64 rng(36);
  vnet::Volume src(vnet::Dims{20, 20, 20}, vnet::Spacing{});
  vnet::Volume ref(vnet::Dims{20, 20, 20}, vnet::Spacing{});
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> nd(100.0, 10.0);
  for (double& v : src.data()) v = u01(rng);
  for (double& v : ref.data()) v = nd(rng);
  const auto out = vnet::histogram_match(src, ref);
  auto sorted = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v;
  };
  const auto so = sorted(out.data());
  const auto sr = sorted(ref.data());
  const auto [rlo, rhi] = std::minmax_element(sr.begin(), sr.end());
  for (double q : {0.1, 0.25, 0.5, 0.75, 0.9}) {
    const auto k = static_cast<std::size_t>(q * (so.size() - 1));
    CHECK(std::abs(so[k] - sr[k]) < 2.0 * (*rhi - *rlo) / 256.0 + 0.5);
  }
  // Monotone: order of source intensities is preserved.
  for (std::size_t i = 1; i < src.size(); ++i) {
    if (src.data()[i] > src.data()[i - 1]) CHECK(out.data()[i] >= out.data()[i - 1]);
  }
  CHECK(so.front() >= *rlo);
  CHECK(so.back() <= *rhi);
}

TEST_CASE("histogram matching degenerate inputs") {
  vnet::Volume flat(vnet::Dims{1, 1, 4}, vnet::Spacing{}, {2, 2, 2, 2});
  vnet::Volume ref(vnet::Dims{1, 1, 5}, vnet::Spacing{}, {5, 1, 4, 2, 3});
  const vnet::Volume to_median = vnet::histogram_match(flat, ref);
  for (double v : to_median.data()) CHECK(v == 3.0);
  const vnet::Volume to_constant = vnet::histogram_match(ref, flat);
  for (double v : to_constant.data()) CHECK(v == 2.0);
  CHECK_THROWS_AS(vnet::histogram_match(ref, ref, 0), vnet::InvalidArgument);
}

TEST_CASE("resampling to new spacing") {
  std::mt19937_64 rng(37);
  vnet::Volume img(vnet::Dims{4, 6, 8}, vnet::Spacing{2.0, 1.0, 1.0});
  for (double& v : img.data()) v = std::uniform_real_distribution<double>(0, 1)(rng);
  const auto same = vnet::resample(img, img.spacing());
  CHECK(same.data() == img.data());
  const auto iso = vnet::resample(img, vnet::Spacing{1.0, 1.0, 1.0});
  CHECK(iso.dims() == vnet::Dims{8, 6, 8});
  const auto coarse = vnet::resample(img, vnet::Spacing{2.0, 2.0, 2.0});
  CHECK(coarse.dims() == vnet::Dims{4, 3, 4});
  // Coarse voxel centres fall halfway between fine ones.
  CHECK(coarse.at(1, 1, 1) == doctest::Approx(0.25 * (img.at(1, 2, 2) + img.at(1, 2, 3) + img.at(1, 3, 2) +
                                                       img.at(1, 3, 3))));
  // A linear ramp is reproduced exactly away from the borders.
  vnet::Volume ramp(vnet::Dims{1, 1, 10}, vnet::Spacing{1, 1, 1});
  for (int x = 0; x < 10; ++x) ramp.at(0, 0, x) = 3.0 * x;
  const auto fine = vnet::resample(ramp, vnet::Spacing{1, 1, 0.5});
  CHECK(fine.dims().w == 20);
  for (int x = 1; x < 19; ++x) CHECK(fine.at(0, 0, x) == doctest::Approx(3.0 * ((x + 0.5) * 0.5 - 0.5)));
  CHECK_THROWS_AS(vnet::resample(img, vnet::Spacing{0, 1, 1}), vnet::InvalidArgument);
}

TEST_CASE("z-score normalisation") {
  vnet::Volume v(vnet::Dims{1, 1, 4}, vnet::Spacing{}, {1, 2, 3, 4});
  const auto n = vnet::normalize_zscore(v);
  CHECK_FALSE(n.constant);
  const double sd = std::sqrt(1.25);
  CHECK(n.volume.data()[0] == doctest::Approx(-1.5 / sd));
  CHECK(n.volume.data()[3] == doctest::Approx(1.5 / sd));
  vnet::Volume flat(vnet::Dims{1, 2, 2}, vnet::Spacing{}, {7, 7, 7, 7});
  const auto f = vnet::normalize_zscore(flat);
  CHECK(f.constant);
  for (double x : f.volume.data()) CHECK(x == 0.0);
}

TEST_CASE("augment_pair keeps image and label aligned") {
  std::mt19937_64 data(38);
  vnet::SyntheticSpec spec;
  spec.dims = {16, 16, 16};
  spec.center_z = spec.center_y = spec.center_x = 7.5;
  spec.radius_z = spec.radius_y = spec.radius_x = 4.5;
  spec.noise_stddev = 0.0;
  spec.foreground_stddev = spec.background_stddev = 0.0;
  const auto [img, label] = vnet::generate_synthetic(spec);
  vnet::AugmentPolicy policy;
  policy.sigma = 3.0;
  policy.histogram_match = false;
  auto rng = vnet::make_stream({1, 2, 3});
  const auto out = vnet::augment_pair(img, label, nullptr, policy, rng);
  // Noise-free two-level image: foreground voxels are exactly the bright ones.
  const auto [dark, bright] = std::minmax_element(out.image.data().begin(), out.image.data().end());
  const double mid = 0.5 * (*dark + *bright);
  std::size_t mismatched = 0;
  for (std::size_t i = 0; i < out.label.size(); ++i) {
    const bool fg = out.label.data()[i] == 1;
    const bool hi = out.image.data()[i] > mid;
    mismatched += fg != hi;
  }
  CHECK(mismatched < out.label.size() / 50);

  auto again = vnet::make_stream({1, 2, 3});
  const auto repeat = vnet::augment_pair(img, label, nullptr, policy, again);
  CHECK(repeat.image == out.image);
  CHECK(repeat.label == out.label);

  vnet::AugmentPolicy bad;
  bad.spline_degree = 2;
  CHECK_THROWS_AS(bad.validate(), vnet::InvalidArgument);
  CHECK_THROWS_AS(vnet::augment_pair(img, vnet::LabelVolume(vnet::Dims{8, 16, 16}, vnet::Spacing{}), nullptr,
                                     policy, rng),
                  vnet::ShapeError);
}

TEST_CASE("stream derivation separates coordinates") {
  auto a = vnet::make_stream({1, 2});
  auto b = vnet::make_stream({2, 1});
  auto c = vnet::make_stream({1, 2});
  auto d = vnet::make_stream({1ull << 32, 2});
  const auto x = a();
  CHECK(x != b());
  CHECK(x == c());
  CHECK(x != d());
}
