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

#include <chrono>
#include <string>
#include <vector>

#include "vnet/error.hpp"
#include "vnet/network_config.hpp"

namespace {

// Receptive field of every layer group by walking the layer list directly:
// each convolution widens the field by (k - 1) times the current input-voxel
// stride, a transposed convolution first halves that stride.
std::vector<long long> walk(const std::vector<int>& down, const std::vector<int>& up, int k) {
  std::vector<long long> out;
  long long field = 1, step = 1;
  for (std::size_t l = 0; l < down.size(); ++l) {
    if (l > 0) {
      field += step;  // 2x2x2 down-convolution
      step *= 2;
    }
    field += static_cast<long long>(down[l]) * (k - 1) * step;
    out.push_back(field);
  }
  for (int n : up) {
    step /= 2;
    field += step;  // 2x2x2 up-convolution
    field += static_cast<long long>(n) * (k - 1) * step;
    out.push_back(field);
  }
  out.push_back(field);  // 1x1x1 head
  return out;
}

}  // namespace

TEST_CASE("receptive fields of the default configuration") {
  const auto start = std::chrono::steady_clock::now();
  const auto report = vnet::receptive_fields(vnet::NetworkConfig::paper_default());
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const std::vector<std::string> names = {"L-Stage 1", "L-Stage 2", "L-Stage 3", "L-Stage 4",
                                          "L-Stage 5", "R-Stage 4", "R-Stage 3", "R-Stage 2",
                                          "R-Stage 1", "Output"};
  const std::vector<long long> fields = {5, 22, 72, 172, 372, 476, 528, 546, 551, 551};
  const std::vector<int> sizes = {128, 64, 32, 16, 8, 16, 32, 64, 128, 128};
  REQUIRE(report.rows.size() == names.size());
  for (std::size_t i = 0; i < names.size(); ++i) {
    CHECK(report.rows[i].layer == names[i]);
    CHECK(report.rows[i].receptive_field == fields[i]);
    CHECK(report.rows[i].input_size == sizes[i]);
  }
  CHECK(seconds < 1.0);
}

TEST_CASE("receptive fields follow the layer walk for other kernels and depths") {
  for (int k : {1, 3, 5, 7}) {
    for (int stages : {2, 3, 4, 5}) {
      auto c = vnet::NetworkConfig::with_stages(stages, 4, vnet::Dims{64, 64, 64});
      c.kernel = k;
      const auto report = vnet::receptive_fields(c);
      const auto expected = walk(c.convs_down, c.convs_up, k);
      REQUIRE(report.rows.size() == expected.size());
      for (std::size_t i = 0; i < expected.size(); ++i) {
        CHECK(report.rows[i].receptive_field == expected[i]);
      }
    }
  }
}

TEST_CASE("tracker arithmetic") {
  vnet::ReceptiveFieldTracker t;
  t.conv(5, 1);
  CHECK(t.field() == 5);
  t.conv(2, 2);
  CHECK(t.field() == 6);
  CHECK(t.jump() == 2);
  t.transposed_conv(2, 2);
  CHECK(t.jump() == 1);
  CHECK(t.field() == 7);
}

TEST_CASE("table formatting lists both columns") {
  const std::string table =
      vnet::format_receptive_field_table(vnet::receptive_fields(vnet::NetworkConfig::paper_default()));
  CHECK(table.find("L-Stage 1") != std::string::npos);
  CHECK(table.find("551x551x551") != std::string::npos);
  CHECK(table.find("372x372x372") != std::string::npos);
}

TEST_CASE("configuration validation and key-value round-trip") {
  auto c = vnet::NetworkConfig::paper_default();
  CHECK(c.input == vnet::Dims{64, 128, 128});
  CHECK_NOTHROW(c.validate());
  c.kernel = 4;
  CHECK_THROWS_AS(c.validate(), vnet::InvalidArgument);
  c = vnet::NetworkConfig::paper_default();
  c.input = {60, 128, 128};
  CHECK_THROWS_AS(c.validate(), vnet::InvalidArgument);
  c = vnet::NetworkConfig::paper_default();
  c.convs_up.pop_back();
  CHECK_THROWS_AS(c.validate(), vnet::InvalidArgument);

  const auto desk = vnet::NetworkConfig::desk_default();
  CHECK(desk.stages() == 3);
  CHECK(desk.base_channels == 4);
  CHECK(desk.convs_down == std::vector<int>{1, 2, 3});
  CHECK(desk.convs_up == std::vector<int>{2, 1});
  vnet::KeyValues kv;
  desk.to_kv(kv);
  CHECK(*kv.get_string("input") == "32,32,32");
  CHECK(vnet::NetworkConfig::from_kv(kv, vnet::NetworkConfig::paper_default()) == desk);

  // x,y,z order on the text side, z,y,x in memory.
  vnet::KeyValues in;
  in.set("input", "16,12,8");
  in.set("stages", "3");
  const auto parsed = vnet::NetworkConfig::from_kv(in, vnet::NetworkConfig::paper_default());
  CHECK(parsed.input == vnet::Dims{8, 12, 16});
  CHECK(parsed.convs_down == std::vector<int>{1, 2, 3});
  vnet::KeyValues bad;
  bad.set("stages", "4");
  bad.set("convs_down", "1,2,3");
  CHECK_THROWS_AS(vnet::NetworkConfig::from_kv(bad, vnet::NetworkConfig::paper_default()),
                  vnet::InvalidArgument);
}
