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

#include "vnet/network_config.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include "vnet/error.hpp"

namespace vnet {

namespace {

std::string join(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out += (i ? "," : "") + std::to_string(v[i]);
  }
  return out;
}

}  // namespace

NetworkConfig NetworkConfig::paper_default() { return NetworkConfig{}; }

NetworkConfig NetworkConfig::desk_default() { return with_stages(3, 4, Dims{32, 32, 32}); }

NetworkConfig NetworkConfig::with_stages(int stages, int base_channels, Dims input) {
  if (stages < 2) {
    throw InvalidArgument("a V-shaped network needs at least 2 stages");
  }
  NetworkConfig c;
  c.input = input;
  c.base_channels = base_channels;
  c.convs_down.clear();
  for (int l = 0; l < stages; ++l) {
    c.convs_down.push_back(std::min(l + 1, 3));
  }
  c.convs_up.assign(c.convs_down.rbegin() + 1, c.convs_down.rend());
  return c;
}

Dims NetworkConfig::level_dims(int level) const {
  return Dims{input.d >> level, input.h >> level, input.w >> level};
}

std::vector<StageSpec> NetworkConfig::encoder_stages() const {
  std::vector<StageSpec> out;
  for (int l = 0; l < stages(); ++l) {
    out.push_back({convs_down[static_cast<std::size_t>(l)], kernel, encoder_channels(l), true});
  }
  return out;
}

std::vector<StageSpec> NetworkConfig::decoder_stages() const {
  std::vector<StageSpec> out;
  for (int i = 0; i < stages() - 1; ++i) {
    const int level = stages() - 2 - i;
    out.push_back({convs_up[static_cast<std::size_t>(i)], kernel, decoder_channels(level), true});
  }
  return out;
}

void NetworkConfig::validate() const {
  if (stages() < 2) {
    throw InvalidArgument("network needs at least 2 stages, got " + std::to_string(stages()));
  }
  if (static_cast<int>(convs_up.size()) != stages() - 1) {
    throw InvalidArgument("convs_up needs " + std::to_string(stages() - 1) + " entries, got " +
                          std::to_string(convs_up.size()));
  }
  auto check_count = [](int n) {
    if (n < 1 || n > 3) {
      throw InvalidArgument("each stage has 1 to 3 conv layers, got " + std::to_string(n));
    }
  };
  std::for_each(convs_down.begin(), convs_down.end(), check_count);
  std::for_each(convs_up.begin(), convs_up.end(), check_count);
  if (base_channels < 1) {
    throw InvalidArgument("base_channels must be positive");
  }
  if (kernel < 1 || kernel % 2 == 0) {
    throw InvalidArgument("kernel must be odd so padding k/2 preserves the grid");
  }
  if (input.d <= 0 || input.h <= 0 || input.w <= 0) {
    throw InvalidArgument("input dims must be positive");
  }
  const int factor = 1 << (stages() - 1);
  if (input.d % factor || input.h % factor || input.w % factor) {
    throw InvalidArgument("input " + format_xyz_dims(input) + " is not divisible by " +
                          std::to_string(factor) + " on every axis, as " +
                          std::to_string(stages()) + " stages require");
  }
}

NetworkConfig NetworkConfig::from_kv(const KeyValues& kv, NetworkConfig base) {
  NetworkConfig c = std::move(base);
  if (auto s = kv.get_int("stages"); s && *s != c.stages()) {
    const auto rebuilt = with_stages(static_cast<int>(*s), c.base_channels, c.input);
    c.convs_down = rebuilt.convs_down;
    c.convs_up = rebuilt.convs_up;
  }
  if (auto v = kv.get_int("base_channels")) c.base_channels = static_cast<int>(*v);
  if (auto v = kv.get_int("kernel")) c.kernel = static_cast<int>(*v);
  if (auto v = kv.get_string("input")) c.input = parse_xyz_dims(*v);
  if (auto v = kv.get_ints("convs_down")) c.convs_down = *v;
  if (auto v = kv.get_ints("convs_up")) c.convs_up = *v;
  if (auto s = kv.get_int("stages"); s && *s != c.stages()) {
    throw InvalidArgument("stages=" + std::to_string(*s) + " disagrees with convs_down");
  }
  c.validate();
  return c;
}

void NetworkConfig::to_kv(KeyValues& kv) const {
  kv.set("stages", std::to_string(stages()));
  kv.set("base_channels", std::to_string(base_channels));
  kv.set("kernel", std::to_string(kernel));
  kv.set("input", format_xyz_dims(input));
  kv.set("convs_down", join(convs_down));
  kv.set("convs_up", join(convs_up));
}

const std::vector<std::string>& NetworkConfig::keys() {
  static const std::vector<std::string> k{"stages",     "base_channels", "kernel",
                                          "input",      "convs_down",    "convs_up"};
  return k;
}

// ---------------------------------------------------------------------------
// Receptive fields

void ReceptiveFieldTracker::conv(int kernel, int stride) {
  field_ += static_cast<std::int64_t>(kernel - 1) * jump_;
  jump_ *= stride;
}

void ReceptiveFieldTracker::transposed_conv(int kernel, int stride) {
  if (jump_ % stride != 0) {
    throw InvalidArgument("transposed convolution below input resolution");
  }
  jump_ /= stride;
  field_ += static_cast<std::int64_t>(kernel - 1) * jump_;
}

const ReceptiveFieldRow& ReceptiveFieldReport::find(const std::string& layer) const {
  for (const auto& r : rows) {
    if (r.layer == layer) {
      return r;
    }
  }
  throw InvalidArgument("no receptive-field row named '" + layer + "'");
}

ReceptiveFieldReport receptive_fields(const NetworkConfig& config) {
  config.validate();
  auto max_axis = [&](int level) {
    const Dims d = config.level_dims(level);
    return std::max({d.d, d.h, d.w});
  };

  ReceptiveFieldReport report;
  ReceptiveFieldTracker rf;
  const int stages = config.stages();
  for (int l = 0; l < stages; ++l) {
    if (l > 0) {
      rf.conv(2, 2);
    }
    for (int i = 0; i < config.convs_down[static_cast<std::size_t>(l)]; ++i) {
      rf.conv(config.kernel, 1);
    }
    report.rows.push_back({"L-Stage " + std::to_string(l + 1), max_axis(l), rf.field()});
  }
  for (int i = 0; i < stages - 1; ++i) {
    const int level = stages - 2 - i;
    rf.transposed_conv(2, 2);
    for (int c = 0; c < config.convs_up[static_cast<std::size_t>(i)]; ++c) {
      rf.conv(config.kernel, 1);
    }
    report.rows.push_back({"R-Stage " + std::to_string(level + 1), max_axis(level), rf.field()});
  }
  rf.conv(1, 1);
  report.rows.push_back({"Output", max_axis(0), rf.field()});
  return report;
}

std::string format_receptive_field_table(const ReceptiveFieldReport& report) {
  const std::size_t stages = (report.rows.size() + 1) / 2;
  auto rf_text = [](std::int64_t r) {
    const std::string s = std::to_string(r);
    return s + "x" + s + "x" + s;
  };
  std::ostringstream out;
  auto cell = [&](const ReceptiveFieldRow* row) {
    if (row) {
      out << std::left << std::setw(10) << row->layer << " | " << std::right << std::setw(10)
          << row->input_size << " | " << std::setw(17) << rf_text(row->receptive_field);
    } else {
      out << std::string(10 + 3 + 10 + 3 + 17, ' ');
    }
  };
  out << std::left << std::setw(10) << "Layer" << " | " << std::setw(10) << "Input Size"
      << " | " << std::setw(17) << "Receptive Field"
      << " || " << std::setw(10) << "Layer" << " | " << std::setw(10) << "Input Size" << " | "
      << "Receptive Field" << '\n';
  for (std::size_t i = 0; i < stages; ++i) {
    cell(&report.rows[i]);
    out << " || ";
    const std::size_t j = stages + i;
    cell(j < report.rows.size() ? &report.rows[j] : nullptr);
    out << '\n';
  }
  return out.str();
}

}  // namespace vnet
