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
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "vnet/volume.hpp"

namespace vnet {

/// Flat `key=value` configuration shared by every module. Blank lines and
/// lines starting with '#' are ignored. Typed getters parse on access and
/// throw InvalidArgument naming the key on malformed values.
class KeyValues {
 public:
  static KeyValues parse(const std::string& text);
  static KeyValues load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  /// Copies every entry of `other` over this one.
  void overlay(const KeyValues& other);
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& entries() const { return values_; }

  std::optional<std::string> get_string(const std::string& key) const;
  std::optional<long long> get_int(const std::string& key) const;
  std::optional<std::uint64_t> get_u64(const std::string& key) const;
  std::optional<double> get_double(const std::string& key) const;
  std::optional<bool> get_bool(const std::string& key) const;
  std::optional<std::vector<int>> get_ints(const std::string& key) const;
  std::optional<std::vector<double>> get_doubles(const std::string& key) const;

  /// Throws InvalidArgument listing every key not in `known`.
  void reject_unknown(const std::set<std::string>& known) const;

  std::string to_text() const;

 private:
  std::map<std::string, std::string> values_;
};

/// Parses "X,Y,Z" (x first, as voxel counts are usually written) into Dims.
Dims parse_xyz_dims(const std::string& text);
std::string format_xyz_dims(const Dims& dims);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_real(double value);

}  // namespace vnet
