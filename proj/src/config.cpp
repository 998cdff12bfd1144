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

#include "vnet/config.hpp"

#include <charconv>
#include <sstream>

#include "vnet/error.hpp"
#include "vnet/io_util.hpp"

namespace vnet {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) {
    return {};
  }
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string part;
  std::istringstream in(s);
  while (std::getline(in, part, sep)) {
    parts.push_back(trim(part));
  }
  return parts;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw InvalidArgument("config key '" + key + "': cannot parse '" + text + "'");
  }
  return value;
}

}  // namespace

KeyValues KeyValues::parse(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line.front() == '#') {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw InvalidArgument("config line " + std::to_string(lineno) + ": expected key=value");
    }
    kv.values_[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) { return parse(read_file(path)); }

void KeyValues::overlay(const KeyValues& other) {
  for (const auto& [k, v] : other.values_) {
    values_[k] = v;
  }
}

std::optional<std::string> KeyValues::get_string(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) {
    return std::nullopt;
  }
  return it->second;
}

std::optional<long long> KeyValues::get_int(const std::string& key) const {
  auto s = get_string(key);
  if (!s) return std::nullopt;
  return parse_number<long long>(key, *s);
}

std::optional<std::uint64_t> KeyValues::get_u64(const std::string& key) const {
  auto s = get_string(key);
  if (!s) return std::nullopt;
  return parse_number<std::uint64_t>(key, *s);
}

std::optional<double> KeyValues::get_double(const std::string& key) const {
  auto s = get_string(key);
  if (!s) return std::nullopt;
  return parse_number<double>(key, *s);
}

std::optional<bool> KeyValues::get_bool(const std::string& key) const {
  auto s = get_string(key);
  if (!s) return std::nullopt;
  if (*s == "true" || *s == "1" || *s == "on") return true;
  if (*s == "false" || *s == "0" || *s == "off") return false;
  throw InvalidArgument("config key '" + key + "': expected true or false, got '" + *s + "'");
}

std::optional<std::vector<int>> KeyValues::get_ints(const std::string& key) const {
  auto s = get_string(key);
  if (!s) return std::nullopt;
  std::vector<int> out;
  for (const auto& part : split(*s, ',')) {
    out.push_back(parse_number<int>(key, part));
  }
  return out;
}

std::optional<std::vector<double>> KeyValues::get_doubles(const std::string& key) const {
  auto s = get_string(key);
  if (!s) return std::nullopt;
  std::vector<double> out;
  for (const auto& part : split(*s, ',')) {
    out.push_back(parse_number<double>(key, part));
  }
  return out;
}

void KeyValues::reject_unknown(const std::set<std::string>& known) const {
  std::string unknown;
  for (const auto& [k, v] : values_) {
    if (!known.count(k)) {
      unknown += (unknown.empty() ? "" : ", ") + k;
    }
  }
  if (!unknown.empty()) {
    throw InvalidArgument("unknown config keys: " + unknown);
  }
}

std::string KeyValues::to_text() const {
  std::string out;
  for (const auto& [k, v] : values_) {
    out += k + "=" + v + "\n";
  }
  return out;
}

Dims parse_xyz_dims(const std::string& text) {
  const auto parts = split(text, ',');
  if (parts.size() != 3) {
    throw InvalidArgument("expected X,Y,Z voxel counts, got '" + text + "'");
  }
  Dims d{parse_number<int>("dims", parts[2]), parse_number<int>("dims", parts[1]),
         parse_number<int>("dims", parts[0])};
  if (d.d <= 0 || d.h <= 0 || d.w <= 0) {
    throw InvalidArgument("voxel counts must be positive, got '" + text + "'");
  }
  return d;
}

std::string format_xyz_dims(const Dims& dims) {
  return std::to_string(dims.w) + "," + std::to_string(dims.h) + "," + std::to_string(dims.d);
}

std::string format_real(double value) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

}  // namespace vnet
