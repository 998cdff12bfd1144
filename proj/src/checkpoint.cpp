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

#include "vnet/checkpoint.hpp"

#include <sstream>

#include "vnet/error.hpp"
#include "vnet/io_util.hpp"

namespace vnet {

namespace {

constexpr const char* kMagic = "VPAR1";

bool valid_name(const std::string& name) {
  if (name.empty()) return false;
  for (char c : name) {
    if (c == ' ' || c == '\n' || c == '\r' || c == '\t') return false;
  }
  return true;
}

}  // namespace

const Tensor5* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : blocks) {
    if (n == name) return &t;
  }
  return nullptr;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  std::string out = std::string(kMagic) + "\n";
  for (const auto& [k, v] : checkpoint.meta.entries()) {
    if (v.find('\n') != std::string::npos) {
      throw InvalidArgument("checkpoint meta value for '" + k + "' contains a newline");
    }
    out += "meta " + k + "=" + v + "\n";
  }
  out += "blocks " + std::to_string(checkpoint.blocks.size()) + "\n";
  for (const auto& [name, t] : checkpoint.blocks) {
    if (!valid_name(name)) {
      throw InvalidArgument("checkpoint block name '" + name + "' is empty or has whitespace");
    }
    const Shape& s = t.shape();
    out += "block " + name + " " + std::to_string(s.n) + " " + std::to_string(s.c) + " " +
           std::to_string(s.d) + " " + std::to_string(s.h) + " " + std::to_string(s.w) + "\n";
    append_le(out, t.values());
  }
  write_file_atomic(path, out);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  HeaderReader reader(bytes);
  if (reader.next_line() != kMagic) {
    throw FormatError("magic", path.string() + ": not a VPAR1 checkpoint");
  }
  Checkpoint ckpt;
  std::string line = reader.next_line();
  while (line.rfind("meta ", 0) == 0) {
    const auto eq = line.find('=');
    if (eq == std::string::npos || eq <= 5) {
      throw FormatError("meta", path.string() + ": malformed meta line '" + line + "'");
    }
    ckpt.meta.set(line.substr(5, eq - 5), line.substr(eq + 1));
    line = reader.next_line();
  }

  std::size_t count = 0;
  {
    std::istringstream in(line);
    std::string tag;
    if (!(in >> tag >> count) || tag != "blocks" || !in.eof()) {
      throw FormatError("blocks", path.string() + ": expected 'blocks K', got '" + line + "'");
    }
  }
  for (std::size_t b = 0; b < count; ++b) {
    line = reader.next_line();
    std::istringstream in(line);
    std::string tag;
    std::string name;
    Shape s;
    if (!(in >> tag >> name >> s.n >> s.c >> s.d >> s.h >> s.w) || tag != "block" ||
        s.n <= 0 || s.c <= 0 || s.d <= 0 || s.h <= 0 || s.w <= 0) {
      throw FormatError("block", path.string() + ": malformed block header '" + line + "'");
    }
    const std::size_t nbytes = s.count() * sizeof(double);
    if (reader.remaining().size() < nbytes) {
      throw FormatError("data", path.string() + ": block '" + name + "' is truncated");
    }
    std::vector<double> values(s.count());
    decode_le(reader.remaining().data(), values);
    reader.skip(nbytes);
    try {
      require_finite(values, "checkpoint block " + name);
    } catch (const NumericError& e) {
      throw FormatError("data", path.string() + ": " + e.what());
    }
    ckpt.blocks.emplace_back(name, Tensor5(s, std::move(values)));
  }
  if (!reader.remaining().empty()) {
    throw FormatError("data", path.string() + ": trailing bytes after the last block");
  }
  return ckpt;
}

}  // namespace vnet
