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

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "vnet/config.hpp"
#include "vnet/tensor.hpp"

namespace vnet {

/// VPAR1 container: free-form `key=value` metadata plus an ordered list of
/// named double-precision tensors.
///
///   VPAR1
///   meta <key>=<value>        (zero or more)
///   blocks <K>
///   block <name> N C D H W    (K times, each followed by N*C*D*H*W
///   <little-endian doubles>    IEEE-754 values)
struct Checkpoint {
  KeyValues meta;
  std::vector<std::pair<std::string, Tensor5>> blocks;

  /// nullptr when absent.
  const Tensor5* find(const std::string& name) const;
};

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
/// Throws IoError when unreadable and FormatError naming the field at fault
/// ("magic", "meta", "blocks", "block", "data").
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace vnet
