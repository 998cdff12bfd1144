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

// Byte-level helpers shared by the VVOL1 and VPAR1 containers.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace vnet {

std::string read_file(const std::filesystem::path& path);

/// Writes through a sibling temporary file and renames it into place, so a
/// failed write never leaves a partial file at `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

/// Sequential reader over the newline-terminated text header of a container.
class HeaderReader {
 public:
  explicit HeaderReader(std::string_view bytes) : bytes_(bytes) {}
  /// Next line without its terminator; throws FormatError("header") at EOF.
  std::string next_line();
  std::size_t offset() const noexcept { return pos_; }
  void skip(std::size_t n);
  std::string_view remaining() const noexcept { return bytes_.substr(pos_); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

namespace detail {
template <typename U>
U byteswap_if_big(U v) {
  if constexpr (std::endian::native == std::endian::big) {
    U r = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      r = static_cast<U>((r << 8) | ((v >> (8 * i)) & 0xff));
    }
    return r;
  } else {
    return v;
  }
}
template <typename T>
using bits_t = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
}  // namespace detail

/// Appends IEEE-754 little-endian encodings of `values`.
template <typename T>
void append_le(std::string& out, std::span<const T> values) {
  static_assert(std::is_floating_point_v<T>);
  const std::size_t start = out.size();
  out.resize(start + values.size() * sizeof(T));
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = detail::byteswap_if_big(std::bit_cast<detail::bits_t<T>>(values[i]));
    std::memcpy(out.data() + start + i * sizeof(T), &bits, sizeof(T));
  }
}

template <typename T>
void append_le(std::string& out, const std::vector<T>& values) {
  append_le(out, std::span<const T>(values));
}

/// Decodes `out.size()` little-endian values starting at `src`.
template <typename T>
void decode_le(const char* src, std::span<T> out) {
  static_assert(std::is_floating_point_v<T>);
  for (std::size_t i = 0; i < out.size(); ++i) {
    detail::bits_t<T> bits;
    std::memcpy(&bits, src + i * sizeof(T), sizeof(T));
    out[i] = std::bit_cast<T>(detail::byteswap_if_big(bits));
  }
}

template <typename T>
void decode_le(const char* src, std::vector<T>& out) {
  decode_le(src, std::span<T>(out));
}

}  // namespace vnet
