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

#include "vnet/volume.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "vnet/error.hpp"
#include "vnet/io_util.hpp"

namespace vnet {

namespace fs = std::filesystem;

std::string to_string(const Dims& dims) {
  return std::to_string(dims.d) + "x" + std::to_string(dims.h) + "x" + std::to_string(dims.w);
}

namespace {

void check_geometry(const Dims& dims, const Spacing& spacing) {
  if (dims.d <= 0 || dims.h <= 0 || dims.w <= 0) {
    throw InvalidArgument("volume dims must be positive, got " + to_string(dims));
  }
  for (double s : {spacing.z, spacing.y, spacing.x}) {
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw InvalidArgument("volume spacing must be positive and finite");
    }
  }
}

template <typename T>
void check_values(const std::vector<T>& data) {
  if constexpr (std::is_same_v<T, double>) {
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (!std::isfinite(data[i])) {
        throw InvalidArgument("volume data[" + std::to_string(i) + "] is not finite");
      }
    }
  } else {
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data[i] > 1) {
        throw InvalidArgument("label data[" + std::to_string(i) + "] is not binary");
      }
    }
  }
}

}  // namespace

template <typename T>
BasicVolume<T>::BasicVolume(Dims dims, Spacing spacing, std::vector<T> data)
    : dims_(dims), spacing_(spacing), data_(std::move(data)) {
  check_geometry(dims_, spacing_);
  if (data_.size() != dims_.count()) {
    throw InvalidArgument("volume data length " + std::to_string(data_.size()) +
                          " does not match dims " + to_string(dims_));
  }
  check_values(data_);
}

template <typename T>
BasicVolume<T>::BasicVolume(Dims dims, Spacing spacing)
    : dims_(dims), spacing_(spacing) {
  check_geometry(dims_, spacing_);
  data_.assign(dims_.count(), T{});
}

template class BasicVolume<double>;
template class BasicVolume<std::uint8_t>;

std::size_t foreground_count(const LabelVolume& label) {
  return static_cast<std::size_t>(std::count(label.data().begin(), label.data().end(), 1));
}

// ---------------------------------------------------------------------------
// VVOL1 reader / writer

namespace {

constexpr std::string_view kVolumeMagic = "VVOL1";

struct RawVolume {
  Dims dims;
  Spacing spacing;
  VolumeKind kind = VolumeKind::image;
  std::vector<float> values;
};

RawVolume read_raw(const fs::path& path, bool header_only = false) {
  const std::string bytes = read_file(path);
  HeaderReader header(bytes);

  if (header.next_line() != kVolumeMagic) {
    throw FormatError("magic", "expected '" + std::string(kVolumeMagic) + "' in " + path.string());
  }

  RawVolume raw;
  {
    std::istringstream line(header.next_line());
    std::string key;
    line >> key >> raw.dims.d >> raw.dims.h >> raw.dims.w;
    if (key != "dims" || !line || !line.eof() || raw.dims.d <= 0 || raw.dims.h <= 0 ||
        raw.dims.w <= 0) {
      throw FormatError("dims", "expected 'dims D H W' with positive integers");
    }
  }
  {
    std::istringstream line(header.next_line());
    std::string key;
    line >> key >> raw.spacing.z >> raw.spacing.y >> raw.spacing.x;
    if (key != "spacing" || !line || !line.eof() || !(raw.spacing.z > 0) ||
        !(raw.spacing.y > 0) || !(raw.spacing.x > 0)) {
      throw FormatError("spacing", "expected 'spacing Z Y X' with positive values");
    }
  }
  {
    const std::string line = header.next_line();
    if (line == "kind image") {
      raw.kind = VolumeKind::image;
    } else if (line == "kind label") {
      raw.kind = VolumeKind::label;
    } else {
      throw FormatError("kind", "expected 'kind image' or 'kind label', got '" + line + "'");
    }
  }
  if (header.next_line() != "data") {
    throw FormatError("data", "expected 'data' marker line");
  }
  if (header_only) {
    return raw;
  }

  const std::size_t payload = bytes.size() - header.offset();
  const std::size_t expected = raw.dims.count();
  if (payload % sizeof(float) != 0 || payload / sizeof(float) != expected) {
    throw FormatError("data", "dims " + to_string(raw.dims) + " declare " +
                                  std::to_string(expected) + " values but payload holds " +
                                  std::to_string(payload / sizeof(float)) +
                                  (payload % sizeof(float) ? " and a partial value" : ""));
  }
  raw.values.resize(expected);
  decode_le(bytes.data() + header.offset(), raw.values);
  for (std::size_t i = 0; i < expected; ++i) {
    if (!std::isfinite(raw.values[i])) {
      throw FormatError("data", "value " + std::to_string(i) + " is not finite");
    }
  }
  return raw;
}

void write_raw(const fs::path& path, const Dims& dims, const Spacing& spacing, VolumeKind kind,
               const std::vector<float>& values) {
  std::ostringstream out;
  out.precision(17);
  out << kVolumeMagic << '\n'
      << "dims " << dims.d << ' ' << dims.h << ' ' << dims.w << '\n'
      << "spacing " << spacing.z << ' ' << spacing.y << ' ' << spacing.x << '\n'
      << "kind " << (kind == VolumeKind::image ? "image" : "label") << '\n'
      << "data\n";
  std::string bytes = out.str();
  append_le(bytes, values);
  write_file_atomic(path, bytes);
}

}  // namespace

Volume load_volume(const fs::path& path) {
  RawVolume raw = read_raw(path);
  std::vector<double> data(raw.values.begin(), raw.values.end());
  return Volume(raw.dims, raw.spacing, std::move(data));
}

LabelVolume load_label(const fs::path& path) {
  RawVolume raw = read_raw(path);
  if (raw.kind != VolumeKind::label) {
    throw FormatError("kind", "expected a label volume in " + path.string());
  }
  std::vector<std::uint8_t> data(raw.values.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const float v = raw.values[i];
    if (v != 0.0f && v != 1.0f) {
      throw FormatError("data", "label value " + std::to_string(i) + " is not 0 or 1");
    }
    data[i] = v == 1.0f ? 1 : 0;
  }
  return LabelVolume(raw.dims, raw.spacing, std::move(data));
}

VolumeKind peek_volume_kind(const fs::path& path) { return read_raw(path, true).kind; }

void save_volume(const Volume& volume, const fs::path& path) {
  std::vector<float> values(volume.data().begin(), volume.data().end());
  write_raw(path, volume.dims(), volume.spacing(), VolumeKind::image, values);
}

void save_volume(const LabelVolume& label, const fs::path& path) {
  std::vector<float> values(label.data().begin(), label.data().end());
  write_raw(path, label.dims(), label.spacing(), VolumeKind::label, values);
}

// ---------------------------------------------------------------------------
// Synthetic data

bool inside_shape(const SyntheticSpec& spec, int z, int y, int x) {
  const double dz = (z - spec.center_z) / spec.radius_z;
  const double dy = (y - spec.center_y) / spec.radius_y;
  const double dx = (x - spec.center_x) / spec.radius_x;
  return dz * dz + dy * dy + dx * dx <= 1.0;
}

std::pair<Volume, LabelVolume> generate_synthetic(const SyntheticSpec& spec) {
  if (!(spec.radius_z > 0) || !(spec.radius_y > 0) || !(spec.radius_x > 0)) {
    throw InvalidArgument("synthetic radii must be positive");
  }
  if (spec.shape == ShapeKind::sphere &&
      (spec.radius_z != spec.radius_y || spec.radius_y != spec.radius_x)) {
    throw InvalidArgument("a sphere needs equal radii; use shape=ellipsoid");
  }
  for (double s : {spec.foreground_stddev, spec.background_stddev, spec.noise_stddev}) {
    if (!(s >= 0)) {
      throw InvalidArgument("synthetic stddevs must be non-negative");
    }
  }

  Volume image(spec.dims, spec.spacing);
  LabelVolume label(spec.dims, spec.spacing);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::size_t fg = 0;
  for (int z = 0; z < spec.dims.d; ++z) {
    for (int y = 0; y < spec.dims.h; ++y) {
      for (int x = 0; x < spec.dims.w; ++x) {
        const bool inside = inside_shape(spec, z, y, x);
        const double mean = inside ? spec.foreground_mean : spec.background_mean;
        const double sd = inside ? spec.foreground_stddev : spec.background_stddev;
        const double class_draw = normal(rng);
        const double noise_draw = normal(rng);
        const double v = mean + sd * class_draw + spec.noise_stddev * noise_draw;
        image.at(z, y, x) = static_cast<double>(static_cast<float>(v));
        label.at(z, y, x) = inside ? 1 : 0;
        fg += inside ? 1 : 0;
      }
    }
  }
  if (fg == 0) {
    throw InvalidArgument("synthetic shape covers no voxel centre of the " +
                          to_string(spec.dims) + " grid");
  }
  return {std::move(image), std::move(label)};
}

std::vector<SyntheticSpec> derive_specs(const SyntheticSpec& base, int count,
                                        double center_jitter, double radius_jitter) {
  if (count < 1) {
    throw InvalidArgument("count must be at least 1");
  }
  if (!(center_jitter >= 0) || !(radius_jitter >= 0) || radius_jitter >= 1) {
    throw InvalidArgument("jitter must be non-negative and radius jitter below 1");
  }
  std::mt19937_64 rng(base.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<SyntheticSpec> specs;
  specs.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    SyntheticSpec s = base;
    s.center_z += center_jitter * unit(rng);
    s.center_y += center_jitter * unit(rng);
    s.center_x += center_jitter * unit(rng);
    const double scale = 1.0 + radius_jitter * unit(rng);
    if (s.shape == ShapeKind::sphere) {
      s.radius_z *= scale;
      s.radius_y = s.radius_z;
      s.radius_x = s.radius_z;
    } else {
      s.radius_z *= scale;
      s.radius_y *= 1.0 + radius_jitter * unit(rng);
      s.radius_x *= 1.0 + radius_jitter * unit(rng);
    }
    s.seed = rng();
    specs.push_back(s);
  }
  return specs;
}

// ---------------------------------------------------------------------------
// Dataset directories

namespace {
constexpr std::string_view kImageSuffix = "_image.vvol";
constexpr std::string_view kLabelSuffix = "_label.vvol";
}  // namespace

Dataset load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw IoError("dataset directory not found: " + dir.string());
  }
  std::map<std::string, fs::path> images;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string file = entry.path().filename().string();
    if (file.size() > kImageSuffix.size() && file.ends_with(kImageSuffix)) {
      images.emplace(file.substr(0, file.size() - kImageSuffix.size()), entry.path());
    }
  }
  if (images.empty()) {
    throw IoError("no *_image.vvol files in " + dir.string());
  }
  Dataset data;
  for (const auto& [name, image_path] : images) {
    const fs::path label_path = dir / (name + std::string(kLabelSuffix));
    Sample s{name, load_volume(image_path), load_label(label_path)};
    if (s.image.dims() != s.label.dims()) {
      throw ShapeError("sample '" + name + "': image dims " + to_string(s.image.dims()) +
                       " differ from label dims " + to_string(s.label.dims()));
    }
    data.push_back(std::move(s));
  }
  return data;
}

void save_sample(const Sample& sample, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
  }
  save_volume(sample.image, dir / (sample.name + std::string(kImageSuffix)));
  save_volume(sample.label, dir / (sample.name + std::string(kLabelSuffix)));
}

}  // namespace vnet
