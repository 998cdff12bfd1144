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

#include "vnet/augment.hpp"

#include <algorithm>
#include <cmath>

#include "vnet/error.hpp"

namespace vnet {

namespace {

double lerp(double a, double b, double t) { return t == 1.0 ? b : a + t * (b - a); }

Displacement lerp(const Displacement& a, const Displacement& b, double t) {
  return {lerp(a.z, b.z, t), lerp(a.y, b.y, t), lerp(a.x, b.x, t)};
}

// Clamped uniform B-spline of one axis, evaluated with de Boor's recursion.
class SplineAxis {
 public:
  SplineAxis(int count, int degree) : count_(count), degree_(degree) {
    knots_.assign(static_cast<std::size_t>(degree + 1), 0.0);
    const int interior = count - degree - 1;
    for (int k = 1; k <= interior; ++k) {
      knots_.push_back(static_cast<double>(k) / (interior + 1));
    }
    knots_.insert(knots_.end(), static_cast<std::size_t>(degree + 1), 1.0);
  }

  // ctrl(i) returns control point i.
  template <typename Ctrl>
  Displacement eval(double t, Ctrl ctrl) const {
    int span = degree_;
    while (span < count_ - 1 && t >= knots_[static_cast<std::size_t>(span + 1)]) {
      ++span;
    }
    std::vector<Displacement> d(static_cast<std::size_t>(degree_ + 1));
    for (int j = 0; j <= degree_; ++j) {
      d[static_cast<std::size_t>(j)] = ctrl(j + span - degree_);
    }
    for (int r = 1; r <= degree_; ++r) {
      for (int j = degree_; j >= r; --j) {
        const int i = j + span - degree_;
        const double lo = knots_[static_cast<std::size_t>(i)];
        const double hi = knots_[static_cast<std::size_t>(i + 1 + degree_ - r)];
        const double alpha = (t - lo) / (hi - lo);
        d[static_cast<std::size_t>(j)] =
            lerp(d[static_cast<std::size_t>(j - 1)], d[static_cast<std::size_t>(j)], alpha);
      }
    }
    return d[static_cast<std::size_t>(degree_)];
  }

 private:
  int count_;
  int degree_;
  std::vector<double> knots_;
};

double axis_param(int i, int n) { return n > 1 ? static_cast<double>(i) / (n - 1) : 0.0; }

void check_field(const Dims& dims, const DeformationField& field) {
  if (dims != field.dims) {
    throw ShapeError("warp: volume " + to_string(dims) + " but field " + to_string(field.dims));
  }
}

// Lower corner index and fraction of a clamped sample coordinate.
struct AxisSample {
  int i0;
  int i1;
  double f;
};

AxisSample axis_sample(double c, int n) {
  c = std::clamp(c, 0.0, static_cast<double>(n - 1));
  const int i0 = static_cast<int>(std::floor(c));
  return {i0, std::min(i0 + 1, n - 1), c - i0};
}

double trilinear(const Volume& v, double z, double y, double x) {
  const Dims& d = v.dims();
  const AxisSample sz = axis_sample(z, d.d);
  const AxisSample sy = axis_sample(y, d.h);
  const AxisSample sx = axis_sample(x, d.w);
  auto row = [&](int zz, int yy) { return lerp(v.at(zz, yy, sx.i0), v.at(zz, yy, sx.i1), sx.f); };
  const double z0 = lerp(row(sz.i0, sy.i0), row(sz.i0, sy.i1), sy.f);
  const double z1 = lerp(row(sz.i1, sy.i0), row(sz.i1, sy.i1), sy.f);
  return lerp(z0, z1, sz.f);
}

int nearest(double c, int n) {
  return std::clamp(static_cast<int>(std::floor(c + 0.5)), 0, n - 1);
}

std::pair<double, double> value_range(const Volume& v) {
  const auto [lo, hi] = std::minmax_element(v.data().begin(), v.data().end());
  return {*lo, *hi};
}

}  // namespace

std::mt19937_64 make_stream(std::initializer_list<std::uint64_t> coordinates) {
  std::vector<std::uint32_t> words;
  for (std::uint64_t c : coordinates) {
    words.push_back(static_cast<std::uint32_t>(c));
    words.push_back(static_cast<std::uint32_t>(c >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

ControlGrid sample_control_grid(double sigma, std::mt19937_64& rng, int size) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw InvalidArgument("deformation sigma must be finite and non-negative");
  }
  if (size < 2) {
    throw InvalidArgument("control grid needs at least 2 points per axis");
  }
  ControlGrid grid;
  grid.size = size;
  grid.points.resize(static_cast<std::size_t>(size) * size * size);
  if (sigma == 0.0) {
    return grid;
  }
  std::normal_distribution<double> normal(0.0, sigma);
  for (auto& p : grid.points) {
    p.z = normal(rng);
    p.y = normal(rng);
    p.x = normal(rng);
  }
  return grid;
}

DeformationField densify(const ControlGrid& grid, Dims dims, int degree) {
  const int g = grid.size;
  if (grid.points.size() != static_cast<std::size_t>(g) * g * g) {
    throw InvalidArgument("control grid has " + std::to_string(grid.points.size()) +
                          " points, expected " + std::to_string(g * g * g));
  }
  if (degree < 1 || degree >= g) {
    throw InvalidArgument("spline degree must lie in [1, " + std::to_string(g - 1) + "], got " +
                          std::to_string(degree));
  }
  if (dims.count() == 0) {
    throw InvalidArgument("densify: empty dims");
  }
  const SplineAxis axis(g, degree);

  // Along x for every (z, y) control row.
  std::vector<Displacement> along_x(static_cast<std::size_t>(g) * g * dims.w);
  for (int a = 0; a < g; ++a) {
    for (int b = 0; b < g; ++b) {
      for (int x = 0; x < dims.w; ++x) {
        along_x[(static_cast<std::size_t>(a) * g + b) * dims.w + x] =
            axis.eval(axis_param(x, dims.w), [&](int c) { return grid.at(a, b, c); });
      }
    }
  }
  // Along y.
  std::vector<Displacement> along_y(static_cast<std::size_t>(g) * dims.h * dims.w);
  for (int a = 0; a < g; ++a) {
    for (int y = 0; y < dims.h; ++y) {
      const double t = axis_param(y, dims.h);
      for (int x = 0; x < dims.w; ++x) {
        along_y[(static_cast<std::size_t>(a) * dims.h + y) * dims.w + x] = axis.eval(t, [&](int b) {
          return along_x[(static_cast<std::size_t>(a) * g + b) * dims.w + x];
        });
      }
    }
  }
  // Along z.
  DeformationField field;
  field.dims = dims;
  field.vectors.resize(dims.count());
  const std::size_t plane = static_cast<std::size_t>(dims.h) * dims.w;
  for (int z = 0; z < dims.d; ++z) {
    const double t = axis_param(z, dims.d);
    for (std::size_t i = 0; i < plane; ++i) {
      field.vectors[static_cast<std::size_t>(z) * plane + i] =
          axis.eval(t, [&](int a) { return along_y[static_cast<std::size_t>(a) * plane + i]; });
    }
  }
  return field;
}

Volume warp(const Volume& volume, const DeformationField& field) {
  const Dims& d = volume.dims();
  check_field(d, field);
  Volume out(d, volume.spacing());
  for (int z = 0; z < d.d; ++z) {
    for (int y = 0; y < d.h; ++y) {
      for (int x = 0; x < d.w; ++x) {
        const Displacement& u = field.at(z, y, x);
        out.at(z, y, x) = trilinear(volume, z + u.z, y + u.y, x + u.x);
      }
    }
  }
  return out;
}

LabelVolume warp(const LabelVolume& label, const DeformationField& field) {
  const Dims& d = label.dims();
  check_field(d, field);
  LabelVolume out(d, label.spacing());
  for (int z = 0; z < d.d; ++z) {
    for (int y = 0; y < d.h; ++y) {
      for (int x = 0; x < d.w; ++x) {
        const Displacement& u = field.at(z, y, x);
        out.at(z, y, x) =
            label.at(nearest(z + u.z, d.d), nearest(y + u.y, d.h), nearest(x + u.x, d.w));
      }
    }
  }
  return out;
}

Volume histogram_match(const Volume& src, const Volume& ref, int bins) {
  if (src.size() == 0 || ref.size() == 0) {
    throw InvalidArgument("histogram_match: empty volume");
  }
  if (bins < 1) {
    throw InvalidArgument("histogram_match: bins must be positive");
  }
  const auto [rmin, rmax] = value_range(ref);
  const auto [smin, smax] = value_range(src);
  Volume out(src.dims(), src.spacing());
  if (rmin == rmax) {
    std::fill(out.data().begin(), out.data().end(), rmin);
    return out;
  }
  if (smin == smax) {
    std::vector<double> sorted = ref.data();
    auto mid = sorted.begin() + static_cast<std::ptrdiff_t>((sorted.size() - 1) / 2);
    std::nth_element(sorted.begin(), mid, sorted.end());
    std::fill(out.data().begin(), out.data().end(), *mid);
    return out;
  }

  // Cumulative fractions at the bins + 1 edges.
  auto cdf = [bins](const Volume& v, double lo, double width) {
    std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
    for (double x : v.data()) {
      const int b = std::min(static_cast<int>((x - lo) / width), bins - 1);
      counts[static_cast<std::size_t>(b)] += 1.0;
    }
    std::vector<double> f(static_cast<std::size_t>(bins) + 1, 0.0);
    for (int b = 0; b < bins; ++b) {
      f[static_cast<std::size_t>(b) + 1] =
          f[static_cast<std::size_t>(b)] + counts[static_cast<std::size_t>(b)] / v.size();
    }
    f.back() = 1.0;
    return f;
  };
  const double sw = (smax - smin) / bins;
  const double rw = (rmax - rmin) / bins;
  const std::vector<double> fs = cdf(src, smin, sw);
  const std::vector<double> fr = cdf(ref, rmin, rw);

  for (std::size_t i = 0; i < src.size(); ++i) {
    const double x = src.data()[i];
    const int b = std::min(static_cast<int>((x - smin) / sw), bins - 1);
    const double frac = std::clamp((x - (smin + b * sw)) / sw, 0.0, 1.0);
    const auto bu = static_cast<std::size_t>(b);
    const double u = fs[bu] + frac * (fs[bu + 1] - fs[bu]);

    const auto it = std::upper_bound(fr.begin() + 1, fr.end(), u);
    double y = rmax;
    if (it != fr.end()) {
      const auto j = static_cast<std::size_t>(it - fr.begin()) - 1;
      y = rmin + static_cast<double>(j) * rw + rw * (u - fr[j]) / (fr[j + 1] - fr[j]);
    }
    out.data()[i] = std::clamp(y, rmin, rmax);
  }
  return out;
}

Volume resample(const Volume& volume, Spacing target) {
  if (!(target.z > 0.0 && target.y > 0.0 && target.x > 0.0) || !std::isfinite(target.z) ||
      !std::isfinite(target.y) || !std::isfinite(target.x)) {
    throw InvalidArgument("resample: target spacing must be positive");
  }
  const Dims& d = volume.dims();
  const Spacing& s = volume.spacing();
  auto extent = [](int n, double from, double to) {
    return std::max(1, static_cast<int>(std::lround(n * from / to)));
  };
  const Dims nd{extent(d.d, s.z, target.z), extent(d.h, s.y, target.y), extent(d.w, s.x, target.x)};
  Volume out(nd, target);
  auto pos = [](int i, double from, double to) { return (i + 0.5) * to / from - 0.5; };
  for (int z = 0; z < nd.d; ++z) {
    const double pz = pos(z, s.z, target.z);
    for (int y = 0; y < nd.h; ++y) {
      const double py = pos(y, s.y, target.y);
      for (int x = 0; x < nd.w; ++x) {
        out.at(z, y, x) = trilinear(volume, pz, py, pos(x, s.x, target.x));
      }
    }
  }
  return out;
}

NormalizedVolume normalize_zscore(const Volume& volume) {
  const auto& v = volume.data();
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size());

  NormalizedVolume r{Volume(volume.dims(), volume.spacing()), false};
  const double sd = std::sqrt(var);
  if (sd == 0.0) {
    r.constant = true;
    return r;
  }
  auto& out = r.volume.data();
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = (v[i] - mean) / sd;
  }
  return r;
}

void AugmentPolicy::validate() const {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw InvalidArgument("deform_sigma must be finite and non-negative");
  }
  if (grid_size < 2) {
    throw InvalidArgument("deform_grid must be at least 2");
  }
  if (spline_degree < 1 || spline_degree >= grid_size) {
    throw InvalidArgument("deform_order must lie in [1, deform_grid - 1]");
  }
}

AugmentedPair augment_pair(const Volume& image, const LabelVolume& label, const Volume* reference,
                           const AugmentPolicy& policy, std::mt19937_64& rng) {
  if (image.dims() != label.dims()) {
    throw ShapeError("image " + to_string(image.dims()) + " and label " + to_string(label.dims()) +
                     " differ");
  }
  AugmentedPair out{image, label};
  if (policy.histogram_match && reference != nullptr) {
    out.image = histogram_match(out.image, *reference);
  }
  if (policy.deform) {
    const ControlGrid grid = sample_control_grid(policy.sigma, rng, policy.grid_size);
    const DeformationField field = densify(grid, image.dims(), policy.spline_degree);
    out.image = warp(out.image, field);
    out.label = warp(out.label, field);
  }
  out.image = normalize_zscore(out.image).volume;
  return out;
}

}  // namespace vnet
