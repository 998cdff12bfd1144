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

#include "vnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include "vnet/augment.hpp"
#include "vnet/ops.hpp"

namespace vnet {

namespace {

using Point = std::array<int, 3>;

void check_pair(const LabelVolume& a, const LabelVolume& b, bool spacing) {
  if (a.dims() != b.dims()) {
    throw ShapeError("masks have dims " + to_string(a.dims()) + " and " + to_string(b.dims()));
  }
  if (spacing && !(a.spacing() == b.spacing())) {
    throw ShapeError("masks have different voxel spacing");
  }
}

void require_nonempty(const std::vector<Point>& points, const char* which) {
  if (points.empty()) {
    throw EmptyMaskError(std::string(which) + " mask is empty");
  }
}

double squared_mm(const Point& a, const Point& b, const Spacing& s) {
  const double dz = (a[0] - b[0]) * s.z;
  const double dy = (a[1] - b[1]) * s.y;
  const double dx = (a[2] - b[2]) * s.x;
  return dz * dz + dy * dy + dx * dx;
}

// Largest nearest-neighbour squared distance from `from` to `to`. Points are
// visited in a fixed pseudo-random order so the inner scan usually stops as
// soon as it beats the running maximum.
double directed_squared(std::vector<Point> from, std::vector<Point> to, const Spacing& s) {
  std::mt19937_64 rng(0x5eed);
  std::shuffle(from.begin(), from.end(), rng);
  std::shuffle(to.begin(), to.end(), rng);
  double cmax = 0.0;
  for (const Point& a : from) {
    double cmin = std::numeric_limits<double>::infinity();
    for (const Point& b : to) {
      const double d = squared_mm(a, b, s);
      if (d < cmax) {
        cmin = d;
        break;
      }
      cmin = std::min(cmin, d);
    }
    cmax = std::max(cmax, cmin);
  }
  return cmax;
}

// Exact squared Euclidean distance transform along one line, with sample
// spacing `step`. f holds 0 at sites and +inf elsewhere on input.
void edt_line(std::vector<double>& f, double step, std::vector<int>& v, std::vector<double>& z,
              std::vector<double>& out) {
  const int n = static_cast<int>(f.size());
  const double inf = std::numeric_limits<double>::infinity();
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[static_cast<std::size_t>(q)] == inf) continue;
    const double xq = q * step;
    const double fq = f[static_cast<std::size_t>(q)] + xq * xq;
    while (k >= 0) {
      const int p = v[static_cast<std::size_t>(k)];
      const double xp = p * step;
      const double sct = (fq - (f[static_cast<std::size_t>(p)] + xp * xp)) / (2.0 * (xq - xp));
      if (sct <= z[static_cast<std::size_t>(k)]) {
        --k;
      } else {
        break;
      }
    }
    ++k;
    v[static_cast<std::size_t>(k)] = q;
    if (k == 0) {
      z[0] = -inf;
    } else {
      const int p = v[static_cast<std::size_t>(k - 1)];
      const double xp = p * step;
      z[static_cast<std::size_t>(k)] = (fq - (f[static_cast<std::size_t>(p)] + xp * xp)) / (2.0 * (xq - xp));
    }
    z[static_cast<std::size_t>(k) + 1] = inf;
  }
  if (k < 0) {
    std::fill(out.begin(), out.end(), inf);
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    const double xq = q * step;
    while (z[static_cast<std::size_t>(j) + 1] < xq) ++j;
    const int p = v[static_cast<std::size_t>(j)];
    const double d = (q - p) * step;
    out[static_cast<std::size_t>(q)] = d * d + f[static_cast<std::size_t>(p)];
  }
}

std::vector<double> squared_distance_map(const std::vector<Point>& sites, const Dims& d,
                                         const Spacing& s) {
  std::vector<double> grid(d.count(), std::numeric_limits<double>::infinity());
  for (const Point& p : sites) grid[d.index(p[0], p[1], p[2])] = 0.0;
  const int longest = std::max({d.d, d.h, d.w});
  std::vector<double> line, out;
  std::vector<int> v(static_cast<std::size_t>(longest));
  std::vector<double> z(static_cast<std::size_t>(longest) + 1);
  auto pass = [&](int n, double step, auto index, int outer_a, int outer_b) {
    line.resize(static_cast<std::size_t>(n));
    out.resize(static_cast<std::size_t>(n));
    for (int a = 0; a < outer_a; ++a) {
      for (int b = 0; b < outer_b; ++b) {
        for (int i = 0; i < n; ++i) line[static_cast<std::size_t>(i)] = grid[index(a, b, i)];
        edt_line(line, step, v, z, out);
        for (int i = 0; i < n; ++i) grid[index(a, b, i)] = out[static_cast<std::size_t>(i)];
      }
    }
  };
  pass(d.w, s.x, [&](int z0, int y0, int i) { return d.index(z0, y0, i); }, d.d, d.h);
  pass(d.h, s.y, [&](int z0, int x0, int i) { return d.index(z0, i, x0); }, d.d, d.w);
  pass(d.d, s.z, [&](int y0, int x0, int i) { return d.index(i, y0, x0); }, d.h, d.w);
  return grid;
}

double directed_percentile(const std::vector<Point>& from, const std::vector<Point>& to,
                           const LabelVolume& mask, double percentile) {
  const std::vector<double> dist = squared_distance_map(to, mask.dims(), mask.spacing());
  std::vector<double> values;
  values.reserve(from.size());
  for (const Point& p : from) values.push_back(dist[mask.dims().index(p[0], p[1], p[2])]);
  std::sort(values.begin(), values.end());
  const auto rank = static_cast<std::size_t>(
      std::max(1.0, std::ceil(percentile / 100.0 * static_cast<double>(values.size()))));
  return std::sqrt(values[std::min(rank, values.size()) - 1]);
}

}  // namespace

double dice_metric(const LabelVolume& a, const LabelVolume& b) {
  check_pair(a, b, false);
  std::size_t both = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a.data()[i] != 0;
    const bool y = b.data()[i] != 0;
    na += x;
    nb += y;
    both += x && y;
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

std::vector<Point> boundary_voxels(const LabelVolume& mask) {
  const Dims& d = mask.dims();
  std::vector<Point> out;
  auto background = [&](int z, int y, int x) {
    return z < 0 || y < 0 || x < 0 || z >= d.d || y >= d.h || x >= d.w || mask.at(z, y, x) == 0;
  };
  for (int z = 0; z < d.d; ++z) {
    for (int y = 0; y < d.h; ++y) {
      for (int x = 0; x < d.w; ++x) {
        if (mask.at(z, y, x) == 0) continue;
        if (background(z - 1, y, x) || background(z + 1, y, x) || background(z, y - 1, x) ||
            background(z, y + 1, x) || background(z, y, x - 1) || background(z, y, x + 1)) {
          out.push_back({z, y, x});
        }
      }
    }
  }
  return out;
}

double hausdorff_mm(const LabelVolume& a, const LabelVolume& b) {
  check_pair(a, b, true);
  const auto pa = boundary_voxels(a);
  const auto pb = boundary_voxels(b);
  require_nonempty(pa, "first");
  require_nonempty(pb, "second");
  const double ab = directed_squared(pa, pb, a.spacing());
  const double ba = directed_squared(pb, pa, a.spacing());
  return std::sqrt(std::max(ab, ba));
}

double hausdorff_percentile_mm(const LabelVolume& a, const LabelVolume& b, double percentile) {
  if (!(percentile > 0.0 && percentile <= 100.0)) {
    throw InvalidArgument("percentile must lie in (0, 100]");
  }
  check_pair(a, b, true);
  const auto pa = boundary_voxels(a);
  const auto pb = boundary_voxels(b);
  require_nonempty(pa, "first");
  require_nonempty(pb, "second");
  return std::max(directed_percentile(pa, pb, a, percentile),
                  directed_percentile(pb, pa, b, percentile));
}

LabelVolume threshold_mask(const Volume& probability) {
  LabelVolume mask(probability.dims(), probability.spacing());
  for (std::size_t i = 0; i < probability.size(); ++i) {
    mask.data()[i] = probability.data()[i] > 0.5 ? 1 : 0;
  }
  return mask;
}

SegmentationResult segment(const VNetModel& model, const Volume& image) {
  const Dims& in = model.config().input;
  if (image.dims() != in) {
    throw ShapeError("volume has dims " + format_xyz_dims(image.dims()) +
                     " (x,y,z) but the model expects " + format_xyz_dims(in));
  }
  const auto start = std::chrono::steady_clock::now();
  const Volume normalized = normalize_zscore(image).volume;
  Tape tape(false);
  const Var x = constant(Tensor5(Shape{1, 1, in.d, in.h, in.w}, normalized.data()));
  const Var probs = softmax_voxelwise(tape, model.forward(tape, x));
  const std::size_t sp = in.count();
  std::vector<double> fg(probs->value.data() + sp, probs->value.data() + 2 * sp);

  SegmentationResult r;
  r.probability = Volume(in, image.spacing(), std::move(fg));
  r.mask = threshold_mask(r.probability);
  r.elapsed = std::chrono::steady_clock::now() - start;
  return r;
}

std::string MetricsReport::to_csv() const {
  auto real = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  std::string out = "volume,dice,hausdorff_mm,status\n";
  for (const auto& r : rows) {
    out += r.volume + "," + real(r.dice) + "," + (r.hausdorff_mm ? real(*r.hausdorff_mm) : "") +
           "," + r.status + "\n";
  }
  out += "mean," + real(mean_dice) + "," + real(mean_hausdorff_mm) + ",aggregate\n";
  out += "stddev," + real(stddev_dice) + "," + real(stddev_hausdorff_mm) + ",aggregate\n";
  out += "excluded,,," + std::to_string(excluded) + "\n";
  return out;
}

MetricsReport evaluate(const std::vector<Prediction>& predictions) {
  MetricsReport report;
  for (const auto& p : predictions) {
    MetricsRow row;
    row.volume = p.name;
    try {
      row.dice = dice_metric(p.predicted, p.truth);
      row.hausdorff_mm = hausdorff_mm(p.predicted, p.truth);
    } catch (const Error& e) {
      row.hausdorff_mm.reset();
      row.status = e.kind();
    }
    report.rows.push_back(std::move(row));
  }
  double sd = 0.0, sh = 0.0;
  for (const auto& r : report.rows) {
    if (r.status != "ok") {
      ++report.excluded;
      continue;
    }
    ++report.included;
    sd += r.dice;
    sh += *r.hausdorff_mm;
  }
  if (report.included == 0) return report;
  const double n = static_cast<double>(report.included);
  report.mean_dice = sd / n;
  report.mean_hausdorff_mm = sh / n;
  double vd = 0.0, vh = 0.0;
  for (const auto& r : report.rows) {
    if (r.status != "ok") continue;
    vd += (r.dice - report.mean_dice) * (r.dice - report.mean_dice);
    vh += (*r.hausdorff_mm - report.mean_hausdorff_mm) * (*r.hausdorff_mm - report.mean_hausdorff_mm);
  }
  report.stddev_dice = std::sqrt(vd / n);
  report.stddev_hausdorff_mm = std::sqrt(vh / n);
  return report;
}

MetricsReport evaluate(const VNetModel& model, const Dataset& dataset) {
  if (dataset.empty()) {
    throw InvalidArgument("evaluate needs at least one labelled volume");
  }
  std::vector<Prediction> predictions;
  for (const Sample& s : dataset) {
    predictions.push_back({s.name, segment(model, s.image).mask, s.label});
  }
  return evaluate(predictions);
}

}  // namespace vnet
