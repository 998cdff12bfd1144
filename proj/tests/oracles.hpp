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

// Independent reference implementations used as test oracles. They favour
// obviousness over speed and share no code with the library.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "vnet/tensor.hpp"
#include "vnet/volume.hpp"

namespace oracle {

/// y[n][co][oz][oy][ox] = b[co] + sum_{ci,kd,kh,kw} w * x[n][ci][oz*s+kd-p]...
/// with out-of-range reads treated as zero.
inline vnet::Tensor5 conv3d(const vnet::Tensor5& x, const vnet::Tensor5& w,
                            const std::vector<double>& bias, int stride, int pad) {
  const auto& xs = x.shape();
  const auto& ws = w.shape();
  const int k = ws.d;
  auto out_len = [&](int n) { return (n + 2 * pad - k) / stride + 1; };
  vnet::Tensor5 y(vnet::Shape{xs.n, ws.n, out_len(xs.d), out_len(xs.h), out_len(xs.w)});
  const auto& ys = y.shape();
  for (int n = 0; n < ys.n; ++n)
    for (int co = 0; co < ys.c; ++co)
      for (int oz = 0; oz < ys.d; ++oz)
        for (int oy = 0; oy < ys.h; ++oy)
          for (int ox = 0; ox < ys.w; ++ox) {
            double acc = bias.empty() ? 0.0 : bias[static_cast<std::size_t>(co)];
            for (int ci = 0; ci < xs.c; ++ci)
              for (int a = 0; a < k; ++a)
                for (int b = 0; b < k; ++b)
                  for (int c = 0; c < k; ++c) {
                    const int iz = oz * stride + a - pad;
                    const int iy = oy * stride + b - pad;
                    const int ix = ox * stride + c - pad;
                    if (iz < 0 || iy < 0 || ix < 0 || iz >= xs.d || iy >= xs.h || ix >= xs.w) continue;
                    acc += w.at(co, ci, a, b, c) * x.at(n, ci, iz, iy, ix);
                  }
            y.at(n, co, oz, oy, ox) = acc;
          }
  return y;
}

/// Transposed 2x2x2 stride-2 convolution by scattering each input voxel.
/// Weight layout (Cin, Cout, 2, 2, 2).
inline vnet::Tensor5 up2(const vnet::Tensor5& x, const vnet::Tensor5& w,
                         const std::vector<double>& bias) {
  const auto& xs = x.shape();
  const int cout = w.shape().c;
  vnet::Tensor5 y(vnet::Shape{xs.n, cout, xs.d * 2, xs.h * 2, xs.w * 2});
  for (int n = 0; n < xs.n; ++n)
    for (int co = 0; co < cout; ++co) {
      for (int z = 0; z < 2 * xs.d; ++z)
        for (int yy = 0; yy < 2 * xs.h; ++yy)
          for (int xx = 0; xx < 2 * xs.w; ++xx)
            y.at(n, co, z, yy, xx) = bias.empty() ? 0.0 : bias[static_cast<std::size_t>(co)];
      for (int ci = 0; ci < xs.c; ++ci)
        for (int z = 0; z < xs.d; ++z)
          for (int yy = 0; yy < xs.h; ++yy)
            for (int xx = 0; xx < xs.w; ++xx)
              for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b)
                  for (int c = 0; c < 2; ++c)
                    y.at(n, co, 2 * z + a, 2 * yy + b, 2 * xx + c) +=
                        w.at(ci, co, a, b, c) * x.at(n, ci, z, yy, xx);
    }
  return y;
}

/// Central difference (f(v + h) - f(v - h)) / 2h of a scalar function of one
/// coordinate, restoring the coordinate afterwards.
inline double central_difference(double& v, double h, const std::function<double()>& f) {
  const double saved = v;
  v = saved + h;
  const double up = f();
  v = saved - h;
  const double down = f();
  v = saved;
  return (up - down) / (2.0 * h);
}

/// |a - b| / max(|a|, |b|, floor); `floor` keeps near-zero pairs from
/// dominating the relative error.
inline double relative_error(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Smoothed soft Dice written straight from its definition:
/// (2 sum p g + eps) / (sum p^2 + sum g^2 + eps).
inline double soft_dice(const std::vector<double>& p, const std::vector<double>& g, double eps) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    num += p[i] * g[i];
    den += p[i] * p[i] + g[i] * g[i];
  }
  return (2.0 * num + eps) / (den + eps);
}

/// Dice by explicit set counting over voxel indices.
inline double dice_by_sets(const vnet::LabelVolume& a, const vnet::LabelVolume& b) {
  std::vector<std::size_t> sa, sb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.data()[i]) sa.push_back(i);
    if (b.data()[i]) sb.push_back(i);
  }
  std::vector<std::size_t> both;
  std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(both));
  if (sa.empty() && sb.empty()) return 1.0;
  return 2.0 * static_cast<double>(both.size()) / static_cast<double>(sa.size() + sb.size());
}

inline std::vector<std::array<int, 3>> surface(const vnet::LabelVolume& m) {
  const auto& d = m.dims();
  auto fg = [&](int z, int y, int x) {
    return z >= 0 && y >= 0 && x >= 0 && z < d.d && y < d.h && x < d.w && m.at(z, y, x) == 1;
  };
  std::vector<std::array<int, 3>> pts;
  for (int z = 0; z < d.d; ++z)
    for (int y = 0; y < d.h; ++y)
      for (int x = 0; x < d.w; ++x) {
        if (!fg(z, y, x)) continue;
        const int inner = fg(z - 1, y, x) + fg(z + 1, y, x) + fg(z, y - 1, x) + fg(z, y + 1, x) +
                          fg(z, y, x - 1) + fg(z, y, x + 1);
        if (inner < 6) pts.push_back({z, y, x});
      }
  return pts;
}

/// All-pairs Hausdorff distance between surface voxel centres in mm.
inline double hausdorff_all_pairs(const vnet::LabelVolume& a, const vnet::LabelVolume& b) {
  const auto pa = surface(a);
  const auto pb = surface(b);
  const auto& s = a.spacing();
  auto dist = [&](const std::array<int, 3>& p, const std::array<int, 3>& q) {
    const double dz = (p[0] - q[0]) * s.z;
    const double dy = (p[1] - q[1]) * s.y;
    const double dx = (p[2] - q[2]) * s.x;
    return std::sqrt(dz * dz + dy * dy + dx * dx);
  };
  auto directed = [&](const auto& from, const auto& to) {
    double worst = 0.0;
    for (const auto& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : to) best = std::min(best, dist(p, q));
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(directed(pa, pb), directed(pb, pa));
}

inline vnet::Tensor5 random_tensor(vnet::Shape s, std::mt19937_64& rng, double scale = 1.0) {
  vnet::Tensor5 t(s);
  std::normal_distribution<double> nd(0.0, scale);
  for (double& v : t.values()) v = nd(rng);
  return t;
}

inline vnet::LabelVolume random_mask(vnet::Dims d, double p, std::mt19937_64& rng) {
  vnet::LabelVolume m(d, vnet::Spacing{});
  std::bernoulli_distribution coin(p);
  for (auto& v : m.data()) v = coin(rng) ? 1 : 0;
  return m;
}

}  // namespace oracle
