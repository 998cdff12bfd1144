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

#include "vnet/conv_kernels.hpp"

#include <algorithm>
#include <vector>

#include "vnet/error.hpp"

namespace vnet {

namespace {

int conv_extent(int size, const ConvGeometry& g) {
  const int padded = size + 2 * g.padding;
  if (padded < g.kernel) {
    throw ShapeError("padded extent " + std::to_string(padded) + " is smaller than kernel " +
                     std::to_string(g.kernel));
  }
  return (padded - g.kernel) / g.stride + 1;
}

void check_geometry(const ConvGeometry& g) {
  if (g.kernel < 1 || g.stride < 1 || g.padding < 0) {
    throw InvalidArgument("convolution needs kernel >= 1, stride >= 1, padding >= 0");
  }
}

// Output indices o along one axis for which input index o*s + tap - p lies in
// [0, in_size), for every tap.
struct TapRanges {
  std::vector<int> lo;
  std::vector<int> hi;
};

TapRanges tap_ranges(int in_size, int out_size, const ConvGeometry& g) {
  TapRanges r;
  r.lo.resize(static_cast<std::size_t>(g.kernel));
  r.hi.resize(static_cast<std::size_t>(g.kernel));
  for (int t = 0; t < g.kernel; ++t) {
    const int lo_num = g.padding - t;
    const int lo = lo_num <= 0 ? 0 : (lo_num + g.stride - 1) / g.stride;
    const int hi_num = in_size - 1 + g.padding - t;
    const int hi = hi_num < 0 ? 0 : std::min(out_size, hi_num / g.stride + 1);
    r.lo[static_cast<std::size_t>(t)] = lo;
    r.hi[static_cast<std::size_t>(t)] = std::max(lo, hi);
  }
  return r;
}

struct Plan {
  Shape in;
  Shape out;
  ConvGeometry g;
  TapRanges z, y, x;
};

Plan make_plan(const Shape& in, const Shape& out, const ConvGeometry& g) {
  return Plan{in, out, g, tap_ranges(in.d, out.d, g), tap_ranges(in.h, out.h, g),
              tap_ranges(in.w, out.w, g)};
}

constexpr int kBlock = 4;

// S is the compile-time stride (1 or 2) or 0 for a runtime stride.
template <int S>
void forward_impl(const Tensor5& x, const Tensor5& w, const Plan& p, Tensor5& y) {
  const int s = S ? S : p.g.stride;
  const int k = p.g.kernel;
  const int cin = p.in.c;
  const int cout = p.out.c;
  const std::size_t in_sp = p.in.spatial();
  const std::size_t out_sp = p.out.spatial();
  const std::size_t w_co = static_cast<std::size_t>(cin) * k * k * k;
  const int blocks = (cout + kBlock - 1) / kBlock;
  const int jobs = p.out.n * blocks;

#pragma omp parallel for schedule(static)
  for (int job = 0; job < jobs; ++job) {
    const int n = job / blocks;
    const int co0 = (job % blocks) * kBlock;
    const int nb = std::min(kBlock, cout - co0);
    double* ybase = y.data() + (static_cast<std::size_t>(n) * cout + co0) * out_sp;
    std::fill(ybase, ybase + nb * out_sp, 0.0);

    for (int ci = 0; ci < cin; ++ci) {
      const double* xin = x.data() + (static_cast<std::size_t>(n) * cin + ci) * in_sp;
      for (int kd = 0; kd < k; ++kd) {
        for (int oz = p.z.lo[kd]; oz < p.z.hi[kd]; ++oz) {
          const int iz = oz * s + kd - p.g.padding;
          for (int kh = 0; kh < k; ++kh) {
            for (int oy = p.y.lo[kh]; oy < p.y.hi[kh]; ++oy) {
              const int iy = oy * s + kh - p.g.padding;
              const double* __restrict in_row =
                  xin + (static_cast<std::size_t>(iz) * p.in.h + iy) * p.in.w;
              const std::size_t orow = (static_cast<std::size_t>(oz) * p.out.h + oy) * p.out.w;
              const double* wrow = w.data() + static_cast<std::size_t>(co0) * w_co +
                                   ((static_cast<std::size_t>(ci) * k + kd) * k + kh) * k;
              for (int kw = 0; kw < k; ++kw) {
                const int off = kw - p.g.padding;
                const int lo = p.x.lo[kw];
                const int hi = p.x.hi[kw];
                if (nb == kBlock) {
                  double* __restrict o0 = ybase + orow;
                  double* __restrict o1 = o0 + out_sp;
                  double* __restrict o2 = o1 + out_sp;
                  double* __restrict o3 = o2 + out_sp;
                  const double w0 = wrow[kw];
                  const double w1 = wrow[kw + w_co];
                  const double w2 = wrow[kw + 2 * w_co];
                  const double w3 = wrow[kw + 3 * w_co];
                  for (int ox = lo; ox < hi; ++ox) {
                    const double v = in_row[ox * s + off];
                    o0[ox] += w0 * v;
                    o1[ox] += w1 * v;
                    o2[ox] += w2 * v;
                    o3[ox] += w3 * v;
                  }
                } else {
                  for (int j = 0; j < nb; ++j) {
                    double* __restrict o = ybase + j * out_sp + orow;
                    const double wv = wrow[kw + j * w_co];
                    for (int ox = lo; ox < hi; ++ox) {
                      o[ox] += wv * in_row[ox * s + off];
                    }
                  }
                }
              }
            }
          }
        }
      }
    }
  }
}

template <int S>
void backward_input_impl(const Tensor5& gy, const Tensor5& w, const Plan& p, Tensor5& gx) {
  const int s = S ? S : p.g.stride;
  const int k = p.g.kernel;
  const int cin = p.in.c;
  const int cout = p.out.c;
  const std::size_t in_sp = p.in.spatial();
  const std::size_t out_sp = p.out.spatial();
  const std::size_t k3 = static_cast<std::size_t>(k) * k * k;
  const std::size_t w_co = static_cast<std::size_t>(cin) * k3;
  const int blocks = (cin + kBlock - 1) / kBlock;
  const int jobs = p.out.n * blocks;

#pragma omp parallel for schedule(static)
  for (int job = 0; job < jobs; ++job) {
    const int n = job / blocks;
    const int ci0 = (job % blocks) * kBlock;
    const int nb = std::min(kBlock, cin - ci0);
    double* gbase = gx.data() + (static_cast<std::size_t>(n) * cin + ci0) * in_sp;

    for (int co = 0; co < cout; ++co) {
      const double* gyp = gy.data() + (static_cast<std::size_t>(n) * cout + co) * out_sp;
      for (int kd = 0; kd < k; ++kd) {
        for (int oz = p.z.lo[kd]; oz < p.z.hi[kd]; ++oz) {
          const int iz = oz * s + kd - p.g.padding;
          for (int kh = 0; kh < k; ++kh) {
            for (int oy = p.y.lo[kh]; oy < p.y.hi[kh]; ++oy) {
              const int iy = oy * s + kh - p.g.padding;
              const double* __restrict g_row =
                  gyp + (static_cast<std::size_t>(oz) * p.out.h + oy) * p.out.w;
              const std::size_t irow = (static_cast<std::size_t>(iz) * p.in.h + iy) * p.in.w;
              const double* wrow = w.data() + static_cast<std::size_t>(co) * w_co +
                                   static_cast<std::size_t>(ci0) * k3 +
                                   (static_cast<std::size_t>(kd) * k + kh) * k;
              for (int kw = 0; kw < k; ++kw) {
                const int off = kw - p.g.padding;
                const int lo = p.x.lo[kw];
                const int hi = p.x.hi[kw];
                if (nb == kBlock) {
                  double* __restrict r0 = gbase + irow;
                  double* __restrict r1 = r0 + in_sp;
                  double* __restrict r2 = r1 + in_sp;
                  double* __restrict r3 = r2 + in_sp;
                  const double w0 = wrow[kw];
                  const double w1 = wrow[kw + k3];
                  const double w2 = wrow[kw + 2 * k3];
                  const double w3 = wrow[kw + 3 * k3];
                  for (int ox = lo; ox < hi; ++ox) {
                    const double g = g_row[ox];
                    const int ix = ox * s + off;
                    r0[ix] += w0 * g;
                    r1[ix] += w1 * g;
                    r2[ix] += w2 * g;
                    r3[ix] += w3 * g;
                  }
                } else {
                  for (int j = 0; j < nb; ++j) {
                    double* __restrict r = gbase + j * in_sp + irow;
                    const double wv = wrow[kw + j * k3];
                    for (int ox = lo; ox < hi; ++ox) {
                      r[ox * s + off] += wv * g_row[ox];
                    }
                  }
                }
              }
            }
          }
        }
      }
    }
  }
}

template <int S>
void backward_weight_impl(const Tensor5& x, const Tensor5& gy, const Plan& p, Tensor5& gw) {
  const int s = S ? S : p.g.stride;
  const int k = p.g.kernel;
  const int cin = p.in.c;
  const int cout = p.out.c;
  const std::size_t in_sp = p.in.spatial();
  const std::size_t out_sp = p.out.spatial();
  const std::size_t k3 = static_cast<std::size_t>(k) * k * k;
  const int wo = p.out.w;
  const int jobs = cout * cin;

#pragma omp parallel
  {
    // Per-tap partial rows; reduced once per (co, ci) in a fixed order.
    std::vector<double> acc(k3 * static_cast<std::size_t>(wo));
#pragma omp for schedule(static)
    for (int job = 0; job < jobs; ++job) {
      const int co = job / cin;
      const int ci = job % cin;
      std::fill(acc.begin(), acc.end(), 0.0);
      for (int n = 0; n < p.out.n; ++n) {
        const double* gyp = gy.data() + (static_cast<std::size_t>(n) * cout + co) * out_sp;
        const double* xin = x.data() + (static_cast<std::size_t>(n) * cin + ci) * in_sp;
        for (int kd = 0; kd < k; ++kd) {
          for (int oz = p.z.lo[kd]; oz < p.z.hi[kd]; ++oz) {
            const int iz = oz * s + kd - p.g.padding;
            for (int kh = 0; kh < k; ++kh) {
              for (int oy = p.y.lo[kh]; oy < p.y.hi[kh]; ++oy) {
                const int iy = oy * s + kh - p.g.padding;
                const double* __restrict g_row =
                    gyp + (static_cast<std::size_t>(oz) * p.out.h + oy) * p.out.w;
                const double* __restrict x_row =
                    xin + (static_cast<std::size_t>(iz) * p.in.h + iy) * p.in.w;
                double* tap_base = acc.data() + ((static_cast<std::size_t>(kd) * k + kh) * k) * wo;
                for (int kw = 0; kw < k; ++kw) {
                  double* __restrict t = tap_base + static_cast<std::size_t>(kw) * wo;
                  const int off = kw - p.g.padding;
                  for (int ox = p.x.lo[kw]; ox < p.x.hi[kw]; ++ox) {
                    t[ox] += g_row[ox] * x_row[ox * s + off];
                  }
                }
              }
            }
          }
        }
      }
      double* dst = gw.data() + (static_cast<std::size_t>(co) * cin + ci) * k3;
      for (std::size_t tap = 0; tap < k3; ++tap) {
        const double* t = acc.data() + tap * wo;
        double sum = 0.0;
        for (int ox = 0; ox < wo; ++ox) {
          sum += t[ox];
        }
        dst[tap] += sum;
      }
    }
  }
}

// Zero-padded copy of every (n, c) channel of `t`: `lo` extra planes before
// and `hi` after each spatial axis.
struct Padded {
  std::vector<double> data;
  int d, h, w;
  std::size_t spatial;
  const double* row(int nc, int z, int y) const {
    return data.data() + static_cast<std::size_t>(nc) * spatial + (static_cast<std::size_t>(z) * h + y) * w;
  }
};

Padded pad_channels(const Tensor5& t, int lo, int hi) {
  const Shape& s = t.shape();
  Padded p;
  p.d = s.d + lo + hi;
  p.h = s.h + lo + hi;
  p.w = s.w + lo + hi;
  p.spatial = static_cast<std::size_t>(p.d) * p.h * p.w;
  const int channels = s.n * s.c;
  p.data.assign(p.spatial * static_cast<std::size_t>(channels), 0.0);
  const std::size_t sp = s.spatial();
#pragma omp parallel for schedule(static)
  for (int nc = 0; nc < channels; ++nc) {
    const double* src = t.data() + static_cast<std::size_t>(nc) * sp;
    for (int z = 0; z < s.d; ++z) {
      for (int y = 0; y < s.h; ++y) {
        const double* from = src + (static_cast<std::size_t>(z) * s.h + y) * s.w;
        std::copy(from, from + s.w, p.data.data() + static_cast<std::size_t>(nc) * p.spatial +
                                        (static_cast<std::size_t>(z + lo) * p.h + y + lo) * p.w + lo);
      }
    }
  }
  return p;
}

// out_j[o] += sum_kw w[j][kw] * in[o + shift(kw)] for kBlock rows j, where
// shift(kw) = kw (correlation) or K - 1 - kw (flipped). The sum over kw runs
// in increasing kw order for every element.
template <int K>
void row_block(double* __restrict o0, double* __restrict o1, double* __restrict o2,
               double* __restrict o3, const double* __restrict in, const double* w,
               std::size_t w_stride, int k_runtime, int len, bool flipped) {
  const int k = K ? K : k_runtime;
  constexpr int kMax = K ? K : 16;
  double w0[kMax], w1[kMax], w2[kMax], w3[kMax];
  int shift[kMax];
  for (int kw = 0; kw < k; ++kw) {
    w0[kw] = w[kw];
    w1[kw] = w[kw + w_stride];
    w2[kw] = w[kw + 2 * w_stride];
    w3[kw] = w[kw + 3 * w_stride];
    shift[kw] = flipped ? k - 1 - kw : kw;
  }
  for (int o = 0; o < len; ++o) {
    double a0 = o0[o], a1 = o1[o], a2 = o2[o], a3 = o3[o];
    for (int kw = 0; kw < k; ++kw) {
      const double v = in[o + shift[kw]];
      a0 += w0[kw] * v;
      a1 += w1[kw] * v;
      a2 += w2[kw] * v;
      a3 += w3[kw] * v;
    }
    o0[o] = a0;
    o1[o] = a1;
    o2[o] = a2;
    o3[o] = a3;
  }
}

template <int K>
void row_single(double* __restrict out, const double* __restrict in, const double* w, int k_runtime,
                int len, bool flipped) {
  const int k = K ? K : k_runtime;
  for (int o = 0; o < len; ++o) {
    double a = out[o];
    for (int kw = 0; kw < k; ++kw) {
      a += w[kw] * in[o + (flipped ? k - 1 - kw : kw)];
    }
    out[o] = a;
  }
}

template <int K>
void forward_stride1(const Tensor5& x, const Tensor5& w, const Plan& p, Tensor5& y) {
  const int k = K ? K : p.g.kernel;
  if (k > 16) {
    throw InvalidArgument("kernel too large for the stride-1 convolution");
  }
  const Padded xp = pad_channels(x, p.g.padding, p.g.padding);
  const int cin = p.in.c;
  const int cout = p.out.c;
  const std::size_t out_sp = p.out.spatial();
  const std::size_t w_co = static_cast<std::size_t>(cin) * k * k * k;
  const int blocks = (cout + kBlock - 1) / kBlock;
  const int jobs = p.out.n * blocks;

#pragma omp parallel for schedule(static)
  for (int job = 0; job < jobs; ++job) {
    const int n = job / blocks;
    const int co0 = (job % blocks) * kBlock;
    const int nb = std::min(kBlock, cout - co0);
    double* ybase = y.data() + (static_cast<std::size_t>(n) * cout + co0) * out_sp;
    std::fill(ybase, ybase + nb * out_sp, 0.0);
    for (int ci = 0; ci < cin; ++ci) {
      const int nc = n * cin + ci;
      for (int kd = 0; kd < k; ++kd) {
        for (int kh = 0; kh < k; ++kh) {
          const double* wrow = w.data() + static_cast<std::size_t>(co0) * w_co +
                               ((static_cast<std::size_t>(ci) * k + kd) * k + kh) * k;
          for (int oz = 0; oz < p.out.d; ++oz) {
            for (int oy = 0; oy < p.out.h; ++oy) {
              const double* in = xp.row(nc, oz + kd, oy + kh);
              double* o = ybase + (static_cast<std::size_t>(oz) * p.out.h + oy) * p.out.w;
              if (nb == kBlock) {
                row_block<K>(o, o + out_sp, o + 2 * out_sp, o + 3 * out_sp, in, wrow, w_co, k,
                             p.out.w, false);
              } else {
                for (int j = 0; j < nb; ++j) {
                  row_single<K>(o + j * out_sp, in, wrow + j * w_co, k, p.out.w, false);
                }
              }
            }
          }
        }
      }
    }
  }
}

template <int K>
void backward_input_stride1(const Tensor5& gy, const Tensor5& w, const Plan& p, Tensor5& gx) {
  const int k = K ? K : p.g.kernel;
  if (k > 16) {
    throw InvalidArgument("kernel too large for the stride-1 convolution");
  }
  const int halo = k - 1 - p.g.padding;
  if (halo < 0) {
    throw InvalidArgument("padding larger than kernel - 1 is not supported");
  }
  const Padded gp = pad_channels(gy, halo, halo);
  const int cin = p.in.c;
  const int cout = p.out.c;
  const std::size_t in_sp = p.in.spatial();
  const std::size_t k3 = static_cast<std::size_t>(k) * k * k;
  const std::size_t w_co = static_cast<std::size_t>(cin) * k3;
  const int blocks = (cin + kBlock - 1) / kBlock;
  const int jobs = p.in.n * blocks;

#pragma omp parallel for schedule(static)
  for (int job = 0; job < jobs; ++job) {
    const int n = job / blocks;
    const int ci0 = (job % blocks) * kBlock;
    const int nb = std::min(kBlock, cin - ci0);
    double* gbase = gx.data() + (static_cast<std::size_t>(n) * cin + ci0) * in_sp;
    for (int co = 0; co < cout; ++co) {
      const int nc = n * cout + co;
      for (int kd = 0; kd < k; ++kd) {
        for (int kh = 0; kh < k; ++kh) {
          // Input row i reads gradient row i + (k - 1 - kd) of the padded copy.
          const double* wrow = w.data() + static_cast<std::size_t>(co) * w_co +
                               static_cast<std::size_t>(ci0) * k3 +
                               (static_cast<std::size_t>(kd) * k + kh) * k;
          for (int iz = 0; iz < p.in.d; ++iz) {
            for (int iy = 0; iy < p.in.h; ++iy) {
              const double* in = gp.row(nc, iz + k - 1 - kd, iy + k - 1 - kh);
              double* o = gbase + (static_cast<std::size_t>(iz) * p.in.h + iy) * p.in.w;
              if (nb == kBlock) {
                row_block<K>(o, o + in_sp, o + 2 * in_sp, o + 3 * in_sp, in, wrow, k3, k, p.in.w,
                             true);
              } else {
                for (int j = 0; j < nb; ++j) {
                  row_single<K>(o + j * in_sp, in, wrow + j * k3, k, p.in.w, true);
                }
              }
            }
          }
        }
      }
    }
  }
}

// Stride-1 weight gradient over a zero-padded copy of the input, so every tap
// sees the full output lattice. Two output channels share each input load.
// Each tap sums into kLanes interleaved partial sums (lane = ox mod kLanes)
// that are added in lane order, independent of the thread count.
constexpr int kLanes = 2;

template <int K>
void backward_weight_stride1(const Tensor5& x, const Tensor5& gy, const Plan& p, Tensor5& gw) {
  const int k = K ? K : p.g.kernel;
  constexpr int kMaxTaps = K ? K : 16;
  if (k > kMaxTaps) {
    throw InvalidArgument("kernel too large for the weight-gradient kernel");
  }
  const Padded xp = pad_channels(x, p.g.padding, p.g.padding);
  const int cin = p.in.c;
  const int cout = p.out.c;
  const std::size_t out_sp = p.out.spatial();
  const std::size_t k3 = static_cast<std::size_t>(k) * k * k;
  const int od = p.out.d, oh = p.out.h, ow = p.out.w;
  const int nbatch = p.out.n;
  const int main_end = ow - ow % kLanes;
  const int co_pairs = (cout + 1) / 2;
  const int jobs = co_pairs * cin;

#pragma omp parallel for schedule(static)
  for (int job = 0; job < jobs; ++job) {
    const int co0 = (job / cin) * 2;
    const int ci = job % cin;
    const bool pair = co0 + 1 < cout;
    double* dst0 = gw.data() + (static_cast<std::size_t>(co0) * cin + ci) * k3;
    double* dst1 = pair ? dst0 + static_cast<std::size_t>(cin) * k3 : nullptr;
    for (int kd = 0; kd < k; ++kd) {
      for (int kh = 0; kh < k; ++kh) {
        double a0[kMaxTaps][kLanes] = {};
        double a1[kMaxTaps][kLanes] = {};
        for (int n = 0; n < nbatch; ++n) {
          const double* g0 = gy.data() + (static_cast<std::size_t>(n) * cout + co0) * out_sp;
          const double* g1 = pair ? g0 + out_sp : g0;
          const int nc = n * cin + ci;
          for (int oz = 0; oz < od; ++oz) {
            for (int oy = 0; oy < oh; ++oy) {
              const std::size_t row = (static_cast<std::size_t>(oz) * oh + oy) * ow;
              const double* __restrict r0 = g0 + row;
              const double* __restrict r1 = g1 + row;
              const double* __restrict xr = xp.row(nc, oz + kd, oy + kh);
              for (int ox = 0; ox < main_end; ox += kLanes) {
                for (int kw = 0; kw < k; ++kw) {
                  for (int l = 0; l < kLanes; ++l) {
                    const double v = xr[ox + l + kw];
                    a0[kw][l] += r0[ox + l] * v;
                    a1[kw][l] += r1[ox + l] * v;
                  }
                }
              }
              for (int ox = main_end; ox < ow; ++ox) {
                for (int kw = 0; kw < k; ++kw) {
                  a0[kw][ox % kLanes] += r0[ox] * xr[ox + kw];
                  a1[kw][ox % kLanes] += r1[ox] * xr[ox + kw];
                }
              }
            }
          }
        }
        for (int kw = 0; kw < k; ++kw) {
          const std::size_t tap = (static_cast<std::size_t>(kd) * k + kh) * k + kw;
          double s0 = 0.0, s1 = 0.0;
          for (int l = 0; l < kLanes; ++l) {
            s0 += a0[kw][l];
            s1 += a1[kw][l];
          }
          dst0[tap] += s0;
          if (pair) dst1[tap] += s1;
        }
      }
    }
  }
}

void check_weight(const Tensor5& w, int cout, int cin, const ConvGeometry& g) {
  const Shape& ws = w.shape();
  if (ws.n != cout || ws.c != cin || ws.d != g.kernel || ws.h != g.kernel || ws.w != g.kernel) {
    throw ShapeError("weight shape " + to_string(ws) + " does not match (" + std::to_string(cout) +
                     "," + std::to_string(cin) + "," + std::to_string(g.kernel) + "^3)");
  }
}

}  // namespace

Shape conv_output_shape(const Shape& input, int out_channels, const ConvGeometry& g) {
  check_geometry(g);
  return Shape{input.n, out_channels, conv_extent(input.d, g), conv_extent(input.h, g),
               conv_extent(input.w, g)};
}

Shape conv_transpose_output_shape(const Shape& input, int out_channels, const ConvGeometry& g) {
  check_geometry(g);
  auto extent = [&](int s) {
    const int e = (s - 1) * g.stride - 2 * g.padding + g.kernel;
    if (e <= 0) {
      throw ShapeError("transposed convolution yields non-positive extent");
    }
    return e;
  };
  return Shape{input.n, out_channels, extent(input.d), extent(input.h), extent(input.w)};
}

void conv_forward(const Tensor5& x, const Tensor5& w, const ConvGeometry& g, Tensor5& y) {
  const Shape out = conv_output_shape(x.shape(), w.shape().n, g);
  check_weight(w, out.c, x.shape().c, g);
  if (y.shape() != out) {
    throw ShapeError("conv output buffer " + to_string(y.shape()) + " should be " + to_string(out));
  }
  const Plan plan = make_plan(x.shape(), out, g);
  switch (g.stride) {
    case 1:
      if (g.kernel == 5) {
        forward_stride1<5>(x, w, plan, y);
      } else {
        forward_stride1<0>(x, w, plan, y);
      }
      break;
    case 2: forward_impl<2>(x, w, plan, y); break;
    default: forward_impl<0>(x, w, plan, y); break;
  }
}

void conv_backward_input(const Tensor5& gy, const Tensor5& w, const ConvGeometry& g, Tensor5& gx) {
  const Shape out = conv_output_shape(gx.shape(), w.shape().n, g);
  check_weight(w, out.c, gx.shape().c, g);
  if (gy.shape() != out) {
    throw ShapeError("conv upstream gradient " + to_string(gy.shape()) + " should be " +
                     to_string(out));
  }
  const Plan plan = make_plan(gx.shape(), out, g);
  switch (g.stride) {
    case 1:
      if (g.kernel == 5) {
        backward_input_stride1<5>(gy, w, plan, gx);
      } else {
        backward_input_stride1<0>(gy, w, plan, gx);
      }
      break;
    case 2: backward_input_impl<2>(gy, w, plan, gx); break;
    default: backward_input_impl<0>(gy, w, plan, gx); break;
  }
}

void conv_backward_weight(const Tensor5& x, const Tensor5& gy, const ConvGeometry& g, Tensor5& gw) {
  const Shape out = conv_output_shape(x.shape(), gw.shape().n, g);
  check_weight(gw, out.c, x.shape().c, g);
  if (gy.shape() != out) {
    throw ShapeError("conv upstream gradient " + to_string(gy.shape()) + " should be " +
                     to_string(out));
  }
  const Plan plan = make_plan(x.shape(), out, g);
  switch (g.stride) {
    case 1:
      if (g.kernel == 5) {
        backward_weight_stride1<5>(x, gy, plan, gw);
      } else {
        backward_weight_stride1<0>(x, gy, plan, gw);
      }
      break;
    case 2: backward_weight_impl<2>(x, gy, plan, gw); break;
    default: backward_weight_impl<0>(x, gy, plan, gw); break;
  }
}

}  // namespace vnet
