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

#include "vnet/ops.hpp"

#include <algorithm>
#include <cmath>

#include "vnet/error.hpp"

namespace vnet {

namespace {

void check_conv_params(const ConvParams& p, int in_channels, bool transposed, const char* op) {
  if (!p.weight || !p.bias) {
    throw InvalidArgument(std::string(op) + ": missing weight or bias");
  }
  const Shape& ws = p.weight->value.shape();
  if (ws.d != ws.h || ws.h != ws.w) {
    throw ShapeError(std::string(op) + ": kernel must be cubic, got " + to_string(ws));
  }
  if (p.stride != 1 && p.stride != 2) {
    throw InvalidArgument(std::string(op) + ": stride must be 1 or 2");
  }
  const int expected_in = transposed ? ws.n : ws.c;
  if (expected_in != in_channels) {
    throw ShapeError(std::string(op) + ": input has " + std::to_string(in_channels) +
                     " channels, weight " + to_string(ws) + " expects " +
                     std::to_string(expected_in));
  }
  const int out_channels = transposed ? ws.c : ws.n;
  if (p.bias->value.shape() != Shape{1, out_channels, 1, 1, 1}) {
    throw ShapeError(std::string(op) + ": bias shape " + to_string(p.bias->value.shape()) +
                     " does not match " + std::to_string(out_channels) + " output channels");
  }
}

void add_bias(Tensor5& y, const Tensor5& bias) {
  const Shape& s = y.shape();
  const std::size_t sp = s.spatial();
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      double* row = y.data() + (static_cast<std::size_t>(n) * s.c + c) * sp;
      const double b = bias[static_cast<std::size_t>(c)];
      for (std::size_t i = 0; i < sp; ++i) {
        row[i] += b;
      }
    }
  }
}

void accumulate_bias_grad(const Tensor5& gy, Tensor5& gb) {
  const Shape& s = gy.shape();
  const std::size_t sp = s.spatial();
  for (int c = 0; c < s.c; ++c) {
    double acc = 0.0;
    for (int n = 0; n < s.n; ++n) {
      const double* row = gy.data() + (static_cast<std::size_t>(n) * s.c + c) * sp;
      for (std::size_t i = 0; i < sp; ++i) {
        acc += row[i];
      }
    }
    gb[static_cast<std::size_t>(c)] += acc;
  }
}

void accumulate(Tensor5& dst, const Tensor5& src) {
  double* d = dst.data();
  const double* s = src.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    d[i] += s[i];
  }
}

}  // namespace

Var conv3d(Tape& tape, const Var& x, const ConvParams& p) {
  check_conv_params(p, x->value.shape().c, false, "conv3d");
  const ConvGeometry g = p.geometry();
  Tensor5 y(conv_output_shape(x->value.shape(), p.weight->value.shape().n, g));
  conv_forward(x->value, p.weight->value, g, y);
  add_bias(y, p.bias->value);
  require_finite(y.span(), "conv3d");

  Var out = tape.make_output(std::move(y), {&x, &p.weight, &p.bias});
  tape.record(out, [out, x, w = p.weight, b = p.bias, g] {
    const Tensor5& gy = out->grad;
    if (x->requires_grad) {
      conv_backward_input(gy, w->value, g, x->grad_buffer());
    }
    if (w->requires_grad) {
      conv_backward_weight(x->value, gy, g, w->grad_buffer());
    }
    if (b->requires_grad) {
      accumulate_bias_grad(gy, b->grad_buffer());
    }
  });
  return out;
}

Var down_conv(Tape& tape, const Var& x, const ConvParams& p) {
  const Shape& s = x->value.shape();
  if (s.d % 2 || s.h % 2 || s.w % 2) {
    throw ShapeError("down_conv: every spatial axis must be even, got " + to_string(s));
  }
  if (p.kernel() != 2 || p.stride != 2 || p.padding != 0) {
    throw InvalidArgument("down_conv: needs kernel 2, stride 2, padding 0");
  }
  return conv3d(tape, x, p);
}

Var up_conv(Tape& tape, const Var& x, const ConvParams& p) {
  check_conv_params(p, x->value.shape().c, true, "up_conv");
  if (p.kernel() != 2 || p.stride != 2 || p.padding != 0) {
    throw InvalidArgument("up_conv: needs kernel 2, stride 2, padding 0");
  }
  const ConvGeometry g = p.geometry();
  Tensor5 y(conv_transpose_output_shape(x->value.shape(), p.weight->value.shape().c, g));
  conv_backward_input(x->value, p.weight->value, g, y);
  add_bias(y, p.bias->value);
  require_finite(y.span(), "up_conv");

  Var out = tape.make_output(std::move(y), {&x, &p.weight, &p.bias});
  tape.record(out, [out, x, w = p.weight, b = p.bias, g] {
    const Tensor5& gy = out->grad;
    if (x->requires_grad) {
      Tensor5 gx(x->value.shape());
      conv_forward(gy, w->value, g, gx);
      accumulate(x->grad_buffer(), gx);
    }
    if (w->requires_grad) {
      conv_backward_weight(gy, x->value, g, w->grad_buffer());
    }
    if (b->requires_grad) {
      accumulate_bias_grad(gy, b->grad_buffer());
    }
  });
  return out;
}

Var prelu(Tape& tape, const Var& x, const PReLUParams& p) {
  const Shape& s = x->value.shape();
  if (!p.slope || p.slope->value.shape() != Shape{1, s.c, 1, 1, 1}) {
    throw ShapeError("prelu: slope count must equal channel count " + std::to_string(s.c));
  }
  const std::size_t sp = s.spatial();
  Tensor5 y(s);
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const std::size_t base = (static_cast<std::size_t>(n) * s.c + c) * sp;
      const double a = p.slope->value[static_cast<std::size_t>(c)];
      for (std::size_t i = 0; i < sp; ++i) {
        const double v = x->value[base + i];
        y[base + i] = v > 0.0 ? v : a * v;
      }
    }
  }
  require_finite(y.span(), "prelu");

  Var out = tape.make_output(std::move(y), {&x, &p.slope});
  tape.record(out, [out, x, a = p.slope] {
    const Shape& s = x->value.shape();
    const std::size_t sp = s.spatial();
    const Tensor5& gy = out->grad;
    double* gx = x->requires_grad ? x->grad_buffer().data() : nullptr;
    for (int c = 0; c < s.c; ++c) {
      const double slope = a->value[static_cast<std::size_t>(c)];
      double ga = 0.0;
      for (int n = 0; n < s.n; ++n) {
        const std::size_t base = (static_cast<std::size_t>(n) * s.c + c) * sp;
        for (std::size_t i = 0; i < sp; ++i) {
          const double v = x->value[base + i];
          const double g = gy[base + i];
          if (v > 0.0) {
            if (gx) gx[base + i] += g;
          } else {
            if (gx) gx[base + i] += slope * g;
            ga += g * v;
          }
        }
      }
      if (a->requires_grad) {
        a->grad_buffer()[static_cast<std::size_t>(c)] += ga;
      }
    }
  });
  return out;
}

Var softmax_voxelwise(Tape& tape, const Var& x) {
  const Shape& s = x->value.shape();
  if (s.c != 2) {
    throw ShapeError("softmax_voxelwise: needs exactly 2 channels, got " + std::to_string(s.c));
  }
  const std::size_t sp = s.spatial();
  Tensor5 y(s);
  for (int n = 0; n < s.n; ++n) {
    const std::size_t b0 = static_cast<std::size_t>(n) * 2 * sp;
    const std::size_t b1 = b0 + sp;
    for (std::size_t i = 0; i < sp; ++i) {
      const double a = x->value[b0 + i];
      const double b = x->value[b1 + i];
      const double m = std::max(a, b);
      const double ea = std::exp(a - m);
      const double eb = std::exp(b - m);
      const double z = ea + eb;
      y[b0 + i] = ea / z;
      y[b1 + i] = eb / z;
    }
  }
  require_finite(y.span(), "softmax_voxelwise");

  Var out = tape.make_output(std::move(y), {&x});
  tape.record(out, [out, x] {
    const Shape& s = x->value.shape();
    const std::size_t sp = s.spatial();
    const Tensor5& p = out->value;
    const Tensor5& gy = out->grad;
    Tensor5& gx = x->grad_buffer();
    for (int n = 0; n < s.n; ++n) {
      const std::size_t b0 = static_cast<std::size_t>(n) * 2 * sp;
      const std::size_t b1 = b0 + sp;
      for (std::size_t i = 0; i < sp; ++i) {
        const double dot = p[b0 + i] * gy[b0 + i] + p[b1 + i] * gy[b1 + i];
        gx[b0 + i] += p[b0 + i] * (gy[b0 + i] - dot);
        gx[b1 + i] += p[b1 + i] * (gy[b1 + i] - dot);
      }
    }
  });
  return out;
}

Var add(Tape& tape, const Var& x, const Var& y) {
  if (x->value.shape() != y->value.shape()) {
    throw ShapeError("add: shapes " + to_string(x->value.shape()) + " and " +
                     to_string(y->value.shape()) + " differ");
  }
  Tensor5 z = x->value;
  accumulate(z, y->value);
  require_finite(z.span(), "add");

  Var out = tape.make_output(std::move(z), {&x, &y});
  tape.record(out, [out, x, y] {
    if (x->requires_grad) accumulate(x->grad_buffer(), out->grad);
    if (y->requires_grad) accumulate(y->grad_buffer(), out->grad);
  });
  return out;
}

Var concat_channels(Tape& tape, const Var& x, const Var& y) {
  const Shape& a = x->value.shape();
  const Shape& b = y->value.shape();
  if (a.n != b.n || a.d != b.d || a.h != b.h || a.w != b.w) {
    throw ShapeError("concat_channels: shapes " + to_string(a) + " and " + to_string(b) +
                     " differ outside the channel axis");
  }
  const std::size_t sp = a.spatial();
  const std::size_t na = static_cast<std::size_t>(a.c) * sp;
  const std::size_t nb = static_cast<std::size_t>(b.c) * sp;
  Tensor5 z(Shape{a.n, a.c + b.c, a.d, a.h, a.w});
  for (int n = 0; n < a.n; ++n) {
    double* dst = z.data() + n * (na + nb);
    std::copy_n(x->value.data() + n * na, na, dst);
    std::copy_n(y->value.data() + n * nb, nb, dst + na);
  }

  Var out = tape.make_output(std::move(z), {&x, &y});
  tape.record(out, [out, x, y, na, nb] {
    const int batch = x->value.shape().n;
    for (int n = 0; n < batch; ++n) {
      const double* g = out->grad.data() + n * (na + nb);
      if (x->requires_grad) {
        double* gx = x->grad_buffer().data() + n * na;
        for (std::size_t i = 0; i < na; ++i) gx[i] += g[i];
      }
      if (y->requires_grad) {
        double* gy = y->grad_buffer().data() + n * nb;
        for (std::size_t i = 0; i < nb; ++i) gy[i] += g[na + i];
      }
    }
  });
  return out;
}

Var tile_channels(Tape& tape, const Var& x, int channels) {
  const Shape& s = x->value.shape();
  if (s.c != 1 || channels < 1) {
    throw ShapeError("tile_channels: needs a single-channel input and channels >= 1");
  }
  const std::size_t sp = s.spatial();
  Tensor5 z(Shape{s.n, channels, s.d, s.h, s.w});
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < channels; ++c) {
      std::copy_n(x->value.data() + n * sp, sp, z.data() + (static_cast<std::size_t>(n) * channels + c) * sp);
    }
  }

  Var out = tape.make_output(std::move(z), {&x});
  tape.record(out, [out, x, channels, sp] {
    const int batch = x->value.shape().n;
    Tensor5& gx = x->grad_buffer();
    for (int n = 0; n < batch; ++n) {
      for (int c = 0; c < channels; ++c) {
        const double* g = out->grad.data() + (static_cast<std::size_t>(n) * channels + c) * sp;
        for (std::size_t i = 0; i < sp; ++i) gx[n * sp + i] += g[i];
      }
    }
  });
  return out;
}

Var multiply(Tape& tape, const Var& x, const Var& y) {
  if (x->value.shape() != y->value.shape()) {
    throw ShapeError("multiply: shapes differ");
  }
  Tensor5 z = x->value;
  for (std::size_t i = 0; i < z.size(); ++i) z[i] *= y->value[i];
  require_finite(z.span(), "multiply");

  Var out = tape.make_output(std::move(z), {&x, &y});
  tape.record(out, [out, x, y] {
    const std::size_t count = out->grad.size();
    if (x->requires_grad) {
      Tensor5& gx = x->grad_buffer();
      for (std::size_t i = 0; i < count; ++i) gx[i] += out->grad[i] * y->value[i];
    }
    if (y->requires_grad) {
      Tensor5& gy = y->grad_buffer();
      for (std::size_t i = 0; i < count; ++i) gy[i] += out->grad[i] * x->value[i];
    }
  });
  return out;
}

Var sum(Tape& tape, const Var& x) {
  double acc = 0.0;
  for (double v : x->value.values()) acc += v;
  Tensor5 z(Shape{1, 1, 1, 1, 1}, {acc});
  require_finite(z.span(), "sum");

  Var out = tape.make_output(std::move(z), {&x});
  tape.record(out, [out, x] {
    const double g = out->grad[0];
    for (double& v : x->grad_buffer().values()) v += g;
  });
  return out;
}

}  // namespace vnet
