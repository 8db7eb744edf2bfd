// Copyright 2026 the dksan authors
// SPDX-License-Identifier: Apache-2.0

#include "dksan/nn_ops.hpp"

#include <algorithm>
#include <cmath>

#include "dksan/op_registry.hpp"
#include "dksan/threading.hpp"

namespace dksan {

namespace gradcheck_hooks {
thread_local bool track_preacts = false;
thread_local double min_abs_preact = 1e300;
}  // namespace gradcheck_hooks

template <typename T>
Var leaky_relu(Tape<T>& tp, Var x, T slope) {
  const Tensor<T>& xv = tp.value(x);
  if (gradcheck_hooks::track_preacts) {
    for (int64_t i = 0; i < xv.numel(); ++i) {
      const double a = std::abs(static_cast<double>(xv[i]));
      if (a < gradcheck_hooks::min_abs_preact) gradcheck_hooks::min_abs_preact = a;
    }
  }
  Tensor<T> out(xv.shape());
  for (int64_t i = 0; i < xv.numel(); ++i)
    out[i] = xv[i] >= T(0) ? xv[i] : slope * xv[i];
  Var o = tp.push(std::move(out));
  tp.record([&tp, x, o, slope] {
    const Tensor<T>& g = tp.grad(o);
    const Tensor<T>& xv = tp.value(x);
    Tensor<T>& gx = tp.grad(x);
    for (int64_t i = 0; i < g.numel(); ++i)
      gx[i] += xv[i] >= T(0) ? g[i] : slope * g[i];
  });
  return o;
}

template <typename T>
Var sigmoid(Tape<T>& tp, Var x) {
  const Tensor<T>& xv = tp.value(x);
  Tensor<T> out(xv.shape());
  for (int64_t i = 0; i < xv.numel(); ++i)
    out[i] = T(1) / (T(1) + std::exp(-xv[i]));
  Var o = tp.push(std::move(out));
  tp.record([&tp, x, o] {
    const Tensor<T>& g = tp.grad(o);
    const Tensor<T>& ov = tp.value(o);
    Tensor<T>& gx = tp.grad(x);
    for (int64_t i = 0; i < g.numel(); ++i)
      gx[i] += g[i] * ov[i] * (T(1) - ov[i]);
  });
  return o;
}

template <typename T>
Var global_avg_pool(Tape<T>& tp, Var x) {
  const Tensor<T>& xv = tp.value(x);
  if (xv.h() < 1 || xv.w() < 1)
    throw contract_error("global_avg_pool: empty spatial dims " + xv.shape().str());
  const int64_t plane = static_cast<int64_t>(xv.h()) * xv.w();
  Tensor<T> out(Shape{xv.n(), xv.c(), 1, 1});
  for (int n = 0; n < xv.n(); ++n)
    for (int c = 0; c < xv.c(); ++c) {
      const T* p = xv.plane(n, c);
      T acc(0);
      for (int64_t i = 0; i < plane; ++i) acc += p[i];
      out.at(n, c, 0, 0) = acc / static_cast<T>(plane);
    }
  ensure_finite(out, "global_avg_pool");
  Var o = tp.push(std::move(out));
  tp.record([&tp, x, o, plane] {
    const Tensor<T>& g = tp.grad(o);
    Tensor<T>& gx = tp.grad(x);
    const T inv = T(1) / static_cast<T>(plane);
    for (int n = 0; n < gx.n(); ++n)
      for (int c = 0; c < gx.c(); ++c) {
        const T gv = g.at(n, c, 0, 0) * inv;
        T* p = gx.plane(n, c);
        for (int64_t i = 0; i < plane; ++i) p[i] += gv;
      }
  });
  return o;
}

namespace {

// shared index map: out flat index -> in flat index, per (n) batch plane
template <typename T>
Tensor<T> shuffle_forward(const Tensor<T>& x, int r) {
  const int n = x.n(), c_in = x.c(), h = x.h(), w = x.w();
  if (r < 1 || c_in % (r * r) != 0)
    throw contract_error("pixel_shuffle: channels " + std::to_string(c_in) +
                         " not divisible by r^2 with r=" + std::to_string(r));
  const int c_out = c_in / (r * r);
  Tensor<T> out(Shape{n, c_out, h * r, w * r});
  for (int ni = 0; ni < n; ++ni)
    for (int co = 0; co < c_out; ++co)
      for (int sy = 0; sy < r; ++sy)
        for (int sx = 0; sx < r; ++sx) {
          const int ci = co * r * r + sy * r + sx;
          const T* src = x.plane(ni, ci);
          for (int y = 0; y < h; ++y) {
            T* dst = out.plane(ni, co) + static_cast<int64_t>(y * r + sy) * (w * r) + sx;
            const T* srow = src + static_cast<int64_t>(y) * w;
            for (int xx = 0; xx < w; ++xx) dst[xx * r] = srow[xx];
          }
        }
  return out;
}

}  // namespace

template <typename T>
Var pixel_shuffle(Tape<T>& tp, Var x, int r) {
  Tensor<T> out = shuffle_forward(tp.value(x), r);
  Var o = tp.push(std::move(out));
  tp.record([&tp, x, o, r] {
    // inverse permutation: scatter upstream grads back channel-wise
    Tensor<T> g_in = pixel_unshuffle(tp.grad(o), r);
    Tensor<T>& gx = tp.grad(x);
    for (int64_t i = 0; i < gx.numel(); ++i) gx[i] += g_in[i];
  });
  return o;
}

template <typename T>
Tensor<T> pixel_unshuffle(const Tensor<T>& x, int r) {
  const int n = x.n(), c_in = x.c(), h = x.h(), w = x.w();
  if (r < 1 || h % r != 0 || w % r != 0)
    throw contract_error("pixel_unshuffle: spatial dims not divisible by r=" +
                         std::to_string(r));
  const int c_out = c_in * r * r;
  Tensor<T> out(Shape{n, c_out, h / r, w / r});
  for (int ni = 0; ni < n; ++ni)
    for (int co = 0; co < c_out; ++co) {
      const int ci = co / (r * r);
      const int sy = (co % (r * r)) / r;
      const int sx = co % r;
      const T* src = x.plane(ni, ci);
      T* dst = out.plane(ni, co);
      for (int y = 0; y < h / r; ++y)
        for (int xx = 0; xx < w / r; ++xx)
          dst[static_cast<int64_t>(y) * (w / r) + xx] =
              src[static_cast<int64_t>(y * r + sy) * w + xx * r + sx];
    }
  return out;
}

// ---- bicubic ----

namespace {

// Keys cubic-convolution kernel, a = -0.5
template <typename T>
T cubic_weight(T s) {
  const T a = T(-0.5);
  s = std::abs(s);
  if (s <= T(1)) return ((a + 2) * s - (a + 3)) * s * s + 1;
  if (s < T(2)) return ((a * s - 5 * a) * s + 8 * a) * s - 4 * a;
  return T(0);
}

template <typename T>
struct CubicAxis {
  std::vector<int> idx;  // 4 clamped taps per output coordinate
  std::vector<T> wt;
};

template <typename T>
CubicAxis<T> build_cubic_axis(int in_size, int out_size) {
  CubicAxis<T> ax;
  ax.idx.resize(static_cast<size_t>(out_size) * 4);
  ax.wt.resize(static_cast<size_t>(out_size) * 4);
  const double ratio = static_cast<double>(in_size) / out_size;
  for (int o = 0; o < out_size; ++o) {
    const double src = (o + 0.5) * ratio - 0.5;
    const int base = static_cast<int>(std::floor(src));
    for (int t = 0; t < 4; ++t) {
      const int raw = base - 1 + t;
      ax.idx[o * 4 + t] = raw < 0 ? 0 : (raw >= in_size ? in_size - 1 : raw);
      ax.wt[o * 4 + t] = cubic_weight<T>(static_cast<T>(src - raw));
    }
  }
  return ax;
}

// separable resize of one (h_in, w_in) plane into (h_out, w_out)
template <typename T>
void resize_plane(const T* src, int h_in, int w_in, const CubicAxis<T>& ay,
                  const CubicAxis<T>& ax, int h_out, int w_out, T* dst, T* tmp) {
  // rows pass: tmp is (h_out, w_in)
  for (int y = 0; y < h_out; ++y) {
    const int* iy = &ay.idx[y * 4];
    const T* wy = &ay.wt[y * 4];
    T* trow = tmp + static_cast<int64_t>(y) * w_in;
    const T* r0 = src + static_cast<int64_t>(iy[0]) * w_in;
    const T* r1 = src + static_cast<int64_t>(iy[1]) * w_in;
    const T* r2 = src + static_cast<int64_t>(iy[2]) * w_in;
    const T* r3 = src + static_cast<int64_t>(iy[3]) * w_in;
    for (int xx = 0; xx < w_in; ++xx)
      trow[xx] = wy[0] * r0[xx] + wy[1] * r1[xx] + wy[2] * r2[xx] + wy[3] * r3[xx];
  }
  // cols pass
  for (int y = 0; y < h_out; ++y) {
    const T* trow = tmp + static_cast<int64_t>(y) * w_in;
    T* drow = dst + static_cast<int64_t>(y) * w_out;
    for (int xx = 0; xx < w_out; ++xx) {
      const int* ix = &ax.idx[xx * 4];
      const T* wx = &ax.wt[xx * 4];
      drow[xx] = wx[0] * trow[ix[0]] + wx[1] * trow[ix[1]] + wx[2] * trow[ix[2]] +
                 wx[3] * trow[ix[3]];
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> bicubic_resize(const Tensor<T>& x, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1 || x.h() < 1 || x.w() < 1)
    throw contract_error("bicubic_resize: bad sizes");
  const CubicAxis<T> ay = build_cubic_axis<T>(x.h(), out_h);
  const CubicAxis<T> ax = build_cubic_axis<T>(x.w(), out_w);
  Tensor<T> out(Shape{x.n(), x.c(), out_h, out_w});
  const int planes = x.n() * x.c();
#pragma omp parallel num_threads(num_threads())
  {
    std::vector<T> tmp(static_cast<size_t>(out_h) * x.w());
#pragma omp for
    for (int p = 0; p < planes; ++p) {
      const int n = p / x.c(), c = p % x.c();
      resize_plane(x.plane(n, c), x.h(), x.w(), ay, ax, out_h, out_w,
                   out.plane(n, c), tmp.data());
    }
  }
  ensure_finite(out, "bicubic_resize");
  return out;
}

template <typename T>
Var bicubic_up2(Tape<T>& tp, Var x) {
  const Tensor<T>& xv = tp.value(x);
  const int h_in = xv.h(), w_in = xv.w();
  Var o = tp.push(bicubic_resize(xv, h_in * 2, w_in * 2));
  tp.record([&tp, x, o, h_in, w_in] {
    // transpose of the separable gather: scatter per plane, planes parallel
    const Tensor<T>& g = tp.grad(o);
    Tensor<T>& gx = tp.grad(x);
    const CubicAxis<T> ay = build_cubic_axis<T>(h_in, h_in * 2);
    const CubicAxis<T> ax = build_cubic_axis<T>(w_in, w_in * 2);
    const int planes = g.n() * g.c();
#pragma omp parallel num_threads(num_threads())
    {
      std::vector<T> tmp(static_cast<size_t>(g.h()) * w_in);
#pragma omp for
      for (int p = 0; p < planes; ++p) {
        const int n = p / g.c(), c = p % g.c();
        const T* gp = g.plane(n, c);
        T* gxp = gx.plane(n, c);
        // invert cols pass: tmp (h_out, w_in)
        std::fill(tmp.begin(), tmp.end(), T(0));
        for (int y = 0; y < g.h(); ++y) {
          const T* grow = gp + static_cast<int64_t>(y) * g.w();
          T* trow = tmp.data() + static_cast<int64_t>(y) * w_in;
          for (int xx = 0; xx < g.w(); ++xx) {
            const int* ix = &ax.idx[xx * 4];
            const T* wx = &ax.wt[xx * 4];
            const T gv = grow[xx];
            trow[ix[0]] += wx[0] * gv;
            trow[ix[1]] += wx[1] * gv;
            trow[ix[2]] += wx[2] * gv;
            trow[ix[3]] += wx[3] * gv;
          }
        }
        // invert rows pass
        for (int y = 0; y < g.h(); ++y) {
          const int* iy = &ay.idx[y * 4];
          const T* wy = &ay.wt[y * 4];
          const T* trow = tmp.data() + static_cast<int64_t>(y) * w_in;
          for (int xx = 0; xx < w_in; ++xx) {
            const T tv = trow[xx];
            gxp[static_cast<int64_t>(iy[0]) * w_in + xx] += wy[0] * tv;
            gxp[static_cast<int64_t>(iy[1]) * w_in + xx] += wy[1] * tv;
            gxp[static_cast<int64_t>(iy[2]) * w_in + xx] += wy[2] * tv;
            gxp[static_cast<int64_t>(iy[3]) * w_in + xx] += wy[3] * tv;
          }
        }
      }
    }
  });
  return o;
}

// ---- structural ops ----

template <typename T>
Var concat_channels(Tape<T>& tp, const std::vector<Var>& xs) {
  if (xs.empty()) throw contract_error("concat_channels: no inputs");
  const Tensor<T>& first = tp.value(xs[0]);
  int c_total = 0;
  for (Var v : xs) {
    const Tensor<T>& t = tp.value(v);
    if (t.n() != first.n() || t.h() != first.h() || t.w() != first.w())
      throw contract_error("concat_channels: mismatched shapes " + t.shape().str() +
                           " vs " + first.shape().str());
    c_total += t.c();
  }
  Tensor<T> out(Shape{first.n(), c_total, first.h(), first.w()});
  const int64_t plane = static_cast<int64_t>(first.h()) * first.w();
  int c_off = 0;
  for (Var v : xs) {
    const Tensor<T>& t = tp.value(v);
    for (int n = 0; n < t.n(); ++n)
      for (int c = 0; c < t.c(); ++c) {
        const T* src = t.plane(n, c);
        T* dst = out.plane(n, c_off + c);
        for (int64_t i = 0; i < plane; ++i) dst[i] = src[i];
      }
    c_off += t.c();
  }
  Var o = tp.push(std::move(out));
  std::vector<Var> ins = xs;
  tp.record([&tp, ins, o, plane] {
    const Tensor<T>& g = tp.grad(o);
    int c_off = 0;
    for (Var v : ins) {
      Tensor<T>& gx = tp.grad(v);
      for (int n = 0; n < gx.n(); ++n)
        for (int c = 0; c < gx.c(); ++c) {
          const T* src = g.plane(n, c_off + c);
          T* dst = gx.plane(n, c);
          for (int64_t i = 0; i < plane; ++i) dst[i] += src[i];
        }
      c_off += gx.c();
    }
  });
  return o;
}

template <typename T>
Var slice_channels(Tape<T>& tp, Var x, int c0, int c1) {
  const Tensor<T>& xv = tp.value(x);
  if (c0 < 0 || c1 > xv.c() || c0 >= c1)
    throw contract_error("slice_channels: bad range [" + std::to_string(c0) + "," +
                         std::to_string(c1) + ") of " + std::to_string(xv.c()));
  Tensor<T> out(Shape{xv.n(), c1 - c0, xv.h(), xv.w()});
  const int64_t plane = static_cast<int64_t>(xv.h()) * xv.w();
  for (int n = 0; n < xv.n(); ++n)
    for (int c = c0; c < c1; ++c) {
      const T* src = xv.plane(n, c);
      T* dst = out.plane(n, c - c0);
      for (int64_t i = 0; i < plane; ++i) dst[i] = src[i];
    }
  Var o = tp.push(std::move(out));
  tp.record([&tp, x, o, c0, plane] {
    const Tensor<T>& g = tp.grad(o);
    Tensor<T>& gx = tp.grad(x);
    for (int n = 0; n < g.n(); ++n)
      for (int c = 0; c < g.c(); ++c) {
        const T* src = g.plane(n, c);
        T* dst = gx.plane(n, c0 + c);
        for (int64_t i = 0; i < plane; ++i) dst[i] += src[i];
      }
  });
  return o;
}

template <typename T>
Var gather_rows(Tape<T>& tp, Var x, const std::vector<int>& rows) {
  const Tensor<T>& xv = tp.value(x);
  for (int r : rows)
    if (r < 0 || r >= xv.n())
      throw contract_error("gather_rows: row " + std::to_string(r) + " out of " +
                           std::to_string(xv.n()));
  const int64_t stride = static_cast<int64_t>(xv.c()) * xv.h() * xv.w();
  Tensor<T> out(Shape{static_cast<int>(rows.size()), xv.c(), xv.h(), xv.w()});
  for (size_t i = 0; i < rows.size(); ++i) {
    const T* src = xv.data() + rows[i] * stride;
    T* dst = out.data() + i * stride;
    for (int64_t j = 0; j < stride; ++j) dst[j] = src[j];
  }
  Var o = tp.push(std::move(out));
  std::vector<int> rows_saved = rows;
  tp.record([&tp, x, o, rows_saved, stride] {
    const Tensor<T>& g = tp.grad(o);
    Tensor<T>& gx = tp.grad(x);
    for (size_t i = 0; i < rows_saved.size(); ++i) {
      const T* src = g.data() + i * stride;
      T* dst = gx.data() + rows_saved[i] * stride;
      for (int64_t j = 0; j < stride; ++j) dst[j] += src[j];
    }
  });
  return o;
}

template <typename T>
Var tile_channels(Tape<T>& tp, Var x, int copies) {
  const Tensor<T>& xv = tp.value(x);
  if (xv.c() != 1) throw contract_error("tile_channels: input must have 1 channel");
  Tensor<T> out(Shape{xv.n(), copies, xv.h(), xv.w()});
  const int64_t plane = static_cast<int64_t>(xv.h()) * xv.w();
  for (int n = 0; n < xv.n(); ++n) {
    const T* src = xv.plane(n, 0);
    for (int c = 0; c < copies; ++c) {
      T* dst = out.plane(n, c);
      for (int64_t i = 0; i < plane; ++i) dst[i] = src[i];
    }
  }
  Var o = tp.push(std::move(out));
  tp.record([&tp, x, o, copies, plane] {
    const Tensor<T>& g = tp.grad(o);
    Tensor<T>& gx = tp.grad(x);
    for (int n = 0; n < gx.n(); ++n) {
      T* dst = gx.plane(n, 0);
      for (int c = 0; c < copies; ++c) {
        const T* src = g.plane(n, c);
        for (int64_t i = 0; i < plane; ++i) dst[i] += src[i];
      }
    }
  });
  return o;
}

template <typename T>
Var channel_scale(Tape<T>& tp, Var x, Var gate) {
  const Tensor<T>& xv = tp.value(x);
  const Tensor<T>& gv = tp.value(gate);
  if (gv.n() != xv.n() || gv.c() != xv.c() || gv.h() != 1 || gv.w() != 1)
    throw contract_error("channel_scale: gate must be (n,c,1,1), got " +
                         gv.shape().str() + " for x " + xv.shape().str());
  Tensor<T> out(xv.shape());
  const int64_t plane = static_cast<int64_t>(xv.h()) * xv.w();
  for (int n = 0; n < xv.n(); ++n)
    for (int c = 0; c < xv.c(); ++c) {
      const T s = gv.at(n, c, 0, 0);
      const T* src = xv.plane(n, c);
      T* dst = out.plane(n, c);
      for (int64_t i = 0; i < plane; ++i) dst[i] = src[i] * s;
    }
  Var o = tp.push(std::move(out));
  tp.record([&tp, x, gate, o, plane] {
    const Tensor<T>& g = tp.grad(o);
    const Tensor<T>& xv = tp.value(x);
    const Tensor<T>& gv = tp.value(gate);
    Tensor<T>& gx = tp.grad(x);
    Tensor<T>& gg = tp.grad(gate);
    for (int n = 0; n < g.n(); ++n)
      for (int c = 0; c < g.c(); ++c) {
        const T s = gv.at(n, c, 0, 0);
        const T* gp = g.plane(n, c);
        const T* xp = xv.plane(n, c);
        T* gxp = gx.plane(n, c);
        T acc(0);
        for (int64_t i = 0; i < plane; ++i) {
          gxp[i] += gp[i] * s;
          acc += gp[i] * xp[i];
        }
        gg.at(n, c, 0, 0) += acc;
      }
  });
  return o;
}

DKSAN_REGISTER_OP(leaky_relu);
DKSAN_REGISTER_OP(sigmoid);
DKSAN_REGISTER_OP(global_avg_pool);
DKSAN_REGISTER_OP(pixel_shuffle);
DKSAN_REGISTER_OP(bicubic_resize);
DKSAN_REGISTER_OP(concat_channels);
DKSAN_REGISTER_OP(slice_channels);
DKSAN_REGISTER_OP(gather_rows);
DKSAN_REGISTER_OP(tile_channels);
DKSAN_REGISTER_OP(channel_scale);

#define DKSAN_INSTANTIATE(T)                                                   \
  template Var leaky_relu<T>(Tape<T>&, Var, T);                                \
  template Var sigmoid<T>(Tape<T>&, Var);                                      \
  template Var global_avg_pool<T>(Tape<T>&, Var);                              \
  template Var pixel_shuffle<T>(Tape<T>&, Var, int);                           \
  template Tensor<T> pixel_unshuffle<T>(const Tensor<T>&, int);                \
  template Tensor<T> bicubic_resize<T>(const Tensor<T>&, int, int);            \
  template Var bicubic_up2<T>(Tape<T>&, Var);                                  \
  template Var concat_channels<T>(Tape<T>&, const std::vector<Var>&);          \
  template Var slice_channels<T>(Tape<T>&, Var, int, int);                     \
  template Var gather_rows<T>(Tape<T>&, Var, const std::vector<int>&);         \
  template Var tile_channels<T>(Tape<T>&, Var, int);                           \
  template Var channel_scale<T>(Tape<T>&, Var, Var);

DKSAN_INSTANTIATE(float)
DKSAN_INSTANTIATE(double)
#undef DKSAN_INSTANTIATE

}  // namespace dksan
