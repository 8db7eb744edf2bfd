// Copyright 2026 the dksan authors
// SPDX-License-Identifier: Apache-2.0

#include "dksan/deform_ops.hpp"

#include <cmath>
#include <cstdio>

#include "dksan/nn_ops.hpp"
#include "dksan/op_registry.hpp"
#include "dksan/threading.hpp"

namespace dksan {

namespace {

// Shared by the serial reference and the OpenMP kernels so the two paths
// agree bit-exactly. Zero padding: support is (-1,H) x (-1,W), phantom
// neighbors outside the grid read as 0.
template <typename T>
inline T bilinear_at(const T* p, int H, int W, T py, T px) {
  if (py <= T(-1) || py >= T(H) || px <= T(-1) || px >= T(W)) return T(0);
  const int y0 = static_cast<int>(std::floor(py));
  const int x0 = static_cast<int>(std::floor(px));
  const int y1 = y0 + 1, x1 = x0 + 1;
  const T ly = py - static_cast<T>(y0), lx = px - static_cast<T>(x0);
  const T hy = T(1) - ly, hx = T(1) - lx;
  const bool vy0 = y0 >= 0, vy1 = y1 <= H - 1;
  const bool vx0 = x0 >= 0, vx1 = x1 <= W - 1;
  const T v00 = (vy0 && vx0) ? p[static_cast<int64_t>(y0) * W + x0] : T(0);
  const T v01 = (vy0 && vx1) ? p[static_cast<int64_t>(y0) * W + x1] : T(0);
  const T v10 = (vy1 && vx0) ? p[static_cast<int64_t>(y1) * W + x0] : T(0);
  const T v11 = (vy1 && vx1) ? p[static_cast<int64_t>(y1) * W + x1] : T(0);
  return hy * hx * v00 + hy * lx * v01 + ly * hx * v10 + ly * lx * v11;
}

// d(sample)/d(py) and d(sample)/d(px) at the same point.
template <typename T>
inline void bilinear_coord_grad(const T* p, int H, int W, T py, T px, T& dy, T& dx) {
  dy = T(0);
  dx = T(0);
  if (py <= T(-1) || py >= T(H) || px <= T(-1) || px >= T(W)) return;
  const int y0 = static_cast<int>(std::floor(py));
  const int x0 = static_cast<int>(std::floor(px));
  const int y1 = y0 + 1, x1 = x0 + 1;
  const T ly = py - static_cast<T>(y0), lx = px - static_cast<T>(x0);
  const T hy = T(1) - ly, hx = T(1) - lx;
  const bool vy0 = y0 >= 0, vy1 = y1 <= H - 1;
  const bool vx0 = x0 >= 0, vx1 = x1 <= W - 1;
  const T v00 = (vy0 && vx0) ? p[static_cast<int64_t>(y0) * W + x0] : T(0);
  const T v01 = (vy0 && vx1) ? p[static_cast<int64_t>(y0) * W + x1] : T(0);
  const T v10 = (vy1 && vx0) ? p[static_cast<int64_t>(y1) * W + x0] : T(0);
  const T v11 = (vy1 && vx1) ? p[static_cast<int64_t>(y1) * W + x1] : T(0);
  dy = hx * (v10 - v00) + lx * (v11 - v01);
  dx = hy * (v01 - v00) + ly * (v11 - v10);
}

// scatter g into the up-to-4 valid neighbors of (py, px)
template <typename T>
inline void bilinear_scatter(T* p, int H, int W, T py, T px, T g) {
  if (py <= T(-1) || py >= T(H) || px <= T(-1) || px >= T(W)) return;
  const int y0 = static_cast<int>(std::floor(py));
  const int x0 = static_cast<int>(std::floor(px));
  const int y1 = y0 + 1, x1 = x0 + 1;
  const T ly = py - static_cast<T>(y0), lx = px - static_cast<T>(x0);
  const T hy = T(1) - ly, hx = T(1) - lx;
  if (y0 >= 0 && x0 >= 0) p[static_cast<int64_t>(y0) * W + x0] += hy * hx * g;
  if (y0 >= 0 && x1 <= W - 1) p[static_cast<int64_t>(y0) * W + x1] += hy * lx * g;
  if (y1 <= H - 1 && x0 >= 0) p[static_cast<int64_t>(y1) * W + x0] += ly * hx * g;
  if (y1 <= H - 1 && x1 <= W - 1) p[static_cast<int64_t>(y1) * W + x1] += ly * lx * g;
}

template <typename T>
void check_deform_args(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& off,
                       const Tensor<T>& mask, const Conv2dSpec& spec) {
  spec.validate();
  const int K = spec.taps();
  if (x.c() != spec.in_channels)
    throw contract_error("deformable_conv2d: input channels " + std::to_string(x.c()) +
                         " vs spec " + std::to_string(spec.in_channels));
  Shape ws{spec.out_channels, spec.in_channels, spec.kh, spec.kw};
  if (w.shape() != ws)
    throw contract_error("deformable_conv2d: weight shape " + w.shape().str() +
                         " vs spec " + ws.str());
  if (off.n() != x.n() || off.c() != 2 * K || off.h() != x.h() || off.w() != x.w())
    throw contract_error("deformable_conv2d: offsets shape " + off.shape().str() +
                         " does not pair with input " + x.shape().str() + " and K=" +
                         std::to_string(K));
  if (mask.n() != x.n() || mask.c() != K || mask.h() != x.h() || mask.w() != x.w())
    throw contract_error("deformable_conv2d: mask shape " + mask.shape().str() +
                         " does not pair with input " + x.shape().str() + " and K=" +
                         std::to_string(K));
}

// masked sample columns: cols(b, ic*K+k, y, x) = sample * mask
template <typename T>
void build_cols(const Tensor<T>& x, const Tensor<T>& off, const Tensor<T>& mask,
                const Conv2dSpec& spec, bool apply_mask, Tensor<T>& cols) {
  const int B = x.n(), IC = x.c(), H = x.h(), W = x.w();
  const int KH = spec.kh, KW = spec.kw, K = KH * KW, P = spec.pad;
  cols = Tensor<T>(Shape{B, IC * K, H, W});
#pragma omp parallel for collapse(2) num_threads(num_threads())
  for (int b = 0; b < B; ++b)
    for (int ick = 0; ick < IC * K; ++ick) {
      const int ic = ick / K, k = ick % K;
      const int ky = k / KW, kx = k % KW;
      const T* xp = x.plane(b, ic);
      const T* oy = off.plane(b, 2 * k);
      const T* ox = off.plane(b, 2 * k + 1);
      const T* mp = mask.plane(b, k);
      T* cp = cols.plane(b, ick);
      for (int y = 0; y < H; ++y)
        for (int xx = 0; xx < W; ++xx) {
          const int64_t i = static_cast<int64_t>(y) * W + xx;
          const T py = static_cast<T>(y - P + ky) + oy[i];
          const T px = static_cast<T>(xx - P + kx) + ox[i];
          const T s = bilinear_at(xp, H, W, py, px);
          cp[i] = apply_mask ? s * mp[i] : s;
        }
    }
}

// out(b,oc,.) = sum_ick w'(oc,ick) * cols(b,ick,.)
template <typename T>
void contract_cols(const Tensor<T>& cols, const Tensor<T>& w, const Conv2dSpec& spec,
                   Tensor<T>& out) {
  const int B = cols.n(), ICK = cols.c(), OC = spec.out_channels;
  const int H = cols.h(), W = cols.w();
  const int64_t plane = static_cast<int64_t>(H) * W;
  out = Tensor<T>(Shape{B, OC, H, W});
#pragma omp parallel for collapse(2) num_threads(num_threads())
  for (int b = 0; b < B; ++b)
    for (int oc = 0; oc < OC; ++oc) {
      T* op = out.plane(b, oc);
      const T* wrow = w.data() + static_cast<int64_t>(oc) * ICK;
      for (int ick = 0; ick < ICK; ++ick) {
        const T wv = wrow[ick];
        const T* cp = cols.plane(b, ick);
        for (int64_t i = 0; i < plane; ++i) op[i] += wv * cp[i];
      }
    }
}

}  // namespace

template <typename T>
T bilinear_sample(const Tensor<T>& x, double py, double px, int n, int c) {
  return bilinear_at(x.plane(n, c), x.h(), x.w(), static_cast<T>(py),
                     static_cast<T>(px));
}

template <typename T>
Var bilinear_sample_points(Tape<T>& tp, Var img, Var coords) {
  const Tensor<T>& iv = tp.value(img);
  const Tensor<T>& cv = tp.value(coords);
  if (cv.n() != iv.n() || cv.c() != 2 || cv.w() != 1)
    throw contract_error("bilinear_sample_points: coords must be (n,2,p,1), got " +
                         cv.shape().str());
  const int P = cv.h(), C = iv.c(), H = iv.h(), W = iv.w();
  Tensor<T> out(Shape{iv.n(), C, P, 1});
  for (int n = 0; n < iv.n(); ++n)
    for (int c = 0; c < C; ++c)
      for (int p = 0; p < P; ++p)
        out.at(n, c, p, 0) = bilinear_at(iv.plane(n, c), H, W, cv.at(n, 0, p, 0),
                                         cv.at(n, 1, p, 0));
  ensure_finite(out, "bilinear_sample_points");
  Var o = tp.push(std::move(out));
  tp.record([&tp, img, coords, o, P, C, H, W] {
    const Tensor<T>& g = tp.grad(o);
    const Tensor<T>& iv = tp.value(img);
    const Tensor<T>& cv = tp.value(coords);
    Tensor<T>& gi = tp.grad(img);
    Tensor<T>& gc = tp.grad(coords);
    for (int n = 0; n < iv.n(); ++n)
      for (int p = 0; p < P; ++p) {
        const T py = cv.at(n, 0, p, 0), px = cv.at(n, 1, p, 0);
        T acc_y(0), acc_x(0);
        for (int c = 0; c < C; ++c) {
          const T gv = g.at(n, c, p, 0);
          bilinear_scatter(gi.plane(n, c), H, W, py, px, gv);
          T dy, dx;
          bilinear_coord_grad(iv.plane(n, c), H, W, py, px, dy, dx);
          acc_y += gv * dy;
          acc_x += gv * dx;
        }
        gc.at(n, 0, p, 0) += acc_y;
        gc.at(n, 1, p, 0) += acc_x;
      }
  });
  return o;
}

namespace ref {

template <typename T>
void deformable_conv2d_forward(const Tensor<T>& x, const Tensor<T>& w,
                               const Tensor<T>& offsets, const Tensor<T>& mask,
                               const Conv2dSpec& spec, Tensor<T>& out) {
  check_deform_args(x, w, offsets, mask, spec);
  const int B = x.n(), IC = x.c(), H = x.h(), W = x.w();
  const int OC = spec.out_channels, KH = spec.kh, KW = spec.kw, P = spec.pad;
  out = Tensor<T>(Shape{B, OC, H, W});
  for (int b = 0; b < B; ++b)
    for (int oc = 0; oc < OC; ++oc)
      for (int y = 0; y < H; ++y)
        for (int xx = 0; xx < W; ++xx) {
          T acc(0);
          for (int ic = 0; ic < IC; ++ic)
            for (int ky = 0; ky < KH; ++ky)
              for (int kx = 0; kx < KW; ++kx) {
                const int k = ky * KW + kx;
                const T py = static_cast<T>(y - P + ky) + offsets.at(b, 2 * k, y, xx);
                const T px = static_cast<T>(xx - P + kx) + offsets.at(b, 2 * k + 1, y, xx);
                const T s = bilinear_at(x.plane(b, ic), H, W, py, px);
                acc += w.at(oc, ic, ky, kx) * (s * mask.at(b, k, y, xx));
              }
          out.at(b, oc, y, xx) = acc;
        }
}

}  // namespace ref

template <typename T>
Var deformable_conv2d(Tape<T>& tp, Var x, Parameter<T>& w, Var offsets, Var mask,
                      const Conv2dSpec& spec) {
  const Tensor<T>& xv = tp.value(x);
  const Tensor<T>& ov = tp.value(offsets);
  const Tensor<T>& mv = tp.value(mask);
  check_deform_args(xv, w.value, ov, mv, spec);

  Tensor<T> cols;
  build_cols(xv, ov, mv, spec, /*apply_mask=*/true, cols);
  Tensor<T> out;
  contract_cols(cols, w.value, spec, out);
  ensure_finite(out, "deformable_conv2d");
  Var o = tp.push(std::move(out));

  tp.record([&tp, x, offsets, mask, o, &w, spec] {
    const Tensor<T>& g = tp.grad(o);
    const Tensor<T>& xv = tp.value(x);
    const Tensor<T>& ov = tp.value(offsets);
    const Tensor<T>& mv = tp.value(mask);
    const int B = xv.n(), IC = xv.c(), H = xv.h(), W = xv.w();
    const int OC = spec.out_channels, KH = spec.kh, KW = spec.kw, K = KH * KW;
    const int P = spec.pad, ICK = IC * K;
    const int64_t plane = static_cast<int64_t>(H) * W;

    // P(b,ick,.) = sum_oc w(oc,ick) * g(b,oc,.)
    Tensor<T> wT_g(Shape{B, ICK, H, W});
#pragma omp parallel for collapse(2) num_threads(num_threads())
    for (int b = 0; b < B; ++b)
      for (int ick = 0; ick < ICK; ++ick) {
        T* pp = wT_g.plane(b, ick);
        for (int oc = 0; oc < OC; ++oc) {
          const T wv = w.value.data()[static_cast<int64_t>(oc) * ICK + ick];
          const T* gp = g.plane(b, oc);
          for (int64_t i = 0; i < plane; ++i) pp[i] += wv * gp[i];
        }
      }

    // raw (unmasked) sample columns, recomputed from saved activations,
    // plus the masked variant for the weight gradient
    Tensor<T> cols_raw;
    build_cols(xv, ov, mv, spec, /*apply_mask=*/false, cols_raw);
    Tensor<T> cols_masked(Shape{B, ICK, xv.h(), xv.w()});
#pragma omp parallel for collapse(2) num_threads(num_threads())
    for (int b = 0; b < B; ++b)
      for (int ick = 0; ick < ICK; ++ick) {
        const T* cp = cols_raw.plane(b, ick);
        const T* mp = mv.plane(b, ick % K);
        T* out = cols_masked.plane(b, ick);
        for (int64_t i = 0; i < plane; ++i) out[i] = cp[i] * mp[i];
      }

#pragma omp parallel for num_threads(num_threads())
    for (int oc = 0; oc < OC; ++oc)
      for (int ick = 0; ick < ICK; ++ick) {
        T acc(0);
        for (int b = 0; b < B; ++b)
          acc += kern::dot_lanes(g.plane(b, oc), cols_masked.plane(b, ick),
                                 static_cast<int>(plane));
        w.grad.data()[static_cast<int64_t>(oc) * ICK + ick] += acc;
      }

    // grad mask and grad offsets
    Tensor<T>& gm = tp.grad(mask);
    Tensor<T>& go = tp.grad(offsets);
#pragma omp parallel for collapse(2) num_threads(num_threads())
    for (int b = 0; b < B; ++b)
      for (int k = 0; k < K; ++k) {
        const int ky = k / KW, kx = k % KW;
        const T* oy = ov.plane(b, 2 * k);
        const T* ox = ov.plane(b, 2 * k + 1);
        const T* mp = mv.plane(b, k);
        T* gmp = gm.plane(b, k);
        T* goy = go.plane(b, 2 * k);
        T* gox = go.plane(b, 2 * k + 1);
        for (int y = 0; y < H; ++y)
          for (int xx = 0; xx < W; ++xx) {
            const int64_t i = static_cast<int64_t>(y) * W + xx;
            const T py = static_cast<T>(y - P + ky) + oy[i];
            const T px = static_cast<T>(xx - P + kx) + ox[i];
            T acc_m(0), acc_y(0), acc_x(0);
            for (int ic = 0; ic < IC; ++ic) {
              const T pv = wT_g.plane(b, ic * K + k)[i];
              acc_m += pv * cols_raw.plane(b, ic * K + k)[i];
              T dy, dx;
              bilinear_coord_grad(xv.plane(b, ic), H, W, py, px, dy, dx);
              acc_y += pv * dy;
              acc_x += pv * dx;
            }
            gmp[i] += acc_m;
            goy[i] += acc_y * mp[i];
            gox[i] += acc_x * mp[i];
          }
      }

    // grad x: bilinear scatter, independent per batch row
    Tensor<T>& gx = tp.grad(x);
#pragma omp parallel for num_threads(num_threads())
    for (int b = 0; b < B; ++b)
      for (int ic = 0; ic < IC; ++ic)
        for (int k = 0; k < K; ++k) {
          const int ky = k / KW, kx = k % KW;
          const T* oy = ov.plane(b, 2 * k);
          const T* ox = ov.plane(b, 2 * k + 1);
          const T* mp = mv.plane(b, k);
          const T* pp = wT_g.plane(b, ic * K + k);
          T* gxp = gx.plane(b, ic);
          for (int y = 0; y < H; ++y)
            for (int xx = 0; xx < W; ++xx) {
              const int64_t i = static_cast<int64_t>(y) * W + xx;
              const T py = static_cast<T>(y - P + ky) + oy[i];
              const T px = static_cast<T>(xx - P + kx) + ox[i];
              bilinear_scatter(gxp, H, W, py, px, pp[i] * mp[i]);
            }
        }
  });
  return o;
}

// ---- deformable kernel convolution ----

namespace {

inline void check_scope(const Conv2dSpec& spec, int scope) {
  if (scope < spec.kh || (scope - spec.kh) % 2 != 0)
    throw contract_error("deformable_kernel_conv2d: scope " + std::to_string(scope) +
                         " must be >= kernel " + std::to_string(spec.kh) +
                         " with even margin");
}

}  // namespace

template <typename T>
Tensor<T> resample_scope_kernel(const Tensor<T>& scope_w, const Tensor<T>& kernel_offset,
                                const Conv2dSpec& spec, int scope) {
  check_scope(spec, scope);
  const int OC = spec.out_channels, IC = spec.in_channels;
  const int KH = spec.kh, KW = spec.kw, K = KH * KW, S = scope;
  if (scope_w.shape() != Shape{OC, IC, S, S})
    throw contract_error("deformable_kernel_conv2d: scope kernel shape " +
                         scope_w.shape().str());
  if (kernel_offset.numel() != 2 * K)
    throw contract_error("deformable_kernel_conv2d: kernel offset needs 2K values");
  const int margin = (S - KH) / 2;
  Tensor<T> eff(Shape{OC, IC, KH, KW});
  for (int k = 0; k < K; ++k) {
    const int ky = k / KW, kx = k % KW;
    T qy = static_cast<T>(ky + margin) + kernel_offset[2 * k];
    T qx = static_cast<T>(kx + margin) + kernel_offset[2 * k + 1];
    // taps stay inside the scope grid
    qy = std::min(std::max(qy, T(0)), static_cast<T>(S - 1));
    qx = std::min(std::max(qx, T(0)), static_cast<T>(S - 1));
    for (int oc = 0; oc < OC; ++oc)
      for (int ic = 0; ic < IC; ++ic)
        eff.at(oc, ic, ky, kx) = bilinear_at(scope_w.plane(oc, ic), S, S, qy, qx);
  }
  return eff;
}

template <typename T>
Var deformable_kernel_conv2d(Tape<T>& tp, Var x, Parameter<T>& scope_w,
                             Parameter<T>& kernel_offset, Parameter<T>* bias,
                             const Conv2dSpec& spec, int scope) {
  Tensor<T> eff = resample_scope_kernel(scope_w.value, kernel_offset.value, spec, scope);
  Tensor<T> out;
  kern::conv2d_forward(tp.value(x), eff, bias ? &bias->value : nullptr, spec, out);
  ensure_finite(out, "deformable_kernel_conv2d");
  Var o = tp.push(std::move(out));

  tp.record([&tp, x, o, &scope_w, &kernel_offset, bias, spec, scope,
             eff = std::move(eff)] {
    const Tensor<T>& g = tp.grad(o);
    const int OC = spec.out_channels, IC = spec.in_channels;
    const int KH = spec.kh, KW = spec.kw, K = KH * KW, S = scope;
    const int margin = (S - KH) / 2;

    kern::conv2d_backward_input(g, eff, spec, tp.grad(x));
    Tensor<T> g_eff(Shape{OC, IC, KH, KW});
    kern::conv2d_backward_weight(g, tp.value(x), spec, g_eff);
    if (bias) kern::conv2d_backward_bias(g, bias->grad);

    for (int k = 0; k < K; ++k) {
      const int ky = k / KW, kx = k % KW;
      const T qy_raw = static_cast<T>(ky + margin) + kernel_offset.value[2 * k];
      const T qx_raw = static_cast<T>(kx + margin) + kernel_offset.value[2 * k + 1];
      const T qy = std::min(std::max(qy_raw, T(0)), static_cast<T>(S - 1));
      const T qx = std::min(std::max(qx_raw, T(0)), static_cast<T>(S - 1));
      const bool sat_y = qy_raw < T(0) || qy_raw > static_cast<T>(S - 1);
      const bool sat_x = qx_raw < T(0) || qx_raw > static_cast<T>(S - 1);
      T acc_y(0), acc_x(0);
      for (int oc = 0; oc < OC; ++oc)
        for (int ic = 0; ic < IC; ++ic) {
          const T gv = g_eff.at(oc, ic, ky, kx);
          bilinear_scatter(scope_w.grad.plane(oc, ic), S, S, qy, qx, gv);
          T dy, dx;
          bilinear_coord_grad(scope_w.value.plane(oc, ic), S, S, qy, qx, dy, dx);
          acc_y += gv * dy;
          acc_x += gv * dx;
        }
      if (!sat_y) kernel_offset.grad[2 * k] += acc_y;
      if (!sat_x) kernel_offset.grad[2 * k + 1] += acc_x;
    }
  });
  return o;
}

template <typename T>
void DeformKernelConv2dLayer<T>::init(const Conv2dSpec& s, int scope_size,
                                      const std::string& name, Rng& rng) {
  s.validate();
  check_scope(s, scope_size);
  spec = s;
  scope = scope_size;
  const int fan_in = s.in_channels * s.kh * s.kw;  // K effective taps
  scope_weight = Parameter<T>(
      name + ".scope_weight",
      kaiming_uniform<T>(Shape{s.out_channels, s.in_channels, scope, scope}, fan_in, rng));
  kernel_offset =
      Parameter<T>(name + ".kernel_offset", Tensor<T>(Shape{1, 1, 1, 2 * s.taps()}));
  if (s.bias)
    bias = Parameter<T>(name + ".bias", Tensor<T>(Shape{1, s.out_channels, 1, 1}));
}

template <typename T>
void DeformKernelConv2dLayer<T>::init_zero(const Conv2dSpec& s, int scope_size,
                                           const std::string& name) {
  s.validate();
  check_scope(s, scope_size);
  spec = s;
  scope = scope_size;
  scope_weight = Parameter<T>(
      name + ".scope_weight",
      Tensor<T>(Shape{s.out_channels, s.in_channels, scope, scope}));
  kernel_offset =
      Parameter<T>(name + ".kernel_offset", Tensor<T>(Shape{1, 1, 1, 2 * s.taps()}));
  if (s.bias)
    bias = Parameter<T>(name + ".bias", Tensor<T>(Shape{1, s.out_channels, 1, 1}));
}

template <typename T>
Var DeformKernelConv2dLayer<T>::forward(Tape<T>& tp, Var x) {
  return deformable_kernel_conv2d(tp, x, scope_weight, kernel_offset,
                                  spec.bias ? &bias : nullptr, spec, scope);
}

template <typename T>
void DeformKernelConv2dLayer<T>::collect(std::vector<Parameter<T>*>& out) {
  out.push_back(&scope_weight);
  out.push_back(&kernel_offset);
  if (spec.bias) out.push_back(&bias);
}

template <typename T>
void OffsetPredictor<T>::init(int channels, int conv_taps, int depth, int scope_size,
                              const std::string& name, Rng& rng) {
  if (depth < 1) throw contract_error("OffsetPredictor: depth must be >= 1");
  taps = conv_taps;
  dk.resize(depth);
  for (int i = 0; i < depth; ++i) {
    char idx[16];
    std::snprintf(idx, sizeof(idx), "%02d", i);
    dk[i].init(Conv2dSpec::same(channels, channels, 3), scope_size,
               name + ".dk." + idx, rng);
  }
  head.init_zero(Conv2dSpec::same(channels, 3 * taps, 3), name + ".head");
}

template <typename T>
std::pair<Var, Var> OffsetPredictor<T>::forward(Tape<T>& tp, Var fused) {
  Var h = fused;
  for (auto& layer : dk) h = leaky_relu(tp, layer.forward(tp, h), T(0.1));
  Var logits = head.forward(tp, h);
  Var offsets = slice_channels(tp, logits, 0, 2 * taps);
  Var mask = sigmoid(tp, slice_channels(tp, logits, 2 * taps, 3 * taps));
  return {offsets, mask};
}

template <typename T>
void OffsetPredictor<T>::collect(std::vector<Parameter<T>*>& out) {
  for (auto& layer : dk) layer.collect(out);
  head.collect(out);
}

DKSAN_REGISTER_OP(bilinear_sample);
DKSAN_REGISTER_OP(deformable_conv2d);
DKSAN_REGISTER_OP(deformable_kernel_conv2d);
DKSAN_REGISTER_OP(predict_offsets);

#define DKSAN_INSTANTIATE(T)                                                          \
  template T bilinear_sample<T>(const Tensor<T>&, double, double, int, int);          \
  template Var bilinear_sample_points<T>(Tape<T>&, Var, Var);                         \
  template void ref::deformable_conv2d_forward<T>(                                    \
      const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,         \
      const Conv2dSpec&, Tensor<T>&);                                                 \
  template Var deformable_conv2d<T>(Tape<T>&, Var, Parameter<T>&, Var, Var,           \
                                    const Conv2dSpec&);                               \
  template Tensor<T> resample_scope_kernel<T>(const Tensor<T>&, const Tensor<T>&,     \
                                              const Conv2dSpec&, int);                \
  template Var deformable_kernel_conv2d<T>(Tape<T>&, Var, Parameter<T>&,              \
                                           Parameter<T>&, Parameter<T>*,              \
                                           const Conv2dSpec&, int);                   \
  template struct DeformKernelConv2dLayer<T>;                                         \
  template struct OffsetPredictor<T>;

DKSAN_INSTANTIATE(float)
DKSAN_INSTANTIATE(double)
#undef DKSAN_INSTANTIATE

}  // namespace dksan
