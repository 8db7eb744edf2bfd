// Copyright 2026 the dksan authors
// SPDX-License-Identifier: Apache-2.0

#include "dksan/conv2d.hpp"

#include <algorithm>

#include "dksan/op_registry.hpp"
#include "dksan/threading.hpp"

namespace dksan {

Conv2dSpec Conv2dSpec::same(int in_c, int out_c, int k, bool with_bias) {
  Conv2dSpec s;
  s.in_channels = in_c;
  s.out_channels = out_c;
  s.kh = k;
  s.kw = k;
  s.stride = 1;
  s.pad = k / 2;
  s.bias = with_bias;
  s.validate();
  return s;
}

void Conv2dSpec::validate() const {
  if (in_channels < 1 || out_channels < 1)
    throw contract_error("Conv2dSpec: channels must be >= 1");
  if (kh != kw || kh < 1 || kh % 2 == 0)
    throw contract_error("Conv2dSpec: kernel must be square and odd, got " +
                         std::to_string(kh) + "x" + std::to_string(kw));
  if (stride != 1) throw contract_error("Conv2dSpec: only stride 1 is supported");
  if (pad != kh / 2)
    throw contract_error("Conv2dSpec: pad must be kernel/2 (same-size convolution)");
}

namespace {

template <typename T>
void check_conv_args(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* b,
                     const Conv2dSpec& spec) {
  spec.validate();
  if (x.c() != spec.in_channels)
    throw contract_error("conv2d: input has " + std::to_string(x.c()) +
                         " channels, spec expects " + std::to_string(spec.in_channels));
  Shape ws{spec.out_channels, spec.in_channels, spec.kh, spec.kw};
  if (w.shape() != ws)
    throw contract_error("conv2d: weight shape " + w.shape().str() + " vs spec " +
                         ws.str());
  if (b && b->numel() != spec.out_channels)
    throw contract_error("conv2d: bias numel " + std::to_string(b->numel()) +
                         " vs out_channels " + std::to_string(spec.out_channels));
}

}  // namespace

namespace ref {

template <typename T>
void conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* b,
                    const Conv2dSpec& spec, Tensor<T>& out) {
  check_conv_args(x, w, b, spec);
  const int B = x.n(), IC = x.c(), H = x.h(), W = x.w();
  const int OC = spec.out_channels, KH = spec.kh, KW = spec.kw, P = spec.pad;
  out = Tensor<T>(Shape{B, OC, H, W});
  for (int bi = 0; bi < B; ++bi)
    for (int oc = 0; oc < OC; ++oc)
      for (int y = 0; y < H; ++y)
        for (int xx = 0; xx < W; ++xx) {
          T acc = b ? (*b)[oc] : T(0);
          for (int ic = 0; ic < IC; ++ic)
            for (int ky = 0; ky < KH; ++ky)
              for (int kx = 0; kx < KW; ++kx) {
                const int yy = y + ky - P;
                const int xs = xx + kx - P;
                if (yy < 0 || yy >= H || xs < 0 || xs >= W) continue;
                acc += w.at(oc, ic, ky, kx) * x.at(bi, ic, yy, xs);
              }
          out.at(bi, oc, y, xx) = acc;
        }
}

}  // namespace ref

namespace kern {

template <typename T>
void conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* b,
                    const Conv2dSpec& spec, Tensor<T>& out) {
  check_conv_args(x, w, b, spec);
  const int B = x.n(), IC = x.c(), H = x.h(), W = x.w();
  const int OC = spec.out_channels, KH = spec.kh, KW = spec.kw, P = spec.pad;
  out = Tensor<T>(Shape{B, OC, H, W});
  const int64_t plane = static_cast<int64_t>(H) * W;
#pragma omp parallel for collapse(2) num_threads(num_threads())
  for (int bi = 0; bi < B; ++bi)
    for (int oc = 0; oc < OC; ++oc) {
      T* op = out.plane(bi, oc);
      const T bv = b ? (*b)[oc] : T(0);
      for (int64_t i = 0; i < plane; ++i) op[i] = bv;
      for (int ic = 0; ic < IC; ++ic) {
        const T* xp = x.plane(bi, ic);
        for (int ky = 0; ky < KH; ++ky)
          for (int kx = 0; kx < KW; ++kx) {
            const T wv = w.at(oc, ic, ky, kx);
            const int dy = ky - P, dx = kx - P;
            const int y0 = std::max(0, -dy), y1 = std::min(H, H - dy);
            const int x0 = std::max(0, -dx), x1 = std::min(W, W - dx);
            for (int y = y0; y < y1; ++y) {
              T* orow = op + static_cast<int64_t>(y) * W;
              const T* xrow = xp + static_cast<int64_t>(y + dy) * W + dx;
              for (int xi = x0; xi < x1; ++xi) orow[xi] += wv * xrow[xi];
            }
          }
      }
    }
}

template <typename T>
void conv2d_backward_input(const Tensor<T>& gout, const Tensor<T>& w,
                           const Conv2dSpec& spec, Tensor<T>& gx) {
  const int B = gx.n(), IC = gx.c(), H = gx.h(), W = gx.w();
  const int OC = spec.out_channels, KH = spec.kh, KW = spec.kw, P = spec.pad;
#pragma omp parallel for collapse(2) num_threads(num_threads())
  for (int bi = 0; bi < B; ++bi)
    for (int ic = 0; ic < IC; ++ic) {
      T* gp = gx.plane(bi, ic);
      for (int oc = 0; oc < OC; ++oc) {
        const T* gop = gout.plane(bi, oc);
        for (int ky = 0; ky < KH; ++ky)
          for (int kx = 0; kx < KW; ++kx) {
            const T wv = w.at(oc, ic, ky, kx);
            const int dy = ky - P, dx = kx - P;
            const int y0 = std::max(0, dy), y1 = std::min(H, H + dy);
            const int x0 = std::max(0, dx), x1 = std::min(W, W + dx);
            for (int y = y0; y < y1; ++y) {
              T* grow = gp + static_cast<int64_t>(y) * W;
              const T* gorow = gop + static_cast<int64_t>(y - dy) * W - dx;
              for (int xi = x0; xi < x1; ++xi) grow[xi] += wv * gorow[xi];
            }
          }
      }
    }
}

template <typename T>
T dot_lanes(const T* a, const T* b, int n) {
  T l0(0), l1(0), l2(0), l3(0), l4(0), l5(0), l6(0), l7(0);
  int i = 0;
  for (; i + 8 <= n; i += 8) {
    l0 += a[i] * b[i];
    l1 += a[i + 1] * b[i + 1];
    l2 += a[i + 2] * b[i + 2];
    l3 += a[i + 3] * b[i + 3];
    l4 += a[i + 4] * b[i + 4];
    l5 += a[i + 5] * b[i + 5];
    l6 += a[i + 6] * b[i + 6];
    l7 += a[i + 7] * b[i + 7];
  }
  for (; i < n; ++i) l0 += a[i] * b[i];
  return ((l0 + l1) + (l2 + l3)) + ((l4 + l5) + (l6 + l7));
}

template <typename T>
void conv2d_backward_weight(const Tensor<T>& gout, const Tensor<T>& x,
                            const Conv2dSpec& spec, Tensor<T>& gw) {
  const int B = x.n(), IC = x.c(), H = x.h(), W = x.w();
  const int OC = spec.out_channels, KH = spec.kh, KW = spec.kw, P = spec.pad;
#pragma omp parallel for num_threads(num_threads())
  for (int oc = 0; oc < OC; ++oc)
    for (int ic = 0; ic < IC; ++ic)
      for (int ky = 0; ky < KH; ++ky)
        for (int kx = 0; kx < KW; ++kx) {
          const int dy = ky - P, dx = kx - P;
          const int y0 = std::max(0, -dy), y1 = std::min(H, H - dy);
          const int x0 = std::max(0, -dx), x1 = std::min(W, W - dx);
          T acc(0);
          for (int bi = 0; bi < B; ++bi) {
            const T* gop = gout.plane(bi, oc);
            const T* xp = x.plane(bi, ic);
            for (int y = y0; y < y1; ++y) {
              const T* gorow = gop + static_cast<int64_t>(y) * W + x0;
              const T* xrow = xp + static_cast<int64_t>(y + dy) * W + dx + x0;
              acc += dot_lanes(gorow, xrow, x1 - x0);
            }
          }
          gw.at(oc, ic, ky, kx) += acc;
        }
}

template <typename T>
void conv2d_backward_bias(const Tensor<T>& gout, Tensor<T>& gb) {
  const int B = gout.n(), OC = gout.c();
  const int64_t plane = static_cast<int64_t>(gout.h()) * gout.w();
#pragma omp parallel for num_threads(num_threads())
  for (int oc = 0; oc < OC; ++oc) {
    T acc(0);
    for (int bi = 0; bi < B; ++bi) {
      const T* gop = gout.plane(bi, oc);
      for (int64_t i = 0; i < plane; ++i) acc += gop[i];
    }
    gb[oc] += acc;
  }
}

}  // namespace kern

template <typename T>
Var conv2d(Tape<T>& tp, Var x, Parameter<T>& w, Parameter<T>* bias,
           const Conv2dSpec& spec) {
  Tensor<T> out;
  kern::conv2d_forward(tp.value(x), w.value, bias ? &bias->value : nullptr, spec, out);
  ensure_finite(out, "conv2d");
  Var o = tp.push(std::move(out));
  tp.record([&tp, x, o, &w, bias, spec] {
    const Tensor<T>& g = tp.grad(o);
    kern::conv2d_backward_input(g, w.value, spec, tp.grad(x));
    kern::conv2d_backward_weight(g, tp.value(x), spec, w.grad);
    if (bias) kern::conv2d_backward_bias(g, bias->grad);
  });
  return o;
}

template <typename T>
void Conv2dLayer<T>::init(const Conv2dSpec& s, const std::string& name, Rng& rng) {
  spec = s;
  const int fan_in = s.in_channels * s.kh * s.kw;
  weight = Parameter<T>(name + ".weight",
                        kaiming_uniform<T>(
                            Shape{s.out_channels, s.in_channels, s.kh, s.kw}, fan_in, rng));
  if (s.bias)
    bias = Parameter<T>(name + ".bias", Tensor<T>(Shape{1, s.out_channels, 1, 1}));
}

template <typename T>
void Conv2dLayer<T>::init_zero(const Conv2dSpec& s, const std::string& name) {
  spec = s;
  weight = Parameter<T>(name + ".weight",
                        Tensor<T>(Shape{s.out_channels, s.in_channels, s.kh, s.kw}));
  if (s.bias)
    bias = Parameter<T>(name + ".bias", Tensor<T>(Shape{1, s.out_channels, 1, 1}));
}

template <typename T>
Var Conv2dLayer<T>::forward(Tape<T>& tp, Var x) {
  return conv2d(tp, x, weight, spec.bias ? &bias : nullptr, spec);
}

template <typename T>
void Conv2dLayer<T>::collect(std::vector<Parameter<T>*>& out) {
  out.push_back(&weight);
  if (spec.bias) out.push_back(&bias);
}

DKSAN_REGISTER_OP(conv2d);

#define DKSAN_INSTANTIATE(T)                                                          \
  template T kern::dot_lanes<T>(const T*, const T*, int);                             \
  template void ref::conv2d_forward<T>(const Tensor<T>&, const Tensor<T>&,           \
                                       const Tensor<T>*, const Conv2dSpec&,          \
                                       Tensor<T>&);                                  \
  template void kern::conv2d_forward<T>(const Tensor<T>&, const Tensor<T>&,          \
                                        const Tensor<T>*, const Conv2dSpec&,         \
                                        Tensor<T>&);                                 \
  template void kern::conv2d_backward_input<T>(const Tensor<T>&, const Tensor<T>&,   \
                                               const Conv2dSpec&, Tensor<T>&);       \
  template void kern::conv2d_backward_weight<T>(const Tensor<T>&, const Tensor<T>&,  \
                                                const Conv2dSpec&, Tensor<T>&);      \
  template void kern::conv2d_backward_bias<T>(const Tensor<T>&, Tensor<T>&);         \
  template Var conv2d<T>(Tape<T>&, Var, Parameter<T>&, Parameter<T>*,                \
                         const Conv2dSpec&);                                         \
  template struct Conv2dLayer<T>;

DKSAN_INSTANTIATE(float)
DKSAN_INSTANTIATE(double)
#undef DKSAN_INSTANTIATE

}  // namespace dksan
