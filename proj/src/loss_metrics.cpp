// Copyright 2026 the dksan authors
// SPDX-License-Identifier: Apache-2.0

#include "dksan/loss_metrics.hpp"

#include <cmath>

#include "dksan/op_registry.hpp"

namespace dksan {

template <typename T>
T charbonnier(const Tensor<T>& pred, const Tensor<T>& target, T xi) {
  ensure_same_shape(pred, target, "charbonnier");
  const int64_t n = pred.numel();
  if (n == 0) throw contract_error("charbonnier: empty tensors");
  T acc(0);
  for (int64_t i = 0; i < n; ++i) {
    const T d = pred[i] - target[i];
    acc += std::sqrt(d * d + xi * xi);
  }
  return acc / static_cast<T>(n);
}

template <typename T>
Var charbonnier_loss(Tape<T>& tp, Var pred, const Tensor<T>& target, T xi) {
  const Tensor<T>& pv = tp.value(pred);
  Tensor<T> loss(Shape{1, 1, 1, 1});
  loss[0] = charbonnier(pv, target, xi);
  ensure_finite(loss, "charbonnier");
  Var o = tp.push(std::move(loss));
  Tensor<T> target_saved = target;
  tp.record([&tp, pred, o, xi, target_saved = std::move(target_saved)] {
    const T g = tp.grad(o)[0];
    const Tensor<T>& pv = tp.value(pred);
    Tensor<T>& gp = tp.grad(pred);
    const T inv_n = T(1) / static_cast<T>(pv.numel());
    for (int64_t i = 0; i < pv.numel(); ++i) {
      const T d = pv[i] - target_saved[i];
      gp[i] += g * inv_n * d / std::sqrt(d * d + xi * xi);
    }
  });
  return o;
}

template <typename T>
double psnr(const Tensor<T>& pred, const Tensor<T>& target, double peak) {
  ensure_same_shape(pred, target, "psnr");
  const int64_t n = pred.numel();
  if (n == 0) throw contract_error("psnr: empty tensors");
  double mse = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    mse += d * d;
  }
  mse /= static_cast<double>(n);
  if (mse == 0.0) return kPsnrCap;
  const double v = 10.0 * std::log10(peak * peak / mse);
  return v > kPsnrCap ? kPsnrCap : v;
}

DKSAN_REGISTER_OP(charbonnier);

template float charbonnier<float>(const Tensor<float>&, const Tensor<float>&, float);
template double charbonnier<double>(const Tensor<double>&, const Tensor<double>&, double);
template Var charbonnier_loss<float>(Tape<float>&, Var, const Tensor<float>&, float);
template Var charbonnier_loss<double>(Tape<double>&, Var, const Tensor<double>&, double);
template double psnr<float>(const Tensor<float>&, const Tensor<float>&, double);
template double psnr<double>(const Tensor<double>&, const Tensor<double>&, double);

}  // namespace dksan
