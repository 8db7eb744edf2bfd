// Copyright 2026 the dksan authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dksan/autodiff.hpp"
#include "dksan/tensor.hpp"

namespace dksan {

/// Per-pixel Charbonnier penalty: mean over elements of
/// sqrt((pred-target)^2 + xi^2). Smooth everywhere, lower bound xi at zero
/// residual.
template <typename T>
T charbonnier(const Tensor<T>& pred, const Tensor<T>& target, T xi = T(1e-3));

/// Tape variant; target is a constant (no gradient).
template <typename T>
Var charbonnier_loss(Tape<T>& tp, Var pred, const Tensor<T>& target, T xi = T(1e-3));

/// 10*log10(peak^2 / MSE) over all channels; 99 dB report cap (zero MSE
/// returns the cap).
template <typename T>
double psnr(const Tensor<T>& pred, const Tensor<T>& target, double peak = 1.0);

constexpr double kPsnrCap = 99.0;

}  // namespace dksan
