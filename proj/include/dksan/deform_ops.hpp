// Copyright 2026 the dksan authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dksan/autodiff.hpp"
#include "dksan/conv2d.hpp"
#include "dksan/tensor.hpp"

namespace dksan {

/// Bilinear read of plane (n,c) at fractional position (py, px).
/// Zero padding: positions outside (-1, H) x (-1, W) contribute 0;
/// partially outside positions blend with zero-valued phantom neighbors.
template <typename T>
T bilinear_sample(const Tensor<T>& x, double py, double px, int n, int c);

/// Differentiable point sampling: coords (m, 2, p, 1) holds (y, x) pairs per
/// batch row; returns (m, c, p, 1) samples of img. Gradients flow to both
/// the image and the coordinates.
template <typename T>
Var bilinear_sample_points(Tape<T>& tp, Var img, Var coords);

namespace ref {
/// Direct-loop serial reference for the modulated deformable convolution.
template <typename T>
void deformable_conv2d_forward(const Tensor<T>& x, const Tensor<T>& w,
                               const Tensor<T>& offsets, const Tensor<T>& mask,
                               const Conv2dSpec& spec, Tensor<T>& out);
}  // namespace ref

/// Modulated deformable convolution:
///   out(p) = sum_k w_k * x(p + p_k + dp_k(p)) * m_k(p)
/// offsets: (n, 2K, h, w) channel-paired (dy_1, dx_1, ..., dy_K, dx_K);
/// mask: (n, K, h, w). Backward reaches x, w, offsets and mask. Bias-free.
template <typename T>
Var deformable_conv2d(Tape<T>& tp, Var x, Parameter<T>& w, Var offsets, Var mask,
                      const Conv2dSpec& spec);

/// Deformable-kernel convolution: each of the K taps reads its weight from a
/// larger scope x scope grid at (tap base + dk), bilinearly, with the sample
/// position clamped into the grid. dk is a learned per-tap offset shared by
/// all channels, shape (1,1,1,2K) paired (dy_1, dx_1, ...). Gradients reach
/// x, the scope kernel and dk (zero where the clamp saturates).
template <typename T>
Var deformable_kernel_conv2d(Tape<T>& tp, Var x, Parameter<T>& scope_w,
                             Parameter<T>& kernel_offset, Parameter<T>* bias,
                             const Conv2dSpec& spec, int scope);

/// Resampled effective kernel (exposed for tests): (oc, ic, kh, kw).
template <typename T>
Tensor<T> resample_scope_kernel(const Tensor<T>& scope_w, const Tensor<T>& kernel_offset,
                                const Conv2dSpec& spec, int scope);

template <typename T>
struct DeformKernelConv2dLayer {
  Conv2dSpec spec;
  int scope = 5;
  Parameter<T> scope_weight;   // (oc, ic, S, S)
  Parameter<T> kernel_offset;  // (1,1,1,2K)
  Parameter<T> bias;           // (1,oc,1,1) when spec.bias

  void init(const Conv2dSpec& s, int scope_size, const std::string& name, Rng& rng);
  void init_zero(const Conv2dSpec& s, int scope_size, const std::string& name);
  Var forward(Tape<T>& tp, Var x);
  void collect(std::vector<Parameter<T>*>& out);
};

/// Offset/mask head: a stack of deformable-kernel layers with leaky_relu,
/// then one plain conv emitting 3K channels split as 2K offsets and K
/// pre-sigmoid mask logits. The head conv is zero-initialized so training
/// starts from dp = 0, m = 0.5.
template <typename T>
struct OffsetPredictor {
  std::vector<DeformKernelConv2dLayer<T>> dk;
  Conv2dLayer<T> head;
  int taps = 9;

  void init(int channels, int conv_taps, int depth, int scope_size,
            const std::string& name, Rng& rng);
  /// fused -> (offsets, mask)
  std::pair<Var, Var> forward(Tape<T>& tp, Var fused);
  void collect(std::vector<Parameter<T>*>& out);
};

}  // namespace dksan
