// Copyright 2026 the dksan authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "dksan/autodiff.hpp"
#include "dksan/tensor.hpp"

namespace dksan {

/// Same-size 2-D convolution spec: odd kernel, stride 1, zero padding k/2.
struct Conv2dSpec {
  int in_channels = 0;
  int out_channels = 0;
  int kh = 3, kw = 3;
  int stride = 1;
  int pad = 1;
  bool bias = true;

  static Conv2dSpec same(int in_c, int out_c, int k, bool with_bias = true);
  int taps() const { return kh * kw; }
  void validate() const;
};

namespace ref {
/// Direct-loop serial reference. Per output element the accumulation order
/// is (ic, ky, kx) ascending; the OpenMP kernel matches it bit-exactly.
template <typename T>
void conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* b,
                    const Conv2dSpec& spec, Tensor<T>& out);
}  // namespace ref

namespace kern {
/// Eight-lane dot product with a fixed lane partition (reproducible and
/// pipeline-friendly). Shared by the backward kernels.
template <typename T>
T dot_lanes(const T* a, const T* b, int n);

template <typename T>
void conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* b,
                    const Conv2dSpec& spec, Tensor<T>& out);

/// grad_x += correlation of grad_out with the transposed kernel (gather form,
/// parallel over input planes, no cross-thread accumulation).
template <typename T>
void conv2d_backward_input(const Tensor<T>& gout, const Tensor<T>& w,
                           const Conv2dSpec& spec, Tensor<T>& gx);

template <typename T>
void conv2d_backward_weight(const Tensor<T>& gout, const Tensor<T>& x,
                            const Conv2dSpec& spec, Tensor<T>& gw);

template <typename T>
void conv2d_backward_bias(const Tensor<T>& gout, Tensor<T>& gb);
}  // namespace kern

/// Tape op. `bias` may be null for bias-free convolutions.
template <typename T>
Var conv2d(Tape<T>& tp, Var x, Parameter<T>& w, Parameter<T>* bias,
           const Conv2dSpec& spec);

/// Convolution layer owning its parameters.
template <typename T>
struct Conv2dLayer {
  Conv2dSpec spec;
  Parameter<T> weight;
  Parameter<T> bias;

  void init(const Conv2dSpec& s, const std::string& name, Rng& rng);
  /// All-zero weights and bias (offset-predictor heads).
  void init_zero(const Conv2dSpec& s, const std::string& name);
  Var forward(Tape<T>& tp, Var x);
  void collect(std::vector<Parameter<T>*>& out);
};

}  // namespace dksan
