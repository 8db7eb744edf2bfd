// Copyright 2026 the dksan authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "dksan/conv2d.hpp"
#include "dksan/deform_ops.hpp"

namespace dksan {

/// x + conv2(leaky_relu(conv1(x))), no normalization layers.
template <typename T>
struct ResBlock {
  Conv2dLayer<T> conv1, conv2;

  void init(int channels, const std::string& name, Rng& rng);
  Var forward(Tape<T>& tp, Var x);
  void collect(std::vector<Parameter<T>*>& out);
};

/// Residual channel attention block:
/// x + gate(body(x)) * body(x), body = conv -> leaky_relu -> conv,
/// gate = sigmoid(up(leaky_relu(down(global_avg_pool(body))))).
/// Reduction ratio is min(16, channels); channels must divide by it.
/// With use_channel_attention=false this degrades to a plain ResBlock
/// (the Table-3 backbone configuration).
template <typename T>
struct RCAB {
  Conv2dLayer<T> conv1, conv2;
  Conv2dLayer<T> ca_down, ca_up;
  bool use_channel_attention = true;

  static int reduction_ratio(int channels) { return channels < 16 ? channels : 16; }
  void init(int channels, bool with_ca, const std::string& name, Rng& rng);
  Var forward(Tape<T>& tp, Var x);
  void collect(std::vector<Parameter<T>*>& out);
};

/// Deformable-kernel spatial attention. Full variant:
///   A = sigmoid(DKC(lrelu(DKC(lrelu(conv(x)))))), out = x * A.
/// Light variant (level-1): single DKC, no pre-conv.
/// The attention map has C channels by default; `single_map` switches to a
/// one-channel map broadcast across channels.
template <typename T>
struct DKSA {
  Conv2dLayer<T> pre;
  std::vector<DeformKernelConv2dLayer<T>> dkc;
  bool light = false;
  bool single_map = false;
  int channels = 0;

  void init(int channels, bool light_variant, bool single_map_variant, int scope,
            const std::string& name, Rng& rng);
  /// The sigmoid gate, shaped (n, C or 1, h, w).
  Var attention(Tape<T>& tp, Var x);
  /// x * gate; exposed separately so the gating contract is testable.
  Var apply_gate(Tape<T>& tp, Var x, Var gate);
  Var forward(Tape<T>& tp, Var x);
  void collect(std::vector<Parameter<T>*>& out);
  size_t param_count() const;
};

}  // namespace dksan
