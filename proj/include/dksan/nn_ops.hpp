// Copyright 2026 the dksan authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "dksan/autodiff.hpp"
#include "dksan/tensor.hpp"

namespace dksan {

namespace gradcheck_hooks {
/// When tracking is on, leaky_relu records the smallest |pre-activation| it
/// saw. The gradcheck builders use this to pick inputs whose finite-difference
/// neighborhood does not straddle the activation kink.
extern thread_local bool track_preacts;
extern thread_local double min_abs_preact;
inline void reset() { min_abs_preact = 1e300; }
}  // namespace gradcheck_hooks

template <typename T>
Var leaky_relu(Tape<T>& tp, Var x, T slope = T(0.1));

template <typename T>
Var sigmoid(Tape<T>& tp, Var x);

/// Per-channel spatial mean, (n,c,h,w) -> (n,c,1,1).
template <typename T>
Var global_avg_pool(Tape<T>& tp, Var x);

/// Channel-to-space rearrangement, (n, c*r^2, h, w) -> (n, c, r*h, r*w):
/// out(n,c,y,x) = in(n, c*r^2 + (y%r)*r + (x%r), y/r, x/r).
template <typename T>
Var pixel_shuffle(Tape<T>& tp, Var x, int r);

/// Exact inverse rearrangement (plain tensor function; test oracle and
/// building block, not a tape op).
template <typename T>
Tensor<T> pixel_unshuffle(const Tensor<T>& x, int r);

/// Cubic-convolution resize to an arbitrary target size. Kernel a = -0.5,
/// edge-clamped taps, align-corners=false pixel-center mapping
/// src = (dst + 0.5) * in/out - 0.5. Used directly by the data pipeline.
template <typename T>
Tensor<T> bicubic_resize(const Tensor<T>& x, int out_h, int out_w);

/// Differentiable 2x upscale (the cascade's skip connections).
template <typename T>
Var bicubic_up2(Tape<T>& tp, Var x);

/// Concatenate along channels; inputs must agree on (n,h,w).
template <typename T>
Var concat_channels(Tape<T>& tp, const std::vector<Var>& xs);

/// View of channels [c0, c1).
template <typename T>
Var slice_channels(Tape<T>& tp, Var x, int c0, int c1);

/// Select batch rows by index (used to unpack per-frame features from the
/// packed (batch*frames) layout).
template <typename T>
Var gather_rows(Tape<T>& tp, Var x, const std::vector<int>& rows);

/// Repeat a single-channel map across `copies` channels.
template <typename T>
Var tile_channels(Tape<T>& tp, Var x, int copies);

/// Per-channel rescale: x (n,c,h,w) * gate (n,c,1,1), broadcast over space.
template <typename T>
Var channel_scale(Tape<T>& tp, Var x, Var gate);

}  // namespace dksan
