// Copyright 2026 the dksan authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "dksan/conv2d.hpp"
#include "dksan/deform_ops.hpp"

namespace dksan {

/// Aligns one neighbor feature to the reference feature:
/// concat [f_n, f_r] -> 1x1 fuse conv -> offset/mask predictor (deformable
/// kernel stack) -> modulated deformable convolution applied to f_n.
/// One instance is shared across all neighbors of a window.
template <typename T>
struct AlignModule {
  Conv2dLayer<T> fuse;        // 2C -> C, 1x1
  OffsetPredictor<T> pred;    // C -> (2K offsets, K masks)
  Parameter<T> defconv_w;     // (C, C, 3, 3), bias-free
  Conv2dSpec defconv_spec;

  void init(int channels, int predictor_depth, int scope, const std::string& name,
            Rng& rng);
  /// dkc_align: same shape in, same shape out.
  Var forward(Tape<T>& tp, Var f_n, Var f_r);
  void collect(std::vector<Parameter<T>*>& out);
};

/// Aligns every neighbor to the reference (reference passes through
/// unaligned), concatenates all 2N+1 features in temporal order
/// (r-N ... r-1, r, r+1 ... r+N) and fuses back to C channels with a
/// 1x1 conv. With `align` null the raw features are fused directly
/// (the w/o-alignment ablation).
template <typename T>
Var align_and_fuse(Tape<T>& tp, AlignModule<T>* align, Conv2dLayer<T>& fusion,
                   const std::vector<Var>& features, int ref_index);

}  // namespace dksan
