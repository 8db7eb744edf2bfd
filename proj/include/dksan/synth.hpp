// Copyright 2026 the dksan authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dksan/rng.hpp"
#include "dksan/tensor.hpp"

namespace dksan {

/// One training/eval window: 2N+1 low-res frames plus the ground-truth
/// high-res frame for the center (reference) frame.
struct FrameSequence {
  std::vector<Tensor<float>> lr;  // each (1,3,h,w), values in [0,1]
  Tensor<float> hr;               // (1,3,scale*h,scale*w)
  int ref_index = 0;
  std::string source_id;
  int frame_index = 0;

  void validate(int scale) const;
};

enum class SynthPattern { MovingGradient, Checkerboard, GaussianBlobs };

SynthPattern parse_pattern(const std::string& name);

/// Analytic video source. Patterns are defined on the infinite plane and
/// translated by `motion` HR pixels per frame, so subpixel motion is exact
/// and frame t equals frame t-1 shifted by exactly `motion`. The same spec
/// always renders the same sequence.
struct SynthSpec {
  SynthPattern pattern = SynthPattern::Checkerboard;
  double motion_y = 0.0, motion_x = 0.0;  // HR pixels per frame
  double noise_sigma = 0.0;               // Gaussian, added to LR frames only
  int frames = 3;
  uint64_t seed = 0;
  int lr_h = 32, lr_w = 32;
};

/// HR frame `t` of the spec (displacement measured from the center frame).
Tensor<float> render_synth_frame(const SynthSpec& spec, int scale, int t);

/// Renders HR frames analytically, derives LR frames by bicubic downscale
/// (kernel a=-0.5); the center frame's clean HR is the target.
FrameSequence synth_sequence(const SynthSpec& spec, int scale);

/// Same LR window across all frames, HR window = scale times that window,
/// then one of the 8 dihedral flips/rotations applied identically to every
/// frame. Draws (y, x, transform) from rng in that order.
FrameSequence crop_and_augment(const FrameSequence& seq, int lr_patch, Rng& rng);

/// The 8-element dihedral group: bit0 flips x, bit1 flips y, bit2 transposes.
Tensor<float> dihedral(const Tensor<float>& x, int k);

}  // namespace dksan
