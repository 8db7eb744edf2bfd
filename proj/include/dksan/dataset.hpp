// Copyright 2026 the dksan authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dksan/rng.hpp"
#include "dksan/synth.hpp"

namespace dksan {

/// A video dataset: per-video LR and HR frame lists plus the candidate
/// window starts. On disk the layout is
///   <root>/lr/<video_id>/frame_%06d.ppm
///   <root>/hr/<video_id>/frame_%06d.ppm
///   <root>/manifest.txt            (one window per line: video_id start_frame)
struct VideoDataset {
  struct Video {
    std::string id;
    std::vector<Tensor<float>> lr;
    std::vector<Tensor<float>> hr;
  };

  std::vector<Video> videos;
  std::vector<std::pair<int, int>> windows;  // (video index, start frame)
  int scale = 4;

  /// Deterministic synthetic dataset. `pattern` is gradient|checker|blobs or
  /// "mix" (alternating checker/blobs). Windows enumerate every start frame.
  static VideoDataset synth(const std::string& pattern, int n_videos, int frames,
                            int lr_size, int scale, double noise_sigma, uint64_t seed);

  static VideoDataset from_disk(const std::string& root);
  void save(const std::string& root) const;

  /// Window of `model_frames` LR frames starting at `start` (start must fit);
  /// the HR target belongs to the center frame.
  FrameSequence window(int video, int start, int model_frames) const;

  /// Starts from the manifest that fit `model_frames`.
  std::vector<std::pair<int, int>> usable_windows(int model_frames) const;

  /// Uniform (window, crop, flip/rotation) sample; draws from rng in the
  /// order window, crop-y, crop-x, transform.
  FrameSequence sample(Rng& rng, int model_frames, int lr_patch) const;
};

/// Stacks B sequences into the packed (B*frames, 3, h, w) input plus the
/// (B, 3, s*h, s*w) target.
std::pair<Tensor<float>, Tensor<float>> pack_batch(
    const std::vector<FrameSequence>& batch);

}  // namespace dksan
