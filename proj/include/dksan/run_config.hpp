// Copyright 2026 the dksan authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "dksan/network.hpp"
#include "dksan/training.hpp"

namespace dksan {

/// Flat key=value configuration shared by the config file and command-line
/// overrides (last assignment wins). Unknown keys are rejected with the full
/// list of valid keys.
struct RunConfig {
  NetworkConfig net;
  TrainConfig train;
  std::string data;        // dataset dir or synth:<pattern>
  std::string out = "out";
  int threads = 0;         // 0 = all
  bool psnr_luma = false;  // PSNR on RGB by default
  // synthetic dataset shape (when data = synth:*)
  int synth_videos = 16;
  int synth_frames = 7;
  int synth_lr_size = 32;
  double noise_sigma = 0.0;

  static RunConfig preset(const std::string& name);  // desk | paper
  static const std::vector<std::string>& valid_keys();

  /// Applies one key=value assignment; contract_error on unknown keys
  /// (message lists every valid key) or unparsable values.
  void apply(const std::string& key, const std::string& value);
  void apply_line(const std::string& line);  // "key=value"
  void load_file(const std::string& path);

  std::string describe() const;
};

}  // namespace dksan
