// Copyright 2026 the dksan authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dksan/alignment.hpp"
#include "dksan/blocks.hpp"

namespace dksan {

/// Every architecture knob. The "desk" preset keeps tests in the minutes
/// range; the "paper" preset carries the published configuration.
struct NetworkConfig {
  int channels = 16;
  int frames = 3;  // 2N+1
  int levels = 2;  // scale factor = 2^levels
  std::vector<int> rcab_counts = {4, 3};
  int feat_resblocks = 2;
  int dk_scope = 5;
  int dk_predictor_depth = 2;
  bool use_align = true;
  bool use_dksa = true;
  bool use_channel_attention = true;
  bool dksa_single_map = false;

  static NetworkConfig desk();
  static NetworkConfig paper();

  int scale() const { return 1 << levels; }
  int center_frame() const { return frames / 2; }
  void validate() const;
  std::string describe() const;
  bool operator==(const NetworkConfig& o) const;
};

/// Shared first conv + resblocks applied to every frame of the packed
/// (batch*frames, 3, h, w) input.
template <typename T>
struct FeatureExtractor {
  Conv2dLayer<T> head;
  std::vector<ResBlock<T>> blocks;

  void init(int in_c, int channels, int n_blocks, const std::string& name, Rng& rng);
  Var forward(Tape<T>& tp, Var frames);
  void collect(std::vector<Parameter<T>*>& out);
};

/// RCAB stack followed by spatial attention, residual around the whole
/// module: out = DKSA(RCABs(x)) + x. Level 1 uses the light DKSA.
template <typename T>
struct ReconLevel {
  std::vector<RCAB<T>> rcabs;
  DKSA<T> dksa;
  bool use_dksa = true;

  void init(const NetworkConfig& cfg, int level, const std::string& name, Rng& rng);
  Var forward(Tape<T>& tp, Var x);
  void collect(std::vector<Parameter<T>*>& out);
};

/// conv(C->4C) -> PixelShuffle(2) -> lrelu -> conv -> lrelu -> conv(->3).
template <typename T>
struct Upscale {
  Conv2dLayer<T> expand, mid, rgb;

  void init(int channels, const std::string& name, Rng& rng);
  Var forward(Tape<T>& tp, Var x);
  void collect(std::vector<Parameter<T>*>& out);
};

/// Cascaded reconstruction network. Level 1 consumes the aligned multi-frame
/// fusion; level l >= 2 re-extracts features from the previous level's RGB
/// output. Every level carries a bicubic 2x skip connection.
template <typename T>
struct Network {
  NetworkConfig cfg;
  FeatureExtractor<T> features;
  AlignModule<T> align;
  Conv2dLayer<T> fusion;
  struct Level {
    FeatureExtractor<T> extract;  // levels >= 2 only
    ReconLevel<T> recon;
    Upscale<T> up;
  };
  std::vector<Level> levels;

  static Network init(const NetworkConfig& cfg, uint64_t seed);

  /// packed (batch*frames, 3, h, w) -> (batch, 3, scale*h, scale*w).
  Var forward(Tape<T>& tp, Var packed, int batch);

  void collect(std::vector<Parameter<T>*>& out);
  std::vector<Parameter<T>*> parameters();
  void zero_grad();
  size_t param_count();
};

/// Inference: pack one window, forward, clamp to [0,1].
Tensor<float> super_resolve(Network<float>& net,
                            const std::vector<Tensor<float>>& lr_frames);

/// Iterated bicubic 2x upscale of the reference frame; what the network
/// degenerates to when every weight is zero.
template <typename T>
Tensor<T> iterated_bicubic2x(const Tensor<T>& x, int times);

// ---- checkpoint format ----
// "DKSN" | u32 version | config block | u32 count |
// repeat { u32 name_len | name | u32 n,c,h,w | f32 data little-endian } |
// u32 CRC-32 of all preceding bytes.

struct CheckpointData {
  NetworkConfig cfg;
  std::vector<std::pair<std::string, Tensor<float>>> tensors;
};

void save_checkpoint(const std::string& path, const NetworkConfig& cfg,
                     const std::vector<Parameter<float>*>& params);
CheckpointData load_checkpoint(const std::string& path);
Network<float> load_network(const std::string& path);
void save_network(const std::string& path, Network<float>& net);

}  // namespace dksan
