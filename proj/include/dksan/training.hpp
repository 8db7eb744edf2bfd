// Copyright 2026 the dksan authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "dksan/dataset.hpp"
#include "dksan/network.hpp"

namespace dksan {

struct AdamConfig {
  double lr = 4e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  int64_t t = 0;
  std::vector<Tensor<float>> m, v;

  void init(const std::vector<Parameter<float>*>& params);
};

/// Standard bias-corrected update. Scans all gradients first and aborts the
/// whole step (numeric_error naming the parameter) if any is non-finite;
/// gradients are left untouched for the caller to zero.
void adam_step(const std::vector<Parameter<float>*>& params, AdamState& state,
               const AdamConfig& cfg);

/// Scales all gradients so the global L2 norm is at most max_norm
/// (no-op when already within, or when max_norm <= 0).
void clip_global_grad_norm(const std::vector<Parameter<float>*>& params,
                           double max_norm);

struct TrainConfig {
  double lr = 4e-4;
  int steps = 2000;
  int batch = 4;
  uint64_t seed = 1;
  int checkpoint_interval = 500;
  int val_interval = 250;
  int lr_patch = 24;
  double grad_clip = 0.0;     // off by default
  bool cosine_decay = false;  // off by default; only the initial rate is fixed
  std::string out_dir;        // empty: keep everything in memory
  bool resume = false;        // continue from out_dir/last.dksn + out_dir/state.dkst

  void validate() const;
};

struct TrainResult {
  int steps_run = 0;
  double final_loss = 0.0;
  double best_psnr = -1.0;
  bool halted_non_finite = false;
  std::vector<double> loss_curve;
  std::vector<std::pair<int, double>> val_curve;  // (step, psnr)
};

/// Training loop: sample batch -> forward -> Charbonnier -> backward ->
/// adam_step. Writes a CSV log (step,loss,psnr_val,lr,seconds) to `csv` when
/// given, and checkpoints under out_dir (last.dksn/state.dkst plus best.dksn
/// at the best validation PSNR). A non-finite loss halts the run, leaving
/// the last good checkpoint in place.
TrainResult train(const TrainConfig& cfg, const NetworkConfig& net_cfg,
                  const VideoDataset& train_data, const VideoDataset& val_data,
                  std::ostream* csv = nullptr);

/// Mean PSNR of the net over every usable validation window (full frames,
/// inference clamp applied).
double validation_psnr(Network<float>& net, const VideoDataset& val_data);

/// Mean PSNR of the iterated-bicubic baseline over the same windows.
double bicubic_baseline_psnr(const VideoDataset& val_data, int levels, int frames);

// resume state: "DKST" | u32 version | u64 step | u64 rng seed | u64 rng
// counter | u64 adam t | f64 best psnr | per-param m and v tensors | CRC-32.
void save_train_state(const std::string& path, int64_t step, const Rng& data_rng,
                      const AdamState& adam, double best_psnr,
                      const std::vector<Parameter<float>*>& params);
struct TrainState {
  int64_t step = 0;
  uint64_t rng_seed = 0, rng_counter = 0;
  AdamState adam;
  double best_psnr = -1.0;
};
TrainState load_train_state(const std::string& path,
                            const std::vector<Parameter<float>*>& params);

}  // namespace dksan
