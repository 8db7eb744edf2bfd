// Copyright 2026 the dksan authors
// SPDX-License-Identifier: Apache-2.0

#include "dksan/synth.hpp"

#include <cmath>

#include "dksan/nn_ops.hpp"

namespace dksan {

void FrameSequence::validate(int scale) const {
  if (lr.empty() || lr.size() % 2 == 0)
    throw contract_error("FrameSequence: need an odd number of LR frames");
  const Shape s0 = lr[0].shape();
  for (const auto& f : lr)
    if (f.shape() != s0)
      throw contract_error("FrameSequence: LR frames disagree on shape");
  if (hr.h() != scale * s0.h || hr.w() != scale * s0.w)
    throw contract_error("FrameSequence: HR " + hr.shape().str() + " is not " +
                         std::to_string(scale) + "x the LR " + s0.str());
}

SynthPattern parse_pattern(const std::string& name) {
  if (name == "gradient") return SynthPattern::MovingGradient;
  if (name == "checker") return SynthPattern::Checkerboard;
  if (name == "blobs") return SynthPattern::GaussianBlobs;
  throw contract_error("unknown synth pattern '" + name +
                       "' (expected gradient|checker|blobs|mix)");
}

namespace {

struct GradientParams {
  double fy[3], fx[3], phase[3];
};

struct CheckerParams {
  int cell;
  double color_a[3], color_b[3];
};

struct Blob {
  double y, x, sigma, amp[3];
};

struct BlobsParams {
  double background;
  std::vector<Blob> blobs;
};

// all pattern parameters derive from spec.seed only
GradientParams draw_gradient(Rng& rng) {
  GradientParams p;
  for (int c = 0; c < 3; ++c) {
    p.fy[c] = rng.uniform(0.005, 0.03) * (rng.unit() < 0.5 ? -1.0 : 1.0);
    p.fx[c] = rng.uniform(0.005, 0.03) * (rng.unit() < 0.5 ? -1.0 : 1.0);
    p.phase[c] = rng.uniform(0.0, 6.283185307179586);
  }
  return p;
}

CheckerParams draw_checker(Rng& rng) {
  CheckerParams p;
  p.cell = 6 + static_cast<int>(rng.below(7));
  for (int c = 0; c < 3; ++c) {
    p.color_a[c] = rng.uniform(0.05, 0.45);
    p.color_b[c] = rng.uniform(0.55, 0.95);
  }
  return p;
}

BlobsParams draw_blobs(Rng& rng, int hr_h, int hr_w) {
  BlobsParams p;
  p.background = rng.uniform(0.05, 0.25);
  p.blobs.resize(6);
  for (auto& b : p.blobs) {
    b.y = rng.uniform(0.0, hr_h);
    b.x = rng.uniform(0.0, hr_w);
    b.sigma = rng.uniform(3.0, 9.0);
    for (int c = 0; c < 3; ++c) b.amp[c] = rng.uniform(0.2, 0.75);
  }
  return p;
}

double clamp01d(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

}  // namespace

Tensor<float> render_synth_frame(const SynthSpec& spec, int scale, int t) {
  const int H = spec.lr_h * scale, W = spec.lr_w * scale;
  const int ref = spec.frames / 2;
  const double dy = (t - ref) * spec.motion_y;
  const double dx = (t - ref) * spec.motion_x;
  Rng rng(spec.seed);
  Tensor<float> img(Shape{1, 3, H, W});

  switch (spec.pattern) {
    case SynthPattern::MovingGradient: {
      const GradientParams p = draw_gradient(rng);
      for (int c = 0; c < 3; ++c)
        for (int y = 0; y < H; ++y)
          for (int x = 0; x < W; ++x) {
            const double v = 0.5 + 0.45 * std::sin(6.283185307179586 *
                                                       (p.fy[c] * (y - dy) +
                                                        p.fx[c] * (x - dx)) +
                                                   p.phase[c]);
            img.at(0, c, y, x) = static_cast<float>(v);
          }
      break;
    }
    case SynthPattern::Checkerboard: {
      const CheckerParams p = draw_checker(rng);
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          const long cy = static_cast<long>(std::floor((y - dy) / p.cell));
          const long cx = static_cast<long>(std::floor((x - dx) / p.cell));
          const bool a = ((cy + cx) & 1L) == 0;
          for (int c = 0; c < 3; ++c)
            img.at(0, c, y, x) = static_cast<float>(a ? p.color_a[c] : p.color_b[c]);
        }
      break;
    }
    case SynthPattern::GaussianBlobs: {
      const BlobsParams p = draw_blobs(rng, H, W);
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          double acc[3] = {p.background, p.background, p.background};
          for (const auto& b : p.blobs) {
            const double ry = (y - dy) - b.y, rx = (x - dx) - b.x;
            const double g = std::exp(-(ry * ry + rx * rx) / (2.0 * b.sigma * b.sigma));
            for (int c = 0; c < 3; ++c) acc[c] += b.amp[c] * g;
          }
          for (int c = 0; c < 3; ++c)
            img.at(0, c, y, x) = static_cast<float>(clamp01d(acc[c]));
        }
      break;
    }
  }
  return img;
}

FrameSequence synth_sequence(const SynthSpec& spec, int scale) {
  if (scale != 2 && scale != 4 && scale != 8 && scale != 16)
    throw contract_error("synth_sequence: scale must be one of 2,4,8,16");
  if (spec.frames < 1 || spec.frames % 2 == 0)
    throw contract_error("synth_sequence: frames must be odd (2N+1)");
  FrameSequence seq;
  seq.ref_index = spec.frames / 2;
  seq.source_id = "synth";
  Rng noise_rng(Rng(spec.seed).fork(0x6e6f6973 /* per-sequence noise stream */));
  for (int t = 0; t < spec.frames; ++t) {
    Tensor<float> hr = render_synth_frame(spec, scale, t);
    Tensor<float> lr = bicubic_resize(hr, spec.lr_h, spec.lr_w);
    if (spec.noise_sigma > 0.0) {
      for (int64_t i = 0; i < lr.numel(); ++i)
        lr[i] = static_cast<float>(
            clamp01d(lr[i] + noise_rng.normal(0.0, spec.noise_sigma)));
    }
    if (t == seq.ref_index) seq.hr = std::move(hr);
    seq.lr.push_back(std::move(lr));
  }
  seq.validate(scale);
  return seq;
}

Tensor<float> dihedral(const Tensor<float>& x, int k) {
  if (k < 0 || k > 7) throw contract_error("dihedral: k must be in [0,8)");
  const bool flip_x = k & 1, flip_y = k & 2, transpose = k & 4;
  const int h = x.h(), w = x.w();
  const int oh = transpose ? w : h, ow = transpose ? h : w;
  Tensor<float> out(Shape{x.n(), x.c(), oh, ow});
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < x.c(); ++c)
      for (int y = 0; y < oh; ++y)
        for (int xx = 0; xx < ow; ++xx) {
          int sy = transpose ? xx : y;
          int sx = transpose ? y : xx;
          if (flip_y) sy = h - 1 - sy;
          if (flip_x) sx = w - 1 - sx;
          out.at(n, c, y, xx) = x.at(n, c, sy, sx);
        }
  return out;
}

FrameSequence crop_and_augment(const FrameSequence& seq, int lr_patch, Rng& rng) {
  const int h = seq.lr[0].h(), w = seq.lr[0].w();
  if (lr_patch > h || lr_patch > w)
    throw contract_error("crop_and_augment: patch " + std::to_string(lr_patch) +
                         " exceeds frame " + std::to_string(h) + "x" + std::to_string(w));
  const int scale = seq.hr.h() / h;
  const int oy = static_cast<int>(rng.below(static_cast<uint64_t>(h - lr_patch + 1)));
  const int ox = static_cast<int>(rng.below(static_cast<uint64_t>(w - lr_patch + 1)));
  const int k = static_cast<int>(rng.below(8));

  auto crop = [](const Tensor<float>& t, int y0, int x0, int ch, int cw) {
    Tensor<float> out(Shape{t.n(), t.c(), ch, cw});
    for (int n = 0; n < t.n(); ++n)
      for (int c = 0; c < t.c(); ++c)
        for (int y = 0; y < ch; ++y)
          for (int x = 0; x < cw; ++x) out.at(n, c, y, x) = t.at(n, c, y0 + y, x0 + x);
    return out;
  };

  FrameSequence out;
  out.ref_index = seq.ref_index;
  out.source_id = seq.source_id;
  out.frame_index = seq.frame_index;
  for (const auto& f : seq.lr)
    out.lr.push_back(dihedral(crop(f, oy, ox, lr_patch, lr_patch), k));
  out.hr = dihedral(
      crop(seq.hr, scale * oy, scale * ox, scale * lr_patch, scale * lr_patch), k);
  out.validate(scale);
  return out;
}

}  // namespace dksan
