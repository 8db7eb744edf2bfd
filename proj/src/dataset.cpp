// Copyright 2026 the dksan authors
// SPDX-License-Identifier: Apache-2.0

#include "dksan/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dksan/nn_ops.hpp"
#include "dksan/ppm.hpp"

namespace fs = std::filesystem;

namespace dksan {

VideoDataset VideoDataset::synth(const std::string& pattern, int n_videos, int frames,
                                 int lr_size, int scale, double noise_sigma,
                                 uint64_t seed) {
  if (n_videos < 1 || frames < 1)
    throw contract_error("VideoDataset::synth: need at least one video and frame");
  VideoDataset ds;
  ds.scale = scale;
  Rng seeder(seed);
  for (int v = 0; v < n_videos; ++v) {
    SynthSpec spec;
    if (pattern == "mix")
      spec.pattern = (v % 2 == 0) ? SynthPattern::Checkerboard
                                  : SynthPattern::GaussianBlobs;
    else
      spec.pattern = parse_pattern(pattern);
    spec.frames = frames;
    spec.lr_h = lr_size;
    spec.lr_w = lr_size;
    spec.noise_sigma = noise_sigma;
    spec.seed = seeder.next_u64();
    // subpixel drift, at least half an HR pixel per frame on some axis
    spec.motion_y = seeder.uniform(-2.0, 2.0);
    spec.motion_x = seeder.uniform(-2.0, 2.0);
    if (std::abs(spec.motion_y) < 0.5 && std::abs(spec.motion_x) < 0.5)
      spec.motion_x = spec.motion_x < 0 ? -0.7 : 0.7;

    // render every frame of the video once; synth_sequence renders a whole
    // window, so reuse it by rendering per-frame directly
    Video video;
    char name[32];
    std::snprintf(name, sizeof(name), "%03d", v);
    video.id = name;
    Rng noise_rng(Rng(spec.seed).fork(0x6e6f6973));
    for (int t = 0; t < frames; ++t) {
      Tensor<float> hr = render_synth_frame(spec, scale, t);
      Tensor<float> lr = bicubic_resize(hr, lr_size, lr_size);
      if (noise_sigma > 0.0)
        for (int64_t i = 0; i < lr.numel(); ++i) {
          const double n = noise_rng.normal(0.0, noise_sigma);
          const double val = lr[i] + n;
          lr[i] = static_cast<float>(val < 0 ? 0 : (val > 1 ? 1 : val));
        }
      video.hr.push_back(std::move(hr));
      video.lr.push_back(std::move(lr));
    }
    ds.videos.push_back(std::move(video));
    for (int s = 0; s < frames; ++s) ds.windows.emplace_back(v, s);
  }
  return ds;
}

VideoDataset VideoDataset::from_disk(const std::string& root) {
  VideoDataset ds;
  const fs::path lr_root = fs::path(root) / "lr";
  const fs::path hr_root = fs::path(root) / "hr";
  const fs::path manifest = fs::path(root) / "manifest.txt";
  if (!fs::is_directory(lr_root) || !fs::is_directory(hr_root))
    throw io_error(root + ": expected lr/ and hr/ subdirectories");
  if (!fs::is_regular_file(manifest))
    throw io_error(manifest.string() + ": manifest missing");

  std::vector<std::string> ids;
  for (const auto& e : fs::directory_iterator(lr_root))
    if (e.is_directory()) ids.push_back(e.path().filename().string());
  std::sort(ids.begin(), ids.end());
  if (ids.empty()) throw io_error(root + ": no videos under lr/");

  int first_scale = 0;
  for (const auto& id : ids) {
    Video v;
    v.id = id;
    std::vector<std::string> frames;
    for (const auto& e : fs::directory_iterator(lr_root / id))
      if (e.path().extension() == ".ppm") frames.push_back(e.path().filename().string());
    std::sort(frames.begin(), frames.end());
    for (const auto& f : frames) {
      v.lr.push_back(load_ppm((lr_root / id / f).string()));
      const fs::path hrp = hr_root / id / f;
      if (!fs::is_regular_file(hrp)) throw io_error(hrp.string() + ": missing HR frame");
      v.hr.push_back(load_ppm(hrp.string()));
    }
    if (v.lr.empty()) throw io_error((lr_root / id).string() + ": no frames");
    const int sc = v.hr[0].h() / v.lr[0].h();
    if (sc * v.lr[0].h() != v.hr[0].h() || sc * v.lr[0].w() != v.hr[0].w())
      throw io_error(root + "/" + id + ": HR is not an integer multiple of LR");
    if (first_scale == 0) first_scale = sc;
    if (sc != first_scale) throw io_error(root + ": videos disagree on scale");
    ds.videos.push_back(std::move(v));
  }
  ds.scale = first_scale;

  std::ifstream mf(manifest);
  std::string line;
  int line_no = 0;
  while (std::getline(mf, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    std::string id;
    int start;
    if (!(is >> id >> start))
      throw io_error(manifest.string() + ":" + std::to_string(line_no) +
                     ": expected 'video_id start_frame'");
    auto it = std::find_if(ds.videos.begin(), ds.videos.end(),
                           [&](const Video& v) { return v.id == id; });
    if (it == ds.videos.end())
      throw io_error(manifest.string() + ":" + std::to_string(line_no) +
                     ": unknown video " + id);
    const int vi = static_cast<int>(it - ds.videos.begin());
    if (start < 0 || start >= static_cast<int>(it->lr.size()))
      throw io_error(manifest.string() + ":" + std::to_string(line_no) +
                     ": start frame out of range");
    ds.windows.emplace_back(vi, start);
  }
  if (ds.windows.empty()) throw io_error(manifest.string() + ": no windows");
  return ds;
}

void VideoDataset::save(const std::string& root) const {
  fs::create_directories(fs::path(root) / "lr");
  fs::create_directories(fs::path(root) / "hr");
  for (const auto& v : videos) {
    fs::create_directories(fs::path(root) / "lr" / v.id);
    fs::create_directories(fs::path(root) / "hr" / v.id);
    for (size_t t = 0; t < v.lr.size(); ++t) {
      char name[32];
      std::snprintf(name, sizeof(name), "frame_%06zu.ppm", t);
      save_ppm((fs::path(root) / "lr" / v.id / name).string(), v.lr[t]);
      save_ppm((fs::path(root) / "hr" / v.id / name).string(), v.hr[t]);
    }
  }
  std::ofstream mf(fs::path(root) / "manifest.txt");
  for (const auto& [vi, start] : windows) mf << videos[vi].id << " " << start << "\n";
}

FrameSequence VideoDataset::window(int video, int start, int model_frames) const {
  const Video& v = videos.at(video);
  const int total = static_cast<int>(v.lr.size());
  if (start < 0 || start + model_frames > total)
    throw contract_error("VideoDataset::window: window [" + std::to_string(start) +
                         ", +" + std::to_string(model_frames) + ") exceeds " +
                         std::to_string(total) + " frames");
  FrameSequence seq;
  seq.ref_index = model_frames / 2;
  seq.source_id = v.id;
  seq.frame_index = start + seq.ref_index;
  for (int f = 0; f < model_frames; ++f) seq.lr.push_back(v.lr[start + f]);
  seq.hr = v.hr[start + seq.ref_index];
  seq.validate(scale);
  return seq;
}

std::vector<std::pair<int, int>> VideoDataset::usable_windows(int model_frames) const {
  std::vector<std::pair<int, int>> out;
  for (const auto& [vi, start] : windows)
    if (start + model_frames <= static_cast<int>(videos[vi].lr.size()))
      out.emplace_back(vi, start);
  return out;
}

FrameSequence VideoDataset::sample(Rng& rng, int model_frames, int lr_patch) const {
  const auto usable = usable_windows(model_frames);
  if (usable.empty())
    throw contract_error("VideoDataset::sample: no window fits " +
                         std::to_string(model_frames) + " frames");
  const auto [vi, start] = usable[rng.below(usable.size())];
  FrameSequence seq = window(vi, start, model_frames);
  return crop_and_augment(seq, lr_patch, rng);
}

std::pair<Tensor<float>, Tensor<float>> pack_batch(
    const std::vector<FrameSequence>& batch) {
  if (batch.empty()) throw contract_error("pack_batch: empty batch");
  const int B = static_cast<int>(batch.size());
  const int F = static_cast<int>(batch[0].lr.size());
  const Shape fs = batch[0].lr[0].shape();
  const Shape hs = batch[0].hr.shape();
  Tensor<float> packed(Shape{B * F, 3, fs.h, fs.w});
  Tensor<float> target(Shape{B, 3, hs.h, hs.w});
  for (int b = 0; b < B; ++b) {
    if (static_cast<int>(batch[b].lr.size()) != F)
      throw contract_error("pack_batch: frame counts differ");
    for (int f = 0; f < F; ++f) {
      if (batch[b].lr[f].shape() != fs)
        throw contract_error("pack_batch: LR shapes differ");
      std::memcpy(packed.data() + packed.index(b * F + f, 0, 0, 0),
                  batch[b].lr[f].data(),
                  sizeof(float) * static_cast<size_t>(batch[b].lr[f].numel()));
    }
    if (batch[b].hr.shape() != hs) throw contract_error("pack_batch: HR shapes differ");
    std::memcpy(target.data() + target.index(b, 0, 0, 0), batch[b].hr.data(),
                sizeof(float) * static_cast<size_t>(batch[b].hr.numel()));
  }
  return {std::move(packed), std::move(target)};
}

}  // namespace dksan
