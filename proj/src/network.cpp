// Copyright 2026 the dksan authors
// SPDX-License-Identifier: Apache-2.0

#include "dksan/network.hpp"

#include <zlib.h>

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "dksan/nn_ops.hpp"
#include "dksan/op_registry.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint serialization assumes a little-endian host");

namespace dksan {

NetworkConfig NetworkConfig::desk() { return NetworkConfig{}; }

NetworkConfig NetworkConfig::paper() {
  NetworkConfig c;
  c.channels = 128;
  c.frames = 7;
  c.levels = 4;
  c.rcab_counts = {30, 20, 15, 10};
  c.feat_resblocks = 5;
  return c;
}

void NetworkConfig::validate() const {
  if (channels < 1) throw contract_error("NetworkConfig: channels must be >= 1");
  if (frames < 1 || frames % 2 == 0)
    throw contract_error("NetworkConfig: frames must be odd (2N+1), got " +
                         std::to_string(frames));
  if (levels < 1) throw contract_error("NetworkConfig: levels must be >= 1");
  if (static_cast<int>(rcab_counts.size()) != levels)
    throw contract_error("NetworkConfig: rcab_counts has " +
                         std::to_string(rcab_counts.size()) + " entries for " +
                         std::to_string(levels) + " levels");
  for (int r : rcab_counts)
    if (r < 1) throw contract_error("NetworkConfig: rcab count must be >= 1");
  if (feat_resblocks < 1)
    throw contract_error("NetworkConfig: feat_resblocks must be >= 1");
  if (dk_predictor_depth < 1)
    throw contract_error("NetworkConfig: dk_predictor_depth must be >= 1");
  if (dk_scope < 3 || dk_scope % 2 == 0)
    throw contract_error("NetworkConfig: dk_scope must be odd and >= 3");
}

std::string NetworkConfig::describe() const {
  std::ostringstream os;
  os << "channels=" << channels << "\n"
     << "frames=" << frames << "\n"
     << "levels=" << levels << "\n"
     << "scale=" << scale() << "\n"
     << "rcab_counts=";
  for (size_t i = 0; i < rcab_counts.size(); ++i)
    os << (i ? "," : "") << rcab_counts[i];
  os << "\n"
     << "feat_resblocks=" << feat_resblocks << "\n"
     << "dk_scope=" << dk_scope << "\n"
     << "dk_predictor_depth=" << dk_predictor_depth << "\n"
     << "use_align=" << (use_align ? 1 : 0) << "\n"
     << "use_dksa=" << (use_dksa ? 1 : 0) << "\n"
     << "use_channel_attention=" << (use_channel_attention ? 1 : 0) << "\n"
     << "dksa_single_map=" << (dksa_single_map ? 1 : 0) << "\n";
  return os.str();
}

bool NetworkConfig::operator==(const NetworkConfig& o) const {
  return channels == o.channels && frames == o.frames && levels == o.levels &&
         rcab_counts == o.rcab_counts && feat_resblocks == o.feat_resblocks &&
         dk_scope == o.dk_scope && dk_predictor_depth == o.dk_predictor_depth &&
         use_align == o.use_align && use_dksa == o.use_dksa &&
         use_channel_attention == o.use_channel_attention &&
         dksa_single_map == o.dksa_single_map;
}

namespace {
std::string index2(int i) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "%02d", i);
  return buf;
}
}  // namespace

template <typename T>
void FeatureExtractor<T>::init(int in_c, int channels, int n_blocks,
                               const std::string& name, Rng& rng) {
  head.init(Conv2dSpec::same(in_c, channels, 3), name + ".head", rng);
  blocks.resize(n_blocks);
  for (int i = 0; i < n_blocks; ++i)
    blocks[i].init(channels, name + ".res." + index2(i), rng);
}

template <typename T>
Var FeatureExtractor<T>::forward(Tape<T>& tp, Var frames) {
  Var h = leaky_relu(tp, head.forward(tp, frames), T(0.1));
  for (auto& b : blocks) h = b.forward(tp, h);
  return h;
}

template <typename T>
void FeatureExtractor<T>::collect(std::vector<Parameter<T>*>& out) {
  head.collect(out);
  for (auto& b : blocks) b.collect(out);
}

template <typename T>
void ReconLevel<T>::init(const NetworkConfig& cfg, int level, const std::string& name,
                         Rng& rng) {
  use_dksa = cfg.use_dksa;
  const int count = cfg.rcab_counts[level - 1];
  rcabs.resize(count);
  for (int i = 0; i < count; ++i)
    rcabs[i].init(cfg.channels, cfg.use_channel_attention, name + ".rcab." + index2(i),
                  rng);
  if (use_dksa)
    dksa.init(cfg.channels, /*light=*/level == 1, cfg.dksa_single_map, cfg.dk_scope,
              name + ".dksa", rng);
}

template <typename T>
Var ReconLevel<T>::forward(Tape<T>& tp, Var x) {
  Var h = x;
  for (auto& r : rcabs) h = r.forward(tp, h);
  if (use_dksa) h = dksa.forward(tp, h);
  return add(tp, h, x);
}

template <typename T>
void ReconLevel<T>::collect(std::vector<Parameter<T>*>& out) {
  for (auto& r : rcabs) r.collect(out);
  if (use_dksa) dksa.collect(out);
}

template <typename T>
void Upscale<T>::init(int channels, const std::string& name, Rng& rng) {
  expand.init(Conv2dSpec::same(channels, 4 * channels, 3), name + ".expand", rng);
  mid.init(Conv2dSpec::same(channels, channels, 3), name + ".mid", rng);
  rgb.init(Conv2dSpec::same(channels, 3, 3), name + ".rgb", rng);
  // the RGB head adds onto the bicubic skip; start near it
  rgb.weight.value = dksan::scale(rgb.weight.value, T(0.1));
}

template <typename T>
Var Upscale<T>::forward(Tape<T>& tp, Var x) {
  Var h = pixel_shuffle(tp, expand.forward(tp, x), 2);
  h = leaky_relu(tp, h, T(0.1));
  h = leaky_relu(tp, mid.forward(tp, h), T(0.1));
  return rgb.forward(tp, h);
}

template <typename T>
void Upscale<T>::collect(std::vector<Parameter<T>*>& out) {
  expand.collect(out);
  mid.collect(out);
  rgb.collect(out);
}

template <typename T>
Network<T> Network<T>::init(const NetworkConfig& cfg, uint64_t seed) {
  cfg.validate();
  Network net;
  net.cfg = cfg;
  Rng rng(seed);
  net.features.init(3, cfg.channels, cfg.feat_resblocks, "features", rng);
  if (cfg.use_align)
    net.align.init(cfg.channels, cfg.dk_predictor_depth, cfg.dk_scope, "align", rng);
  net.fusion.init(Conv2dSpec::same(cfg.frames * cfg.channels, cfg.channels, 1),
                  "fusion", rng);
  net.levels.resize(cfg.levels);
  for (int l = 1; l <= cfg.levels; ++l) {
    auto& lvl = net.levels[l - 1];
    const std::string prefix = "level" + std::to_string(l);
    if (l >= 2) lvl.extract.init(3, cfg.channels, 2, prefix + ".extract", rng);
    lvl.recon.init(cfg, l, prefix, rng);
    lvl.up.init(cfg.channels, prefix + ".up", rng);
  }
  return net;
}

template <typename T>
Var Network<T>::forward(Tape<T>& tp, Var packed, int batch) {
  const Tensor<T>& pv = tp.value(packed);
  const int F = cfg.frames;
  if (pv.n() != batch * F)
    throw contract_error("Network::forward: packed batch " + std::to_string(pv.n()) +
                         " != batch*frames " + std::to_string(batch * F));
  if (pv.c() != 3)
    throw contract_error("Network::forward: frames must be RGB, got " +
                         std::to_string(pv.c()) + " channels");

  Var feat = features.forward(tp, packed);
  std::vector<Var> per_frame(F);
  for (int f = 0; f < F; ++f) {
    std::vector<int> rows(batch);
    for (int b = 0; b < batch; ++b) rows[b] = b * F + f;
    per_frame[f] = gather_rows(tp, feat, rows);
  }
  Var fused = align_and_fuse(tp, cfg.use_align ? &align : nullptr, fusion, per_frame,
                             cfg.center_frame());

  std::vector<int> ref_rows(batch);
  for (int b = 0; b < batch; ++b) ref_rows[b] = b * F + cfg.center_frame();
  Var ref_rgb = gather_rows(tp, packed, ref_rows);

  Var y = add(tp, levels[0].up.forward(tp, levels[0].recon.forward(tp, fused)),
              bicubic_up2(tp, ref_rgb));
  for (int l = 2; l <= cfg.levels; ++l) {
    auto& lvl = levels[l - 1];
    Var e = lvl.extract.forward(tp, y);
    Var u = lvl.up.forward(tp, lvl.recon.forward(tp, e));
    y = add(tp, u, bicubic_up2(tp, y));
  }
  return y;
}

template <typename T>
void Network<T>::collect(std::vector<Parameter<T>*>& out) {
  features.collect(out);
  if (cfg.use_align) align.collect(out);
  fusion.collect(out);
  for (int l = 1; l <= cfg.levels; ++l) {
    auto& lvl = levels[l - 1];
    if (l >= 2) lvl.extract.collect(out);
    lvl.recon.collect(out);
    lvl.up.collect(out);
  }
}

template <typename T>
std::vector<Parameter<T>*> Network<T>::parameters() {
  std::vector<Parameter<T>*> out;
  collect(out);
  return out;
}

template <typename T>
void Network<T>::zero_grad() {
  for (auto* p : parameters()) p->zero_grad();
}

template <typename T>
size_t Network<T>::param_count() {
  size_t n = 0;
  for (auto* p : parameters()) n += static_cast<size_t>(p->value.numel());
  return n;
}

Tensor<float> super_resolve(Network<float>& net,
                            const std::vector<Tensor<float>>& lr_frames) {
  const int F = net.cfg.frames;
  if (static_cast<int>(lr_frames.size()) != F)
    throw contract_error("super_resolve: expected " + std::to_string(F) + " frames, got " +
                         std::to_string(lr_frames.size()));
  const Shape fs = lr_frames[0].shape();
  Tensor<float> packed(Shape{F, 3, fs.h, fs.w});
  for (int f = 0; f < F; ++f) {
    const Tensor<float>& t = lr_frames[f];
    if (t.shape() != fs)
      throw contract_error("super_resolve: frame shapes differ: " + t.shape().str() +
                           " vs " + fs.str());
    std::memcpy(packed.data() + packed.index(f, 0, 0, 0), t.data(),
                sizeof(float) * static_cast<size_t>(t.numel()));
  }
  Tape<float> tp;
  Var out = net.forward(tp, tp.leaf(std::move(packed)), 1);
  return clamp01(tp.value(out));
}

template <typename T>
Tensor<T> iterated_bicubic2x(const Tensor<T>& x, int times) {
  Tensor<T> y = x;
  for (int i = 0; i < times; ++i) y = bicubic_resize(y, y.h() * 2, y.w() * 2);
  return y;
}

// ---- checkpoint io ----

namespace {

constexpr char kMagic[4] = {'D', 'K', 'S', 'N'};
constexpr uint32_t kVersion = 1;

void put_u32(std::string& buf, uint32_t v) {
  buf.append(reinterpret_cast<const char*>(&v), 4);
}

uint32_t get_u32(const std::string& buf, size_t& at, const std::string& path) {
  if (at + 4 > buf.size()) throw io_error(path + ": truncated checkpoint");
  uint32_t v;
  std::memcpy(&v, buf.data() + at, 4);
  at += 4;
  return v;
}

void append_config(std::string& buf, const NetworkConfig& c) {
  put_u32(buf, static_cast<uint32_t>(c.channels));
  put_u32(buf, static_cast<uint32_t>(c.frames));
  put_u32(buf, static_cast<uint32_t>(c.levels));
  put_u32(buf, static_cast<uint32_t>(c.feat_resblocks));
  put_u32(buf, static_cast<uint32_t>(c.dk_scope));
  put_u32(buf, static_cast<uint32_t>(c.dk_predictor_depth));
  buf.push_back(c.use_align ? 1 : 0);
  buf.push_back(c.use_dksa ? 1 : 0);
  buf.push_back(c.use_channel_attention ? 1 : 0);
  buf.push_back(c.dksa_single_map ? 1 : 0);
  for (int r : c.rcab_counts) put_u32(buf, static_cast<uint32_t>(r));
}

NetworkConfig parse_config(const std::string& buf, size_t& at, const std::string& path) {
  NetworkConfig c;
  c.channels = static_cast<int>(get_u32(buf, at, path));
  c.frames = static_cast<int>(get_u32(buf, at, path));
  c.levels = static_cast<int>(get_u32(buf, at, path));
  c.feat_resblocks = static_cast<int>(get_u32(buf, at, path));
  c.dk_scope = static_cast<int>(get_u32(buf, at, path));
  c.dk_predictor_depth = static_cast<int>(get_u32(buf, at, path));
  if (at + 4 > buf.size()) throw io_error(path + ": truncated checkpoint");
  c.use_align = buf[at++] != 0;
  c.use_dksa = buf[at++] != 0;
  c.use_channel_attention = buf[at++] != 0;
  c.dksa_single_map = buf[at++] != 0;
  c.rcab_counts.resize(c.levels > 0 ? c.levels : 0);
  for (int i = 0; i < c.levels; ++i)
    c.rcab_counts[i] = static_cast<int>(get_u32(buf, at, path));
  return c;
}

}  // namespace

void save_checkpoint(const std::string& path, const NetworkConfig& cfg,
                     const std::vector<Parameter<float>*>& params) {
  std::string buf;
  buf.append(kMagic, 4);
  put_u32(buf, kVersion);
  append_config(buf, cfg);
  put_u32(buf, static_cast<uint32_t>(params.size()));
  for (const auto* p : params) {
    put_u32(buf, static_cast<uint32_t>(p->name.size()));
    buf.append(p->name);
    const Shape s = p->value.shape();
    put_u32(buf, static_cast<uint32_t>(s.n));
    put_u32(buf, static_cast<uint32_t>(s.c));
    put_u32(buf, static_cast<uint32_t>(s.h));
    put_u32(buf, static_cast<uint32_t>(s.w));
    buf.append(reinterpret_cast<const char*>(p->value.data()),
               sizeof(float) * static_cast<size_t>(p->value.numel()));
  }
  const uint32_t crc = static_cast<uint32_t>(
      crc32(0, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(buf.size())));
  put_u32(buf, crc);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw io_error(path + ": cannot open for writing");
  f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!f) throw io_error(path + ": write failed");
}

CheckpointData load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error(path + ": cannot open checkpoint");
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (buf.size() < 12) throw io_error(path + ": truncated checkpoint");

  const uint32_t stored_crc =
      *reinterpret_cast<const uint32_t*>(buf.data() + buf.size() - 4);
  const uint32_t actual_crc = static_cast<uint32_t>(
      crc32(0, reinterpret_cast<const Bytef*>(buf.data()),
            static_cast<uInt>(buf.size() - 4)));
  if (stored_crc != actual_crc)
    throw io_error(path + ": checkpoint CRC mismatch (file corrupt)");

  size_t at = 0;
  if (std::memcmp(buf.data(), kMagic, 4) != 0)
    throw io_error(path + ": bad magic, not a DKSN checkpoint");
  at = 4;
  const uint32_t version = get_u32(buf, at, path);
  if (version != kVersion)
    throw io_error(path + ": unsupported checkpoint version " + std::to_string(version));

  CheckpointData out;
  out.cfg = parse_config(buf, at, path);
  const uint32_t count = get_u32(buf, at, path);
  out.tensors.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = get_u32(buf, at, path);
    if (at + name_len > buf.size()) throw io_error(path + ": truncated checkpoint");
    std::string name(buf.data() + at, name_len);
    at += name_len;
    Shape s;
    s.n = static_cast<int>(get_u32(buf, at, path));
    s.c = static_cast<int>(get_u32(buf, at, path));
    s.h = static_cast<int>(get_u32(buf, at, path));
    s.w = static_cast<int>(get_u32(buf, at, path));
    const size_t bytes = sizeof(float) * static_cast<size_t>(s.numel());
    if (at + bytes > buf.size()) throw io_error(path + ": truncated checkpoint");
    std::vector<float> data(static_cast<size_t>(s.numel()));
    std::memcpy(data.data(), buf.data() + at, bytes);
    at += bytes;
    out.tensors.emplace_back(std::move(name), Tensor<float>::from(s, std::move(data)));
  }
  return out;
}

Network<float> load_network(const std::string& path) {
  CheckpointData data = load_checkpoint(path);
  Network<float> net = Network<float>::init(data.cfg, /*seed=*/0);
  std::unordered_map<std::string, Parameter<float>*> by_name;
  for (auto* p : net.parameters()) by_name[p->name] = p;
  if (by_name.size() != data.tensors.size())
    throw io_error(path + ": checkpoint has " + std::to_string(data.tensors.size()) +
                   " tensors, network expects " + std::to_string(by_name.size()));
  for (auto& [name, tensor] : data.tensors) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw io_error(path + ": unknown parameter " + name);
    if (it->second->value.shape() != tensor.shape())
      throw io_error(path + ": shape mismatch for " + name + ": " +
                     tensor.shape().str() + " vs " + it->second->value.shape().str());
    it->second->value = tensor;
  }
  return net;
}

void save_network(const std::string& path, Network<float>& net) {
  save_checkpoint(path, net.cfg, net.parameters());
}

DKSAN_REGISTER_OP(extract_features);
DKSAN_REGISTER_OP(reconstruct_level);
DKSAN_REGISTER_OP(upscale);

template struct FeatureExtractor<float>;
template struct FeatureExtractor<double>;
template struct ReconLevel<float>;
template struct ReconLevel<double>;
template struct Upscale<float>;
template struct Upscale<double>;
template struct Network<float>;
template struct Network<double>;
template Tensor<float> iterated_bicubic2x<float>(const Tensor<float>&, int);
template Tensor<double> iterated_bicubic2x<double>(const Tensor<double>&, int);

}  // namespace dksan
