// Copyright 2026 the dksan authors
// SPDX-License-Identifier: Apache-2.0

#include "dksan/training.hpp"

#include <zlib.h>

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "dksan/loss_metrics.hpp"

namespace dksan {

void AdamState::init(const std::vector<Parameter<float>*>& params) {
  t = 0;
  m.clear();
  v.clear();
  for (const auto* p : params) {
    m.emplace_back(p->value.shape());
    v.emplace_back(p->value.shape());
  }
}

void adam_step(const std::vector<Parameter<float>*>& params, AdamState& state,
               const AdamConfig& cfg) {
  if (state.m.size() != params.size())
    throw contract_error("adam_step: state tracks " + std::to_string(state.m.size()) +
                         " parameters, got " + std::to_string(params.size()));
  for (const auto* p : params)
    for (int64_t i = 0; i < p->grad.numel(); ++i)
      if (!std::isfinite(p->grad[i]))
        throw numeric_error("adam_step: non-finite gradient in parameter " + p->name);

  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  const float b1 = static_cast<float>(cfg.beta1), b2 = static_cast<float>(cfg.beta2);
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Parameter<float>& p = *params[pi];
    Tensor<float>& m = state.m[pi];
    Tensor<float>& v = state.v[pi];
    for (int64_t i = 0; i < p.value.numel(); ++i) {
      const float g = p.grad[i];
      m[i] = b1 * m[i] + (1.0f - b1) * g;
      v[i] = b2 * v[i] + (1.0f - b2) * g * g;
      const double mhat = static_cast<double>(m[i]) / bc1;
      const double vhat = static_cast<double>(v[i]) / bc2;
      p.value[i] -= static_cast<float>(cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
    }
  }
}

void clip_global_grad_norm(const std::vector<Parameter<float>*>& params,
                           double max_norm) {
  if (max_norm <= 0.0) return;
  double sq = 0.0;
  for (const auto* p : params)
    for (int64_t i = 0; i < p->grad.numel(); ++i)
      sq += static_cast<double>(p->grad[i]) * p->grad[i];
  const double norm = std::sqrt(sq);
  if (norm <= max_norm) return;
  // rounded down a hair so the post-clip norm cannot exceed the threshold
  const float s = static_cast<float>(max_norm / norm * (1.0 - 1e-7));
  for (auto* p : params)
    for (int64_t i = 0; i < p->grad.numel(); ++i) p->grad[i] *= s;
}

void TrainConfig::validate() const {
  if (lr <= 0 || steps < 1 || batch < 1 || lr_patch < 1 || checkpoint_interval < 1 ||
      val_interval < 1)
    throw contract_error("TrainConfig: lr, steps, batch, lr_patch and intervals must "
                         "be positive");
}

double validation_psnr(Network<float>& net, const VideoDataset& val_data) {
  const auto windows = val_data.usable_windows(net.cfg.frames);
  if (windows.empty()) throw contract_error("validation_psnr: no usable windows");
  double acc = 0.0;
  for (const auto& [vi, start] : windows) {
    FrameSequence seq = val_data.window(vi, start, net.cfg.frames);
    Tensor<float> sr = super_resolve(net, seq.lr);
    acc += psnr(sr, seq.hr);
  }
  return acc / static_cast<double>(windows.size());
}

double bicubic_baseline_psnr(const VideoDataset& val_data, int levels, int frames) {
  const auto windows = val_data.usable_windows(frames);
  if (windows.empty()) throw contract_error("bicubic_baseline_psnr: no usable windows");
  double acc = 0.0;
  for (const auto& [vi, start] : windows) {
    FrameSequence seq = val_data.window(vi, start, frames);
    Tensor<float> up = clamp01(iterated_bicubic2x(seq.lr[seq.ref_index], levels));
    acc += psnr(up, seq.hr);
  }
  return acc / static_cast<double>(windows.size());
}

// ---- resume state io ----

namespace {

constexpr char kStateMagic[4] = {'D', 'K', 'S', 'T'};
constexpr uint32_t kStateVersion = 1;

void put_u32(std::string& buf, uint32_t v) {
  buf.append(reinterpret_cast<const char*>(&v), 4);
}
void put_u64(std::string& buf, uint64_t v) {
  buf.append(reinterpret_cast<const char*>(&v), 8);
}
void put_f64(std::string& buf, double v) {
  buf.append(reinterpret_cast<const char*>(&v), 8);
}
void put_tensor(std::string& buf, const Tensor<float>& t) {
  const Shape s = t.shape();
  put_u32(buf, static_cast<uint32_t>(s.n));
  put_u32(buf, static_cast<uint32_t>(s.c));
  put_u32(buf, static_cast<uint32_t>(s.h));
  put_u32(buf, static_cast<uint32_t>(s.w));
  buf.append(reinterpret_cast<const char*>(t.data()),
             sizeof(float) * static_cast<size_t>(t.numel()));
}

struct Reader {
  const std::string& buf;
  size_t at = 0;
  const std::string& path;

  void need(size_t n) {
    if (at + n > buf.size()) throw io_error(path + ": truncated train state");
  }
  uint32_t u32() {
    need(4);
    uint32_t v;
    std::memcpy(&v, buf.data() + at, 4);
    at += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v;
    std::memcpy(&v, buf.data() + at, 8);
    at += 8;
    return v;
  }
  double f64() {
    need(8);
    double v;
    std::memcpy(&v, buf.data() + at, 8);
    at += 8;
    return v;
  }
  Tensor<float> tensor() {
    Shape s;
    s.n = static_cast<int>(u32());
    s.c = static_cast<int>(u32());
    s.h = static_cast<int>(u32());
    s.w = static_cast<int>(u32());
    const size_t bytes = sizeof(float) * static_cast<size_t>(s.numel());
    need(bytes);
    std::vector<float> data(static_cast<size_t>(s.numel()));
    std::memcpy(data.data(), buf.data() + at, bytes);
    at += bytes;
    return Tensor<float>::from(s, std::move(data));
  }
};

}  // namespace

void save_train_state(const std::string& path, int64_t step, const Rng& data_rng,
                      const AdamState& adam, double best_psnr,
                      const std::vector<Parameter<float>*>& params) {
  std::string buf;
  buf.append(kStateMagic, 4);
  put_u32(buf, kStateVersion);
  put_u64(buf, static_cast<uint64_t>(step));
  put_u64(buf, data_rng.seed());
  put_u64(buf, data_rng.counter());
  put_u64(buf, static_cast<uint64_t>(adam.t));
  put_f64(buf, best_psnr);
  put_u32(buf, static_cast<uint32_t>(params.size()));
  for (size_t i = 0; i < params.size(); ++i) {
    put_tensor(buf, adam.m[i]);
    put_tensor(buf, adam.v[i]);
  }
  const uint32_t crc = static_cast<uint32_t>(
      crc32(0, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(buf.size())));
  put_u32(buf, crc);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw io_error(path + ": cannot open for writing");
  f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!f) throw io_error(path + ": write failed");
}

TrainState load_train_state(const std::string& path,
                            const std::vector<Parameter<float>*>& params) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error(path + ": cannot open train state");
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (buf.size() < 12) throw io_error(path + ": truncated train state");
  const uint32_t stored =
      *reinterpret_cast<const uint32_t*>(buf.data() + buf.size() - 4);
  const uint32_t actual = static_cast<uint32_t>(
      crc32(0, reinterpret_cast<const Bytef*>(buf.data()),
            static_cast<uInt>(buf.size() - 4)));
  if (stored != actual) throw io_error(path + ": train state CRC mismatch");

  Reader r{buf, 0, path};
  r.need(4);
  if (std::memcmp(buf.data(), kStateMagic, 4) != 0)
    throw io_error(path + ": bad magic, not a DKST state file");
  r.at = 4;
  if (r.u32() != kStateVersion) throw io_error(path + ": unsupported state version");

  TrainState st;
  st.step = static_cast<int64_t>(r.u64());
  st.rng_seed = r.u64();
  st.rng_counter = r.u64();
  st.adam.t = static_cast<int64_t>(r.u64());
  st.best_psnr = r.f64();
  const uint32_t count = r.u32();
  if (count != params.size())
    throw io_error(path + ": state tracks " + std::to_string(count) +
                   " parameters, network has " + std::to_string(params.size()));
  for (uint32_t i = 0; i < count; ++i) {
    st.adam.m.push_back(r.tensor());
    st.adam.v.push_back(r.tensor());
    if (st.adam.m.back().shape() != params[i]->value.shape() ||
        st.adam.v.back().shape() != params[i]->value.shape())
      throw io_error(path + ": optimizer state shape mismatch for " + params[i]->name);
  }
  return st;
}

// ---- the loop ----

TrainResult train(const TrainConfig& cfg, const NetworkConfig& net_cfg,
                  const VideoDataset& train_data, const VideoDataset& val_data,
                  std::ostream* csv) {
  cfg.validate();
  net_cfg.validate();
  if (train_data.videos.empty()) throw contract_error("train: empty dataset");
  if (train_data.scale != net_cfg.scale())
    throw contract_error("train: dataset scale " + std::to_string(train_data.scale) +
                         " != network scale " + std::to_string(net_cfg.scale()));

  namespace fs = std::filesystem;
  const bool persist = !cfg.out_dir.empty();
  if (persist) fs::create_directories(cfg.out_dir);
  const std::string last_path = cfg.out_dir + "/last.dksn";
  const std::string best_path = cfg.out_dir + "/best.dksn";
  const std::string state_path = cfg.out_dir + "/state.dkst";

  Network<float> net = Network<float>::init(net_cfg, cfg.seed);
  AdamState adam;
  Rng data_rng = Rng(cfg.seed).fork(1);
  int64_t start_step = 0;
  double best_psnr = -1.0;

  if (cfg.resume) {
    net = load_network(last_path);
    TrainState st = load_train_state(state_path, net.parameters());
    adam = std::move(st.adam);
    data_rng.restore(st.rng_seed, st.rng_counter);
    start_step = st.step;
    best_psnr = st.best_psnr;
  } else {
    adam.init(net.parameters());
  }

  AdamConfig adam_cfg;
  adam_cfg.lr = cfg.lr;

  TrainResult result;
  result.best_psnr = best_psnr;
  if (csv && start_step == 0) *csv << "step,loss,psnr_val,lr,seconds\n";

  const auto t0 = std::chrono::steady_clock::now();
  auto params = net.parameters();

  for (int64_t step = start_step + 1; step <= cfg.steps; ++step) {
    double lr_now = cfg.lr;
    if (cfg.cosine_decay)
      lr_now = cfg.lr * 0.5 * (1.0 + std::cos(3.141592653589793 *
                                              static_cast<double>(step - 1) / cfg.steps));
    adam_cfg.lr = lr_now;

    double loss_value = 0.0;
    try {
      std::vector<FrameSequence> batch;
      batch.reserve(cfg.batch);
      for (int b = 0; b < cfg.batch; ++b)
        batch.push_back(train_data.sample(data_rng, net_cfg.frames, cfg.lr_patch));
      auto [packed, target] = pack_batch(batch);

      Tape<float> tp;
      Var out = net.forward(tp, tp.leaf(std::move(packed)), cfg.batch);
      Var loss = charbonnier_loss(tp, out, target);
      loss_value = tp.value(loss)[0];
      if (!std::isfinite(loss_value)) throw numeric_error("train: non-finite loss");
      net.zero_grad();
      tp.backward(loss);
      clip_global_grad_norm(params, cfg.grad_clip);
      adam_step(params, adam, adam_cfg);
    } catch (const numeric_error&) {
      // halt; the last good checkpoint on disk stays as-is
      result.halted_non_finite = true;
      result.steps_run = static_cast<int>(step - 1);
      return result;
    }

    result.loss_curve.push_back(loss_value);
    result.final_loss = loss_value;
    result.steps_run = static_cast<int>(step);

    bool validated = false;
    double val = 0.0;
    if (step % cfg.val_interval == 0 || step == cfg.steps) {
      val = validation_psnr(net, val_data);
      validated = true;
      result.val_curve.emplace_back(static_cast<int>(step), val);
      if (val > result.best_psnr) {
        result.best_psnr = val;
        if (persist) save_network(best_path, net);
      }
    }
    if (persist && (step % cfg.checkpoint_interval == 0 || step == cfg.steps)) {
      save_network(last_path, net);
      save_train_state(state_path, step, data_rng, adam, result.best_psnr, params);
    }
    if (csv) {
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      (*csv) << step << "," << loss_value << ",";
      if (validated) (*csv) << val;
      (*csv) << "," << lr_now << "," << secs << "\n";
    }
  }
  return result;
}

}  // namespace dksan
