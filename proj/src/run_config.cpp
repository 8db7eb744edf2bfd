// Copyright 2026 the dksan authors
// SPDX-License-Identifier: Apache-2.0

#include "dksan/run_config.hpp"

#include <fstream>
#include <sstream>

namespace dksan {

namespace {

int to_int(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const int out = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw contract_error("config: " + key + " expects an integer, got '" + v + "'");
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw contract_error("config: " + key + " expects a number, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  throw contract_error("config: " + key + " expects a boolean, got '" + v + "'");
}

std::vector<int> to_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(to_int(key, item));
  if (out.empty()) throw contract_error("config: " + key + " expects a comma list");
  return out;
}

}  // namespace

RunConfig RunConfig::preset(const std::string& name) {
  RunConfig c;
  if (name == "desk") {
    c.net = NetworkConfig::desk();
    c.train = TrainConfig{};
  } else if (name == "paper") {
    c.net = NetworkConfig::paper();
    c.train = TrainConfig{};
    c.train.steps = 115000;
    c.train.batch = 16;
    c.train.lr_patch = 32;
    c.synth_lr_size = 48;
  } else {
    throw contract_error("unknown preset '" + name + "' (expected desk or paper)");
  }
  return c;
}

const std::vector<std::string>& RunConfig::valid_keys() {
  static const std::vector<std::string> keys = {
      "preset",         "channels",        "frames",
      "levels",         "rcab_counts",     "feat_resblocks",
      "dk_scope",       "dk_predictor_depth", "use_align",
      "use_dksa",       "use_channel_attention", "dksa_single_map",
      "lr",             "steps",           "batch",
      "seed",           "checkpoint_interval", "val_interval",
      "lr_patch",       "grad_clip",       "lr_decay",
      "data",           "out",             "threads",
      "psnr_luma",      "synth_videos",    "synth_frames",
      "synth_lr_size",  "noise_sigma"};
  return keys;
}

void RunConfig::apply(const std::string& key, const std::string& value) {
  if (key == "preset") {
    *this = preset(value);
  } else if (key == "channels") {
    net.channels = to_int(key, value);
  } else if (key == "frames") {
    net.frames = to_int(key, value);
  } else if (key == "levels") {
    net.levels = to_int(key, value);
    if (static_cast<int>(net.rcab_counts.size()) != net.levels)
      net.rcab_counts.assign(net.levels, 3);
  } else if (key == "rcab_counts") {
    net.rcab_counts = to_int_list(key, value);
  } else if (key == "feat_resblocks") {
    net.feat_resblocks = to_int(key, value);
  } else if (key == "dk_scope") {
    net.dk_scope = to_int(key, value);
  } else if (key == "dk_predictor_depth") {
    net.dk_predictor_depth = to_int(key, value);
  } else if (key == "use_align") {
    net.use_align = to_bool(key, value);
  } else if (key == "use_dksa") {
    net.use_dksa = to_bool(key, value);
  } else if (key == "use_channel_attention") {
    net.use_channel_attention = to_bool(key, value);
  } else if (key == "dksa_single_map") {
    net.dksa_single_map = to_bool(key, value);
  } else if (key == "lr") {
    train.lr = to_double(key, value);
  } else if (key == "steps") {
    train.steps = to_int(key, value);
  } else if (key == "batch") {
    train.batch = to_int(key, value);
  } else if (key == "seed") {
    train.seed = static_cast<uint64_t>(to_int(key, value));
  } else if (key == "checkpoint_interval") {
    train.checkpoint_interval = to_int(key, value);
  } else if (key == "val_interval") {
    train.val_interval = to_int(key, value);
  } else if (key == "lr_patch") {
    train.lr_patch = to_int(key, value);
  } else if (key == "grad_clip") {
    train.grad_clip = to_double(key, value);
  } else if (key == "lr_decay") {
    if (value == "none")
      train.cosine_decay = false;
    else if (value == "cosine")
      train.cosine_decay = true;
    else
      throw contract_error("config: lr_decay expects none|cosine, got '" + value + "'");
  } else if (key == "data") {
    data = value;
  } else if (key == "out") {
    out = value;
  } else if (key == "threads") {
    threads = to_int(key, value);
  } else if (key == "psnr_luma") {
    psnr_luma = to_bool(key, value);
  } else if (key == "synth_videos") {
    synth_videos = to_int(key, value);
  } else if (key == "synth_frames") {
    synth_frames = to_int(key, value);
  } else if (key == "synth_lr_size") {
    synth_lr_size = to_int(key, value);
  } else if (key == "noise_sigma") {
    noise_sigma = to_double(key, value);
  } else {
    std::string msg = "unknown config key '" + key + "'; valid keys:";
    for (const auto& k : valid_keys()) msg += " " + k;
    throw contract_error(msg);
  }
}

void RunConfig::apply_line(const std::string& line) {
  const auto eq = line.find('=');
  if (eq == std::string::npos)
    throw contract_error("config: expected key=value, got '" + line + "'");
  std::string key = line.substr(0, eq);
  std::string value = line.substr(eq + 1);
  auto strip = [](std::string& s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.erase(s.begin());
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
      s.pop_back();
  };
  strip(key);
  strip(value);
  apply(key, value);
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw contract_error("config file not found: " + path);
  std::string line;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    std::string stripped = line;
    const auto hash = stripped.find('#');
    if (hash != std::string::npos) stripped.resize(hash);
    bool blank = true;
    for (char ch : stripped)
      if (ch != ' ' && ch != '\t' && ch != '\r') blank = false;
    if (blank) continue;
    try {
      apply_line(stripped);
    } catch (const contract_error& e) {
      throw contract_error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

std::string RunConfig::describe() const {
  std::ostringstream os;
  os << net.describe();
  os << "lr=" << train.lr << "\n"
     << "steps=" << train.steps << "\n"
     << "batch=" << train.batch << "\n"
     << "seed=" << train.seed << "\n"
     << "checkpoint_interval=" << train.checkpoint_interval << "\n"
     << "val_interval=" << train.val_interval << "\n"
     << "lr_patch=" << train.lr_patch << "\n"
     << "grad_clip=" << train.grad_clip << "\n"
     << "lr_decay=" << (train.cosine_decay ? "cosine" : "none") << "\n"
     << "data=" << data << "\n"
     << "out=" << out << "\n"
     << "threads=" << threads << "\n"
     << "psnr_luma=" << (psnr_luma ? 1 : 0) << "\n"
     << "synth_videos=" << synth_videos << "\n"
     << "synth_frames=" << synth_frames << "\n"
     << "synth_lr_size=" << synth_lr_size << "\n"
     << "noise_sigma=" << noise_sigma << "\n";
  return os.str();
}

}  // namespace dksan
