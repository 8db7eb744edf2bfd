// Copyright 2026 the dksan authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: train / infer / eval / gradcheck / synth.
// Exit codes: 0 ok, 1 config error, 2 data error, 3 numeric failure.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "dksan/gradcheck.hpp"
#include "dksan/loss_metrics.hpp"
#include "dksan/ppm.hpp"
#include "dksan/run_config.hpp"
#include "dksan/threading.hpp"

namespace fs = std::filesystem;
using namespace dksan;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct TrainArgs {
  std::string config_path;
  std::string preset = "desk";
  std::string data;
  std::string out;
  int64_t seed = -1;
  int steps = -1;
  int threads = -1;
  bool resume = false;
  bool print_config = false;
  std::vector<std::string> overrides;
};

RunConfig resolve_config(const TrainArgs& a) {
  RunConfig cfg = RunConfig::preset(a.preset);
  if (!a.config_path.empty()) cfg.load_file(a.config_path);
  if (!a.data.empty()) cfg.apply("data", a.data);
  if (!a.out.empty()) cfg.apply("out", a.out);
  if (a.seed >= 0) cfg.apply("seed", std::to_string(a.seed));
  if (a.steps >= 0) cfg.apply("steps", std::to_string(a.steps));
  if (a.threads >= 0) cfg.apply("threads", std::to_string(a.threads));
  for (const auto& kv : a.overrides) cfg.apply_line(kv);
  return cfg;
}

VideoDataset build_dataset(const RunConfig& cfg, uint64_t seed_offset, int n_videos) {
  if (cfg.data.rfind("synth:", 0) == 0) {
    const std::string pattern = cfg.data.substr(6);
    return VideoDataset::synth(pattern, n_videos, cfg.synth_frames, cfg.synth_lr_size,
                               cfg.net.scale(), cfg.noise_sigma,
                               cfg.train.seed + seed_offset);
  }
  return VideoDataset::from_disk(cfg.data);
}

int cmd_train(const TrainArgs& args) {
  RunConfig cfg = resolve_config(args);
  if (args.print_config) {
    std::cout << cfg.describe();
    return kExitOk;
  }
  if (cfg.data.empty())
    throw contract_error("train: --data is required (directory or synth:<pattern>)");
  cfg.net.validate();
  cfg.train.validate();
  set_thread_cap(cfg.threads);
  cfg.train.out_dir = cfg.out;
  cfg.train.resume = args.resume;

  VideoDataset train_data, val_data;
  if (cfg.data.rfind("synth:", 0) == 0) {
    train_data = build_dataset(cfg, 0, cfg.synth_videos);
    val_data = build_dataset(cfg, 0x5eed, std::max(2, cfg.synth_videos / 4));
  } else {
    train_data = VideoDataset::from_disk(cfg.data);
    val_data = train_data;
    if (train_data.videos.size() >= 2) {
      // hold out the last video for validation
      VideoDataset held;
      held.scale = train_data.scale;
      held.videos.push_back(train_data.videos.back());
      for (const auto& [vi, start] : train_data.windows)
        if (vi == static_cast<int>(train_data.videos.size()) - 1)
          held.windows.emplace_back(0, start);
      train_data.videos.pop_back();
      std::erase_if(train_data.windows, [&](const std::pair<int, int>& w) {
        return w.first == static_cast<int>(train_data.videos.size());
      });
      val_data = std::move(held);
    }
  }

  fs::create_directories(cfg.out);
  std::ofstream csv(cfg.out + "/log.csv", args.resume ? std::ios::app : std::ios::trunc);
  if (!csv) throw io_error(cfg.out + "/log.csv: cannot open for writing");

  TrainResult res = train(cfg.train, cfg.net, train_data, val_data, &csv);
  std::cout << "steps " << res.steps_run << "  final loss " << res.final_loss
            << "  best val PSNR " << res.best_psnr << " dB\n";
  std::cout << "checkpoints under " << cfg.out << " (last.dksn, best.dksn)\n";
  if (res.halted_non_finite) {
    std::cerr << "training halted: non-finite loss or gradient; last good checkpoint "
                 "kept\n";
    return kExitNumeric;
  }
  return kExitOk;
}

std::vector<std::string> list_ppm(const std::string& dir) {
  if (!fs::is_directory(dir)) throw io_error(dir + ": not a directory");
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".ppm") names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  return names;
}

int cmd_infer(const std::string& checkpoint, const std::string& frames_dir,
              const std::string& out_dir, int threads) {
  set_thread_cap(threads);
  Network<float> net = load_network(checkpoint);
  const int F = net.cfg.frames, N = F / 2;
  const auto names = list_ppm(frames_dir);
  if (names.empty()) throw io_error(frames_dir + ": no .ppm frames");
  std::vector<Tensor<float>> frames;
  for (const auto& n : names) frames.push_back(load_ppm(frames_dir + "/" + n));
  fs::create_directories(out_dir);

  const int total = static_cast<int>(frames.size());
  for (int ref = 0; ref < total; ++ref) {
    // sliding window, stride 1, edge-replicated
    std::vector<Tensor<float>> window;
    for (int f = ref - N; f <= ref + N; ++f)
      window.push_back(frames[std::clamp(f, 0, total - 1)]);
    const auto t0 = std::chrono::steady_clock::now();
    Tensor<float> sr = super_resolve(net, window);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    save_ppm(out_dir + "/" + names[ref], sr);
    std::printf("%s  %.3f s/f\n", names[ref].c_str(), secs);
  }
  return kExitOk;
}

double luma_psnr(const Tensor<float>& a, const Tensor<float>& b) {
  auto to_luma = [](const Tensor<float>& t) {
    Tensor<float> y(Shape{t.n(), 1, t.h(), t.w()});
    for (int n = 0; n < t.n(); ++n)
      for (int yy = 0; yy < t.h(); ++yy)
        for (int x = 0; x < t.w(); ++x)
          y.at(n, 0, yy, x) = 0.299f * t.at(n, 0, yy, x) + 0.587f * t.at(n, 1, yy, x) +
                              0.114f * t.at(n, 2, yy, x);
    return y;
  };
  return psnr(to_luma(a), to_luma(b));
}

int cmd_eval(const std::string& pred_dir, const std::string& gt_dir,
             const std::string& csv_path, bool luma) {
  const auto pred_names = list_ppm(pred_dir);
  const auto gt_names = list_ppm(gt_dir);
  std::vector<std::string> missing;
  for (const auto& n : pred_names)
    if (std::find(gt_names.begin(), gt_names.end(), n) == gt_names.end())
      missing.push_back(n + " (no ground truth)");
  for (const auto& n : gt_names)
    if (std::find(pred_names.begin(), pred_names.end(), n) == pred_names.end())
      missing.push_back(n + " (no prediction)");

  std::vector<std::pair<std::string, double>> rows;
  for (const auto& n : pred_names) {
    if (std::find(gt_names.begin(), gt_names.end(), n) == gt_names.end()) continue;
    const Tensor<float> p = load_ppm(pred_dir + "/" + n);
    const Tensor<float> g = load_ppm(gt_dir + "/" + n);
    if (p.shape() != g.shape()) {
      missing.push_back(n + " (shape mismatch)");
      continue;
    }
    rows.emplace_back(n, luma ? luma_psnr(p, g) : psnr(p, g));
  }
  if (rows.empty()) throw io_error("eval: no comparable frame pairs");

  std::printf("%-28s %10s\n", "frame", "PSNR (dB)");
  double acc = 0.0;
  for (const auto& [name, db] : rows) {
    std::printf("%-28s %10.2f\n", name.c_str(), db);
    acc += db;
  }
  const double avg = acc / static_cast<double>(rows.size());
  std::printf("%-28s %10.2f\n", "Average", avg);

  if (!csv_path.empty()) {
    std::ofstream csv(csv_path, std::ios::trunc);
    csv << "frame,psnr_db\n";
    for (const auto& [name, db] : rows) csv << name << "," << db << "\n";
    csv << "Average," << avg << "\n";
  }
  if (!missing.empty()) {
    std::cerr << "excluded frames:\n";
    for (const auto& m : missing) std::cerr << "  " << m << "\n";
    return kExitData;
  }
  return kExitOk;
}

int cmd_gradcheck(bool all, const std::string& op) {
  std::vector<GradcheckReport> reports;
  if (all) {
    reports = run_all_gradchecks();
  } else {
    if (op.empty())
      throw contract_error("gradcheck: give an op name or --all");
    reports.push_back(run_gradcheck(op));
  }
  std::cout << format_gradcheck_table(reports);
  return all_passed(reports) ? kExitOk : kExitNumeric;
}

int cmd_synth(const std::string& out_dir, const std::string& pattern, int videos,
              int frames, int size, int scale, uint64_t seed, double noise) {
  VideoDataset ds = VideoDataset::synth(pattern, videos, frames, size, scale, noise, seed);
  ds.save(out_dir);
  std::cout << "wrote " << videos << " videos x " << frames << " frames (LR " << size
            << "x" << size << ", x" << scale << ") under " << out_dir << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DKSAN video super-resolution: cascaded deformable-kernel network"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  train_cmd->add_option("--config", train_args.config_path, "key=value config file");
  train_cmd->add_option("--preset", train_args.preset, "Architecture preset")
      ->check(CLI::IsMember({"desk", "paper"}))
      ->capture_default_str();
  train_cmd->add_option("--data", train_args.data,
                        "Dataset dir or synth:<checker|blobs|gradient|mix>");
  train_cmd->add_option("--out", train_args.out, "Output dir (checkpoints, log.csv)");
  train_cmd->add_option("--seed", train_args.seed, "Run seed");
  train_cmd->add_option("--steps", train_args.steps, "Total optimizer steps");
  train_cmd->add_option("--threads", train_args.threads, "Worker thread cap");
  train_cmd->add_flag("--resume", train_args.resume, "Continue from --out");
  train_cmd->add_flag("--print-config", train_args.print_config,
                      "Print the resolved config and exit");
  train_cmd->add_option("overrides", train_args.overrides,
                        "key=value overrides (last wins)");

  std::string in_checkpoint, in_frames, in_out = "sr_out";
  int in_threads = -1;
  auto* infer_cmd = app.add_subcommand("infer", "Super-resolve a frame directory");
  infer_cmd->add_option("--checkpoint", in_checkpoint, "Model checkpoint (.dksn)")
      ->required();
  infer_cmd->add_option("--frames", in_frames, "Directory of input .ppm frames")
      ->required();
  infer_cmd->add_option("--out", in_out, "Output directory")->capture_default_str();
  infer_cmd->add_option("--threads", in_threads, "Worker thread cap");

  std::string ev_pred, ev_gt, ev_csv;
  bool ev_luma = false;
  auto* eval_cmd = app.add_subcommand("eval", "PSNR of predictions vs ground truth");
  eval_cmd->add_option("--pred", ev_pred, "Directory of predicted .ppm frames")
      ->required();
  eval_cmd->add_option("--gt", ev_gt, "Directory of ground-truth .ppm frames")
      ->required();
  eval_cmd->add_option("--csv", ev_csv, "Also write results to this CSV");
  eval_cmd->add_flag("--luma", ev_luma, "PSNR on luma instead of RGB");

  bool gc_all = false;
  std::string gc_op;
  auto* gc_cmd = app.add_subcommand("gradcheck",
                                    "Certify analytic gradients against 64-bit "
                                    "central differences");
  gc_cmd->add_flag("--all", gc_all, "Run the whole registered-op suite");
  gc_cmd->add_option("op", gc_op, "Single op to check");

  std::string sy_out, sy_pattern = "mix";
  int sy_videos = 8, sy_frames = 7, sy_size = 32, sy_scale = 4;
  int64_t sy_seed = 1;
  double sy_noise = 0.0;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic PPM dataset");
  synth_cmd->add_option("--out", sy_out, "Dataset root to create")->required();
  synth_cmd->add_option("--pattern", sy_pattern, "checker|blobs|gradient|mix")
      ->capture_default_str();
  synth_cmd->add_option("--videos", sy_videos, "Video count")->capture_default_str();
  synth_cmd->add_option("--frames", sy_frames, "Frames per video")
      ->capture_default_str();
  synth_cmd->add_option("--size", sy_size, "LR frame size")->capture_default_str();
  synth_cmd->add_option("--scale", sy_scale, "Upscale factor (2,4,8,16)")
      ->capture_default_str();
  synth_cmd->add_option("--seed", sy_seed, "Generator seed")->capture_default_str();
  synth_cmd->add_option("--noise", sy_noise, "Gaussian noise sigma on LR frames")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*train_cmd) return cmd_train(train_args);
    if (*infer_cmd) return cmd_infer(in_checkpoint, in_frames, in_out, in_threads);
    if (*eval_cmd) return cmd_eval(ev_pred, ev_gt, ev_csv, ev_luma);
    if (*gc_cmd) return cmd_gradcheck(gc_all, gc_op);
    if (*synth_cmd)
      return cmd_synth(sy_out, sy_pattern, sy_videos, sy_frames, sy_size, sy_scale,
                       static_cast<uint64_t>(sy_seed), sy_noise);
  } catch (const contract_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const io_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const numeric_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitConfig;
}
