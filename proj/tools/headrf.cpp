// Copyright 2026 The headrf Authors.
// SPDX-License-Identifier: Apache-2.0
//
// headrf: dataset generation, training, rendering, evaluation and ablations.

#include <cmath>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "headrf/dataset.hpp"
#include "headrf/image_io.hpp"
#include "headrf/parallel.hpp"
#include "headrf/selftest.hpp"
#include "headrf/trainer.hpp"

namespace fs = std::filesystem;
using namespace headrf;

namespace {

enum Exit : int { kOk = 0, kCheckFailed = 1, kIoConfig = 2, kIncompatible = 3 };

/// Error carrying its exit code.
struct CliError : std::runtime_error {
  CliError(Exit code, const std::string& what) : std::runtime_error(what), code(code) {}
  Exit code;
};

void init_logging() {
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("HEADRF_LOG_LEVEL");
  if (env == nullptr) return;
  const auto level = spdlog::level::from_str(env);
  if (level == spdlog::level::off && std::string(env) != "off") {
    spdlog::warn("HEADRF_LOG_LEVEL={} not recognized; keeping info", env);
    return;
  }
  spdlog::set_level(level);
}

std::vector<double> parse_numbers(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw CliError(kIoConfig, fmt::format("{}: cannot parse '{}' as a number", what, item));
    }
  }
  return out;
}

/// "frame:N" -> N
std::optional<int> frame_ref(const std::string& text) {
  if (text.rfind("frame:", 0) != 0) return std::nullopt;
  try {
    return std::stoi(text.substr(6));
  } catch (const std::exception&) {
    throw CliError(kIoConfig, fmt::format("bad frame reference '{}'", text));
  }
}

const Frame& frame_at(const SceneManifest& m, int index) {
  if (index < 0 || static_cast<std::size_t>(index) >= m.frames.size()) {
    throw CliError(kIoConfig, fmt::format("frame {} not in dataset ({} frames)", index, m.frames.size()));
  }
  return m.frames[static_cast<std::size_t>(index)];
}

SceneManifest open_dataset(const fs::path& dir) {
  if (dir.empty()) throw CliError(kIoConfig, "--data is required");
  if (!fs::exists(dir / "manifest.json")) throw CliError(kIoConfig, fmt::format("no manifest.json in {}", dir.string()));
  try {
    return load_manifest(dir);
  } catch (const std::exception& e) {
    throw CliError(kIoConfig, fmt::format("cannot load dataset {}: {}", dir.string(), e.what()));
  }
}

void ensure_dir(const fs::path& dir) {
  if (dir.empty()) throw CliError(kIoConfig, "--out-dir is required");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw CliError(kIoConfig, fmt::format("cannot create {}: {}", dir.string(), ec.message()));
  const fs::path probe = dir / ".headrf_write_probe";
  std::ofstream(probe) << "";
  if (!fs::exists(probe)) throw CliError(kIoConfig, fmt::format("{} is not writable", dir.string()));
  fs::remove(probe, ec);
}

/// Options that feed a TrainConfig. Each applies only when given on the
/// command line or in the config file, so a recorded run config can sit underneath.
class ConfigOptions {
 public:
  void attach(CLI::App& app) {
    add(app, "--iterations", "training steps", [](TrainConfig& c, const std::string& v) { c.iterations = std::stoi(v); });
    add(app, "--rays", "rays per batch", [](TrainConfig& c, const std::string& v) { c.rays_per_batch = std::stoi(v); });
    add(app, "--lr", "Adam learning rate", [](TrainConfig& c, const std::string& v) { c.lr = std::stod(v); });
    add(app, "--lambda1", "hard-surface weight", [](TrainConfig& c, const std::string& v) { c.weights.lambda1 = std::stod(v); });
    add(app, "--lambda2", "canonical-edge weight", [](TrainConfig& c, const std::string& v) { c.weights.lambda2 = std::stod(v); });
    add(app, "--checkpoint-interval", "steps between checkpoints (0: end only)",
        [](TrainConfig& c, const std::string& v) { c.checkpoint_interval = std::stoi(v); });
    add(app, "--hard-mode", "per_ray or per_sample", [](TrainConfig& c, const std::string& v) {
      if (v != "per_ray" && v != "per_sample") throw CliError(kIoConfig, "--hard-mode must be per_ray or per_sample");
      c.hard_mode = v == "per_ray" ? HardSurfaceMode::kPerRay : HardSurfaceMode::kPerSample;
    });
    add(app, "--edge-rays", "probe rays per step", [](TrainConfig& c, const std::string& v) { c.edge_rays = std::stoi(v); });
    add(app, "--edge-samples", "samples per probe ray", [](TrainConfig& c, const std::string& v) { c.edge_samples = std::stoi(v); });
    add(app, "--coarse", "coarse samples per ray", [](TrainConfig& c, const std::string& v) { c.model.coarse_samples = std::stoi(v); });
    add(app, "--fine", "fine samples per ray", [](TrainConfig& c, const std::string& v) { c.model.fine_samples = std::stoi(v); });
    add(app, "--voxel", "motion-volume voxel size", [](TrainConfig& c, const std::string& v) { c.model.voxel_size = std::stod(v); });
    add(app, "--conv-hidden", "diffusion hidden channels", [](TrainConfig& c, const std::string& v) { c.model.conv_hidden = std::stoi(v); });
    add(app, "--conv-out", "diffusion output channels", [](TrainConfig& c, const std::string& v) { c.model.conv_out = std::stoi(v); });
    add(app, "--test-code", "mean or zero", [](TrainConfig& c, const std::string& v) {
      if (v != "mean" && v != "zero") throw CliError(kIoConfig, "--test-code must be mean or zero");
      c.model.test_code = v == "zero" ? CodeMode::kTestZero : CodeMode::kTest;
    });
    add(app, "--deform-freqs", "deformation encoding frequencies", [](TrainConfig& c, const std::string& v) { c.model.fields.deform_freqs = std::stoi(v); });
    add(app, "--deform-depth", "deformation hidden layers", [](TrainConfig& c, const std::string& v) { c.model.fields.deform_depth = std::stoi(v); });
    add(app, "--deform-width", "deformation layer width", [](TrainConfig& c, const std::string& v) { c.model.fields.deform_width = std::stoi(v); });
    add(app, "--pos-freqs", "position encoding frequencies", [](TrainConfig& c, const std::string& v) { c.model.fields.pos_freqs = std::stoi(v); });
    add(app, "--dir-freqs", "direction encoding frequencies", [](TrainConfig& c, const std::string& v) { c.model.fields.dir_freqs = std::stoi(v); });
    add(app, "--trunk-depth", "radiance trunk layers", [](TrainConfig& c, const std::string& v) { c.model.fields.trunk_depth = std::stoi(v); });
    add(app, "--trunk-width", "radiance trunk width", [](TrainConfig& c, const std::string& v) { c.model.fields.trunk_width = std::stoi(v); });
    add(app, "--skip-layer", "trunk layer fed the encoded input again", [](TrainConfig& c, const std::string& v) { c.model.fields.skip_layer = std::stoi(v); });
    add(app, "--color-width", "color head width", [](TrainConfig& c, const std::string& v) { c.model.fields.color_width = std::stoi(v); });
    add(app, "--appearance-dim", "appearance code length", [](TrainConfig& c, const std::string& v) { c.model.fields.appearance_dim = std::stoi(v); });
    add(app, "--density-bias", "initial density-head bias", [](TrainConfig& c, const std::string& v) { c.model.fields.density_bias = std::stod(v); });
    flag(app, "--no-semantic", "zero the semantic channels", [](TrainConfig& c) { c.flags.no_semantic = true; });
    flag(app, "--no-expression", "zero the expression channels", [](TrainConfig& c) { c.flags.no_expression = true; });
    flag(app, "--no-reg-losses", "drop the hard-surface and edge terms", [](TrainConfig& c) { c.flags.no_reg_losses = true; });
    flag(app, "--no-displacement", "zero the displacement channels", [](TrainConfig& c) { c.flags.no_displacement = true; });
  }

  void apply(TrainConfig& c) const {
    for (const auto& e : entries_) {
      if (e.option->count() == 0) continue;
      try {
        e.apply(c, e.value);
      } catch (const CliError&) {
        throw;
      } catch (const std::exception&) {
        throw CliError(kIoConfig, fmt::format("{}: invalid value '{}'", e.option->get_name(), e.value));
      }
    }
    for (const auto& f : flags_) {
      if (f.option->count() > 0 && f.option->as<bool>()) f.apply(c);
    }
  }

 private:
  struct Entry {
    CLI::Option* option;
    std::string value;
    std::function<void(TrainConfig&, const std::string&)> apply;
  };
  struct Flag {
    CLI::Option* option;
    std::function<void(TrainConfig&)> apply;
  };

  void add(CLI::App& app, const std::string& name, const std::string& help,
           std::function<void(TrainConfig&, const std::string&)> fn) {
    auto& e = entries_.emplace_back(Entry{nullptr, {}, std::move(fn)});
    e.option = app.add_option(name, e.value, help);
  }
  void flag(CLI::App& app, const std::string& name, const std::string& help, std::function<void(TrainConfig&)> fn) {
    flags_.push_back(Flag{app.add_flag(name, help), std::move(fn)});
  }

  std::deque<Entry> entries_;
  std::vector<Flag> flags_;
};

struct Globals {
  std::uint64_t seed = 7;
  int threads = 0;
  fs::path out_dir;
  fs::path data;
  CLI::Option* seed_opt = nullptr;
};

/// Run config for a checkpoint: run.json beside it when present, then flags.
TrainConfig resolve_config(const Globals& g, const ConfigOptions& opts, const fs::path& checkpoint) {
  TrainConfig c;
  const fs::path recorded = checkpoint.parent_path() / "run.json";
  if (!checkpoint.empty() && fs::exists(recorded)) {
    std::ifstream in(recorded);
    std::stringstream ss;
    ss << in.rdbuf();
    try {
      c = config_from_json(ss.str());
    } catch (const std::exception& e) {
      throw CliError(kIoConfig, e.what());
    }
  }
  if (g.seed_opt->count() > 0) c.seed = g.seed;
  c.threads = resolve_threads(g.threads);
  opts.apply(c);
  try {
    c.validate();
  } catch (const ContractViolation& e) {
    throw CliError(kIoConfig, e.what());
  }
  return c;
}

HeadAvatar open_model(const SceneManifest& m, const TrainConfig& c, const fs::path& checkpoint) {
  if (checkpoint.empty()) throw CliError(kIoConfig, "--checkpoint is required");
  if (!fs::exists(checkpoint)) throw CliError(kIoConfig, fmt::format("checkpoint {} does not exist", checkpoint.string()));
  try {
    return load_model(m, c, checkpoint);
  } catch (const CheckpointError& e) {
    throw CliError(kIncompatible, fmt::format("checkpoint {} does not fit this model: {}", checkpoint.string(), e.what()));
  } catch (const ContractViolation& e) {
    throw CliError(kIncompatible, fmt::format("checkpoint {} does not fit this dataset: {}", checkpoint.string(), e.what()));
  }
}

int cmd_gen_data(const Globals& g, GeneratorSettings s) {
  ensure_dir(g.out_dir);
  s.seed = g.seed;
  s.threads = resolve_threads(g.threads);
  try {
    s.validate();
  } catch (const ContractViolation& e) {
    throw CliError(kIoConfig, e.what());
  }
  const SceneManifest m = generate_dataset(s, g.out_dir);
  fmt::print("dataset {}: {} train, {} test_seen_expr, {} test_unseen_expr frames at {}x{}\n", g.out_dir.string(),
             m.frames_in(Split::kTrain).size(), m.frames_in(Split::kTestSeen).size(),
             m.frames_in(Split::kTestUnseen).size(), s.width, s.height);
  return kOk;
}

int cmd_train(const Globals& g, const ConfigOptions& opts, const fs::path& resume) {
  const SceneManifest m = open_dataset(g.data);
  ensure_dir(g.out_dir);
  const TrainConfig c = resolve_config(g, opts, resume);
  Trainer trainer(m, c);
  if (!resume.empty()) {
    if (!fs::exists(resume)) throw CliError(kIoConfig, fmt::format("checkpoint {} does not exist", resume.string()));
    try {
      trainer.resume(resume);
    } catch (const CheckpointError& e) {
      throw CliError(kIncompatible, fmt::format("cannot resume from {}: {}", resume.string(), e.what()));
    }
    spdlog::info("resumed at step {}", trainer.completed_steps());
  }
  const int report = std::max(1, c.iterations / 20);
  const auto log = trainer.run(g.out_dir, [&](const StepRecord& r) {
    if (r.step % report == 0) spdlog::info("step {:>6}  L_p {:.5f}  total {:.5f}", r.step, r.photometric, r.total);
  });
  fmt::print("trained {} steps; final photometric {:.6f}; outputs in {}\n", trainer.completed_steps(),
             log.empty() ? std::nan("") : log.back().photometric, g.out_dir.string());
  return kOk;
}

int cmd_evaluate(const Globals& g, const ConfigOptions& opts, const fs::path& checkpoint, const std::string& split_text) {
  const SceneManifest m = open_dataset(g.data);
  ensure_dir(g.out_dir);
  Split split;
  try {
    split = parse_split(split_text);
  } catch (const std::exception&) {
    throw CliError(kIoConfig, fmt::format("unknown split '{}'", split_text));
  }
  const TrainConfig c = resolve_config(g, opts, checkpoint);
  const HeadAvatar model = open_model(m, c, checkpoint);
  const EvalTable t = evaluate(model, m, split, c.threads);
  const fs::path out = g.out_dir / fmt::format("eval_{}.csv", split_name(split));
  write_eval_csv(out, t);
  fmt::print("{}: {} frames, mean PSNR {:.3f} dB, mean SSIM {:.4f} -> {}\n", split_name(split), t.rows.size(),
             t.mean_psnr, t.mean_ssim, out.string());
  return kOk;
}

int cmd_render(const Globals& g, const ConfigOptions& opts, const fs::path& checkpoint, const std::string& psi_text,
               const std::string& pose_text, const std::string& code_text, const std::string& name) {
  const SceneManifest m = open_dataset(g.data);
  ensure_dir(g.out_dir);
  const TrainConfig c = resolve_config(g, opts, checkpoint);
  const HeadAvatar model = open_model(m, c, checkpoint);

  ExpressionParams psi;
  std::optional<int> code_frame;
  if (const auto ref = frame_ref(psi_text)) {
    psi = frame_at(m, *ref).psi;
    code_frame = ref;
  } else {
    const auto v = parse_numbers(psi_text, "--psi");
    if (static_cast<int>(v.size()) != m.head.expression_dim()) {
      throw CliError(kIoConfig, fmt::format("--psi needs {} values, got {}", m.head.expression_dim(), v.size()));
    }
    psi.values = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  }

  Camera camera = m.frames.front().camera;
  RigidPose pose;
  if (const auto ref = frame_ref(pose_text)) {
    camera = frame_at(m, *ref).camera;
    pose = frame_at(m, *ref).head_pose;
  } else {
    const auto v = parse_numbers(pose_text, "--pose");
    if (v.size() != 3 && v.size() != 6) {
      throw CliError(kIoConfig, "--pose takes yaw,pitch,roll in degrees, optionally followed by tx,ty,tz");
    }
    const double rad = std::numbers::pi / 180.0;
    const Eigen::Vector3d t = v.size() == 6 ? Eigen::Vector3d(v[3], v[4], v[5]) : Eigen::Vector3d::Zero();
    pose = RigidPose::from_euler(v[0] * rad, v[1] * rad, v[2] * rad, t);
  }

  if (code_text == "mean") {
    code_frame.reset();
  } else if (!code_text.empty()) {
    code_frame = frame_ref(code_text);
    if (!code_frame) throw CliError(kIoConfig, "--code takes mean or frame:N");
  }
  const Tensor code = code_frame ? model.appearance(frame_at(m, *code_frame), true)
                                 : model.codes().code(0, model.config().test_code);
  const Image img = model.render_view(camera, pose, psi, code, 1024, c.threads);
  const fs::path out = g.out_dir / name;
  write_png(out, img);
  fmt::print("wrote {}\n", out.string());
  return kOk;
}

int cmd_ablate(const Globals& g, const ConfigOptions& opts, const std::string& split_text) {
  const SceneManifest m = open_dataset(g.data);
  ensure_dir(g.out_dir);
  Split split;
  try {
    split = parse_split(split_text);
  } catch (const std::exception&) {
    throw CliError(kIoConfig, fmt::format("unknown split '{}'", split_text));
  }
  const TrainConfig c = resolve_config(g, opts, {});
  const auto rows = ablation_suite(m, c, split, g.out_dir);
  const fs::path out = g.out_dir / "ablation.csv";
  write_ablation_csv(out, rows);
  for (const auto& r : rows) fmt::print("{:<16} PSNR {:7.3f}  SSIM {:.4f}\n", r.name, r.psnr, r.ssim);
  fmt::print("-> {}\n", out.string());
  return kOk;
}

int cmd_selftest() {
  const auto report = run_selftest();
  int failed = 0;
  for (const auto& c : report) {
    fmt::print("{} {:<36} {}\n", c.passed ? "PASS" : "FAIL", c.name, c.detail);
    failed += c.passed ? 0 : 1;
  }
  fmt::print("{} checks, {} failed\n", report.size(), failed);
  return failed == 0 ? kOk : kCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  init_logging();
  tune_allocator();

  CLI::App app{"Deformable head radiance fields: data generation, training and evaluation"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "INI file of option values (command-line flags win)");

  Globals g;
  g.seed_opt = app.add_option("--seed", g.seed, "seed for every random stream");
  app.add_option("--threads", g.threads, "worker threads (0: all cores)");
  app.add_option("--out-dir", g.out_dir, "directory receiving all outputs");
  app.add_option("--data", g.data, "dataset directory (from gen-data)");
  ConfigOptions opts;
  opts.attach(app);

  GeneratorSettings gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "render a synthetic dataset");
  gen_cmd->add_option("--width", gen.width, "image width");
  gen_cmd->add_option("--height", gen.height, "image height");
  gen_cmd->add_option("--train-frames", gen.n_train, "training frames");
  gen_cmd->add_option("--seen-frames", gen.n_test_seen, "test frames with training expressions");
  gen_cmd->add_option("--unseen-frames", gen.n_test_unseen, "test frames with unseen expressions");
  gen_cmd->add_option("--quadrature", gen.quadrature_samples, "samples per ground-truth ray");
  gen_cmd->add_option("--yaw", gen.yaw_degrees, "max head yaw in degrees");
  gen_cmd->add_option("--pitch", gen.pitch_degrees, "max head pitch in degrees");
  gen_cmd->add_flag("!--no-raw", gen.write_raw, "skip the raw float dumps");

  fs::path checkpoint;
  std::string split = "test_unseen_expr", psi_text, pose_text, code_text, image_name = "render.png";
  auto* train_cmd = app.add_subcommand("train", "train a model on a dataset");
  train_cmd->add_option("--resume", checkpoint, "checkpoint to continue from");
  auto* eval_cmd = app.add_subcommand("evaluate", "score a checkpoint on one split");
  eval_cmd->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
  eval_cmd->add_option("--split", split, "train, test_seen_expr or test_unseen_expr");
  auto* render_cmd = app.add_subcommand("render", "render one image for a pose and expression");
  render_cmd->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
  render_cmd->add_option("--psi", psi_text, "comma-separated expression or frame:N")->required();
  render_cmd->add_option("--pose", pose_text, "yaw,pitch,roll[,tx,ty,tz] (degrees) or frame:N")->required();
  render_cmd->add_option("--code", code_text, "appearance code: mean or frame:N");
  render_cmd->add_option("--name", image_name, "output file name inside --out-dir");
  auto* ablate_cmd = app.add_subcommand("ablate", "train and score the full model and four ablations");
  ablate_cmd->add_option("--split", split, "split to score");
  app.add_subcommand("selftest", "closed-form and oracle checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::FileError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIoConfig;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kIoConfig;
  }

  try {
    if (*gen_cmd) return cmd_gen_data(g, gen);
    if (*train_cmd) return cmd_train(g, opts, checkpoint);
    if (*eval_cmd) return cmd_evaluate(g, opts, checkpoint, split);
    if (*render_cmd) return cmd_render(g, opts, checkpoint, psi_text, pose_text, code_text, image_name);
    if (*ablate_cmd) return cmd_ablate(g, opts, split);
    return cmd_selftest();
  } catch (const CliError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code;
  } catch (const NonFiniteError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kCheckFailed;
  } catch (const CheckpointError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIncompatible;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIoConfig;
  }
}
