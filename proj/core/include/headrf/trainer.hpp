// Copyright 2026 The headrf Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "headrf/avatar.hpp"
#include "headrf/objectives.hpp"

namespace headrf {

enum class HardSurfaceMode { kPerRay, kPerSample };

struct TrainConfig {
  double lr = 5e-4;
  int iterations = 5000;
  int rays_per_batch = 1024;
  LossWeights weights;
  AblationFlags flags;
  std::uint64_t seed = 7;
  int checkpoint_interval = 1000;  // 0 disables intermediate checkpoints
  HardSurfaceMode hard_mode = HardSurfaceMode::kPerRay;
  int edge_rays = 16;
  int edge_samples = 32;
  ModelConfig model;
  int threads = 1;

  /// Throws ContractViolation on invalid values.
  void validate() const;
  /// lambda values after the no_reg_losses flag.
  LossWeights effective_weights() const;
};

/// One row of the training log.
struct StepRecord {
  int step = 0;
  int frame = 0;
  double photometric = 0.0;
  std::optional<double> hard;
  std::optional<double> edge;
  double total = 0.0;
};

/// Frame and pixel draws of one step; identical across runs sharing a seed.
struct StepDraw {
  int frame = 0;
  std::vector<int> pixels;
};

/// Deterministic draw for `step` (1-based) from the training frames.
StepDraw draw_step(std::uint64_t seed, int step, const std::vector<int>& train_frames, int pixels_per_frame,
                   int rays);

/// Generator for one (seed, purpose, step) triple.
std::mt19937_64 step_stream(std::uint64_t seed, std::uint64_t purpose, std::uint64_t step);

struct TrainerState;

/// Training loop over a scene. Construct, optionally `resume`, then `run`.
class Trainer {
 public:
  Trainer(const SceneManifest& manifest, const TrainConfig& config);
  ~Trainer();
  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  /// One optimization step; returns its log row. Throws NonFiniteError
  /// naming the step and the failing component.
  StepRecord step();
  /// Runs until `config.iterations` steps are complete. Writes log.csv,
  /// run.json and checkpoint.bin under `out_dir` when it is non-empty.
  std::vector<StepRecord> run(const std::filesystem::path& out_dir = {},
                              const std::function<void(const StepRecord&)>& on_step = {});

  /// Parameters, optimizer moments and the step counter.
  std::vector<NamedArray> checkpoint() const;
  void save_checkpoint(const std::filesystem::path& path) const;
  /// Restores a checkpoint written by `save_checkpoint` for the same model
  /// shape; throws CheckpointError when it does not fit.
  void resume(const std::filesystem::path& path);
  void restore(const std::vector<NamedArray>& arrays);

  int completed_steps() const;
  HeadAvatar& model();
  const HeadAvatar& model() const;
  const TrainConfig& config() const;
  /// Latest gradient norm per parameter group.
  const std::vector<double>& group_grad_norms() const;
  std::uint64_t draw_digest() const;

 private:
  std::unique_ptr<TrainerState> state_;
};

/// Writes the step log in CSV: step,frame,L_p,L_hard,L_edge,total
void write_log_csv(const std::filesystem::path& path, const std::vector<StepRecord>& log);

struct FrameMetrics {
  int frame = 0;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct EvalTable {
  Split split = Split::kTrain;
  std::vector<FrameMetrics> rows;
  double mean_psnr = 0.0;  // NaN for an empty split
  double mean_ssim = 0.0;
};

/// Renders every frame of `split` and scores it against the stored image
/// (raw dump when present).
EvalTable evaluate(const HeadAvatar& model, const SceneManifest& manifest, Split split, int threads = 1,
                   int rays_per_batch = 1024);
/// Per-frame rows then a "mean" row.
void write_eval_csv(const std::filesystem::path& path, const EvalTable& table);

/// Loads `checkpoint` into a model built from `config` for `manifest`.
/// Throws CheckpointError when shapes or names do not match.
HeadAvatar load_model(const SceneManifest& manifest, const TrainConfig& config,
                      const std::filesystem::path& checkpoint);

struct AblationRow {
  std::string name;
  AblationFlags flags;
  double psnr = 0.0;
  double ssim = 0.0;
  std::uint64_t draw_digest = 0;
};

/// Trains the full model and each ablation with the same seed and scores
/// them on `split`. Rows: full, no_semantic, no_expression, no_reg_losses, no_displacement.
std::vector<AblationRow> ablation_suite(const SceneManifest& manifest, const TrainConfig& base, Split split,
                                        const std::filesystem::path& out_dir = {});
void write_ablation_csv(const std::filesystem::path& path, const std::vector<AblationRow>& rows);

/// Resolved config as JSON text.
std::string config_json(const TrainConfig& config);
/// Inverse of `config_json`; keys absent from `text` keep their defaults.
/// Throws std::runtime_error on malformed input.
TrainConfig config_from_json(const std::string& text);

}  // namespace headrf
