// Copyright 2026 The headrf Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "headrf/checkpoint.hpp"
#include "headrf/dataset.hpp"
#include "headrf/fields.hpp"
#include "headrf/motion_volume.hpp"
#include "headrf/optim.hpp"
#include "headrf/renderer.hpp"

namespace headrf {

/// Switches mirroring the ablation rows. Each one is independent.
struct AblationFlags {
  bool no_semantic = false;     // semantic one-hot channels zeroed
  bool no_expression = false;   // psi channels of the volume zeroed
  bool no_reg_losses = false;   // lambda1 = lambda2 = 0
  bool no_displacement = false; // displacement channels of the volume zeroed

  ChannelMask channel_mask() const;
};

struct ModelConfig {
  FieldConfig fields;
  double voxel_size = 0.05;
  int conv_hidden = 32;
  int conv_out = 16;
  int coarse_samples = 64;
  int fine_samples = 64;
  CodeMode test_code = CodeMode::kTest;
};

/// Per-ray renders of one batch.
struct RenderPass {
  CompositeResult coarse;
  CompositeResult fine;
};

/// Everything learnable plus the fixed subject data: head model with
/// latent codes, sparse-conv diffusion, deformation field, coarse and fine
/// canonical fields and per-frame appearance codes.
class HeadAvatar {
 public:
  HeadAvatar(const SceneManifest& manifest, const ModelConfig& config, const AblationFlags& flags,
             std::uint64_t seed);

  /// Anchored and diffused motion volume for one expression.
  VoxelGrid volume(const ExpressionParams& psi) const;

  /// Renders a batch. `code_rows` is the appearance code per sample
  /// source: pass `appearance_rows(...)`. With `stratified`, `rng` drives
  /// the coarse and fine strata. `deform` = false bypasses the deformation
  /// field entirely.
  RenderPass render_rays(const RayBatch& rays, const VoxelGrid& volume, const ExpressionParams& psi,
                         const Tensor& code, bool stratified, std::mt19937_64* coarse_rng,
                         std::mt19937_64* fine_rng, bool deform = true) const;

  /// Appearance code [A] for a frame: its learned code when it is a training
  /// frame and `train` is set, otherwise the configured test code.
  Tensor appearance(const Frame& frame, bool train) const;

  /// Full-resolution deterministic render (fine pass) of a frame.
  Image render_frame(const Frame& frame, int rays_per_batch = 1024, int threads = 1, bool deform = true) const;
  Image render_view(const Camera& camera, const RigidPose& pose, const ExpressionParams& psi, const Tensor& code,
                    int rays_per_batch = 1024, int threads = 1, bool deform = true) const;

  /// Learnable tensors in a fixed order, grouped by name prefix:
  /// canon_coarse/, canon_fine/, deform/, phi/, latent/, appearance/.
  std::vector<NamedParam> params() const;
  static const std::vector<std::string>& param_groups();

  std::vector<NamedArray> export_params() const;
  /// Copies values from `arrays`; throws CheckpointError on a missing name or shape mismatch.
  void import_params(const std::vector<NamedArray>& arrays);

  const ModelConfig& config() const { return config_; }
  const AblationFlags& flags() const { return flags_; }
  const HeadModel& head() const { return head_; }
  const RadianceField& canonical_fine() const { return fine_; }
  const RadianceField& canonical_coarse() const { return coarse_; }
  RadianceField& canonical_fine() { return fine_; }
  RadianceField& canonical_coarse() { return coarse_; }
  const DeformField& deform_field() const { return deform_; }
  const AppearanceCodes& codes() const { return codes_; }
  double bound_radius() const { return bound_radius_; }
  const Rgb& background() const { return background_; }
  /// Training ordinal of frame `index`, or -1.
  int train_slot(int index) const;

 private:
  Tensor sample_field(const RadianceField& field, const Tensor& points, const Tensor& dirs,
                      const VoxelGrid& volume, const ExpressionParams& psi, const Tensor& code, bool deform,
                      Tensor* rgb_out) const;

  ModelConfig config_;
  AblationFlags flags_;
  HeadModel head_;
  IdentityParams beta_;
  std::shared_ptr<const AnchorLayout> layout_;
  SparseConvNet phi_;
  DeformField deform_;
  RadianceField coarse_;
  RadianceField fine_;
  AppearanceCodes codes_;
  std::vector<int> train_slot_;
  double bound_radius_ = 1.0;
  Rgb background_{1, 1, 1};
};

}  // namespace headrf
