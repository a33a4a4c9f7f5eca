// Copyright 2026 The headrf Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "headrf/head_model.hpp"
#include "headrf/renderer.hpp"

namespace headrf {

enum class Split { kTrain, kTestSeen, kTestUnseen };

std::string_view split_name(Split split);
/// "train", "test_seen_expr" or "test_unseen_expr"; throws ContractViolation otherwise.
Split parse_split(std::string_view name);

struct Frame {
  int index = 0;
  Split split = Split::kTrain;
  Camera camera;
  RigidPose head_pose;
  ExpressionParams psi;
  std::string image;  // PNG path relative to the dataset root
  std::string raw;    // raw dump path, empty when not written
};

/// Ground-truth blob field parameters.
struct SceneSettings {
  double amplitude = 30.0;
  double blob_scale = 0.08;
  double truncation = 6.0;  // density is exactly zero beyond truncation * blob_scale
  int anchors = 64;
  Rgb background{1.0, 1.0, 1.0};
  /// Color as the density-weighted mean of the anchor region colors;
  /// when false, the region color of the nearest anchor.
  bool blend_colors = true;
};

/// Fixed region colors, indexed by semantic class (wraps around).
Rgb semantic_color(int semantic_class);

/// Closed-form scene: density = A sum_v exp(-|x - v|^2 / 2 s^2) over the
/// anchors within the truncation radius; color from the anchor region colors.
class AnalyticScene {
 public:
  AnalyticScene(Points anchors, std::vector<int> labels, const SceneSettings& settings);

  /// Anchors are the `anchor_ids` vertices of the head at (beta, psi).
  static AnalyticScene from_head(const HeadModel& head, const IdentityParams& beta, const ExpressionParams& psi,
                                 const std::vector<int>& anchor_ids, const SceneSettings& settings);

  double density(const Eigen::Vector3d& x) const;
  Rgb color(const Eigen::Vector3d& x) const;
  void evaluate(std::span<const double> xyz, std::span<double> sigma, std::span<double> rgb) const;
  AnalyticField field() const;

  const Points& anchors() const { return anchors_; }
  const SceneSettings& settings() const { return settings_; }

 private:
  const std::vector<int>& candidates(const Eigen::Vector3d& x) const;

  Points anchors_;
  std::vector<int> labels_;
  SceneSettings settings_;
  double reach_ = 0.0;
  Eigen::Vector3d grid_origin_;
  double cell_ = 0.0;
  std::array<int, 3> cells_{0, 0, 0};
  std::vector<std::vector<int>> cell_anchors_;
  std::vector<int> none_;
};

/// Farthest-point subset of the vertices, starting from vertex 0.
std::vector<int> select_anchor_vertices(const Points& points, int count);

struct GeneratorSettings {
  std::uint64_t seed = 1;
  int width = 64;
  int height = 64;
  int n_train = 32;
  int n_test_seen = 12;
  int n_test_unseen = 12;
  double yaw_degrees = 30.0;
  double pitch_degrees = 15.0;
  double max_translation = 0.03;
  double train_psi = 0.6;
  double unseen_psi_min = 0.7;
  double unseen_psi_max = 1.0;
  int quadrature_samples = 512;
  double camera_distance = 3.0;
  double fov_x_degrees = 24.0;
  double bound_scale = 1.5;
  double identity_scale = 0.5;
  SceneSettings scene;
  HeadDims head;
  bool write_raw = true;
  int threads = 1;

  /// Throws ContractViolation on out-of-range settings.
  void validate() const;
};

inline constexpr int kManifestVersion = 1;

struct SceneManifest {
  int version = kManifestVersion;
  GeneratorSettings generator;
  HeadModel head;
  IdentityParams beta;
  std::vector<int> anchor_ids;
  double bound_radius = 1.0;
  std::vector<Frame> frames;
  std::filesystem::path root;

  std::vector<const Frame*> frames_in(Split split) const;
  Points canonical_vertices() const;
};

/// Bound sphere radius: scale * (max canonical vertex norm + truncation radius).
double scene_bound_radius(const HeadModel& head, const IdentityParams& beta, const SceneSettings& scene,
                          double scale);

/// Head, poses and expressions for every frame; no images.
SceneManifest make_manifest(const GeneratorSettings& settings);

/// Renders one frame of the analytic scene with the generator's quadrature.
Image render_ground_truth(const SceneManifest& manifest, const Frame& frame, int threads = 1);

/// make_manifest, then renders and writes every frame plus the manifest under `out_dir`.
SceneManifest generate_dataset(const GeneratorSettings& settings, const std::filesystem::path& out_dir);

/// Writes `root/manifest.json` and `root/head.bin`.
void save_manifest(const SceneManifest& manifest, const std::filesystem::path& root);
/// Reads a manifest written by `save_manifest`; throws std::runtime_error on missing or malformed files.
SceneManifest load_manifest(const std::filesystem::path& root);

/// Stored image of a frame: the raw dump when `prefer_raw` and present, else the PNG.
Image load_frame_image(const SceneManifest& manifest, const Frame& frame, bool prefer_raw);

}  // namespace headrf
