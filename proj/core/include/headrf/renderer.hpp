// Copyright 2026 The headrf Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "headrf/head_model.hpp"
#include "headrf/tensor.hpp"

namespace headrf {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Rgb = std::array<double, 3>;

/// Distance assigned to the last sample of every ray.
inline constexpr double kFarDelta = 1e10;
/// Added to every coarse weight before building the fine-sampling PDF.
inline constexpr double kPdfFloor = 1e-5;

/// Rigid transform, world-from-local: x_world = rotation * x_local + translation.
struct RigidPose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  /// Yaw about +y, then pitch about +x, then roll about +z (radians): R = Ry * Rx * Rz.
  static RigidPose from_euler(double yaw, double pitch, double roll, const Eigen::Vector3d& translation);
  /// Throws ContractViolation unless rotation^T rotation = I to 1e-8 and det = +1.
  void validate() const;
};

/// Pinhole camera. Camera looks down its local -z with +y up; pixel (u, v)
/// has its center at (u + 0.5, v + 0.5), v growing downward.
struct Camera {
  double focal = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;
  RigidPose pose;  // world-from-camera

  /// Camera on +z at `distance`, looking at the origin, with the given horizontal field of view.
  static Camera orbit(int width, int height, double distance, double fov_x_radians);
  std::size_t num_pixels() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
  void validate() const;
};

/// Rays expressed in the head (canonical rigid) frame.
struct RayBatch {
  Points origins;
  Points directions;  // unit length
  double near = 0.0;
  double far = 0.0;
  std::vector<int> pixels;

  std::size_t size() const { return static_cast<std::size_t>(origins.rows()); }
};

/// Every pixel index (v * width + u) of the camera, row-major.
std::vector<int> all_pixels(const Camera& camera);

/// Pinhole rays for `pixels`, moved into the head frame by the inverse of
/// `head_pose` (world-from-head). near/far bound the sphere of `bound_radius`
/// about the head origin.
RayBatch generate_rays(const Camera& camera, const RigidPose& head_pose, std::span<const int> pixels,
                       double bound_radius);

/// Sub-range [begin, end) of a batch.
RayBatch slice_rays(const RayBatch& rays, std::size_t begin, std::size_t end);

/// K depths per ray over [near, far]. Stratified mode draws one uniform
/// sample per equal-width bin; otherwise bin midpoints. `rng` is required
/// when stratified.
RowMatrix sample_coarse(const RayBatch& rays, int k, bool stratified, std::mt19937_64* rng);

/// Inverse-transform samples from the piecewise-constant PDF over the K
/// equal-width coarse bins with mass proportional to weight + kPdfFloor,
/// merged with the coarse depths and sorted. Stratified mode jitters each of
/// the K_fine equal CDF strata; otherwise strata midpoints are used.
RowMatrix sample_fine(const RayBatch& rays, const RowMatrix& coarse_depths, const RowMatrix& coarse_weights,
                      int k_fine, bool stratified, std::mt19937_64* rng);

/// delta_k = depth_{k+1} - depth_k, the last one kFarDelta.
RowMatrix sample_deltas(const RowMatrix& depths);

/// Constant [N*K, 3] sample positions o + t d, ray-major.
Tensor sample_positions(const RayBatch& rays, const RowMatrix& depths);
/// Constant [N*K, 3] directions, each ray's direction repeated K times.
Tensor sample_directions(const RayBatch& rays, std::size_t samples_per_ray);

struct CompositeResult {
  Tensor color;    // [N, 3], background included
  Tensor alpha;    // [N, 1], sum of weights
  Tensor weights;  // [N, K]
};

/// Discrete volume rendering: T_k = exp(-sum_{j<k} sigma_j delta_j),
/// w_k = T_k (1 - exp(-sigma_k delta_k)), color = sum w_k c_k + (1 - sum w_k) background.
/// sigma [N, K] (or [N*K, 1]), rgb [N*K, 3]. Throws ContractViolation on negative sigma.
CompositeResult composite(const Tensor& sigma, const Tensor& rgb, const RowMatrix& deltas, const Rgb& background);

struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> rgb;    // H*W*3, row-major
  std::vector<double> alpha;  // H*W

  Image() = default;
  Image(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0.0),
                        alpha(static_cast<std::size_t>(w) * h, 0.0) {}
  std::size_t num_pixels() const { return alpha.size(); }
};

/// Closed-form field evaluated on M points: xyz and dirs are M*3, sigma M, rgb M*3.
using AnalyticField =
    std::function<void(std::span<const double> xyz, std::span<const double> dirs, std::span<double> sigma,
                       std::span<double> rgb)>;

struct QuadratureSettings {
  int samples = 512;
  double bound_radius = 1.0;
  Rgb background{1.0, 1.0, 1.0};
  int rays_per_batch = 1024;
  int threads = 1;
};

/// Renders a closed-form field with deterministic midpoint samples.
Image render_analytic(const Camera& camera, const RigidPose& head_pose, const AnalyticField& field,
                      const QuadratureSettings& settings);

/// Per-ray color of a closed-form field with K midpoint samples, [N, 3].
RowMatrix composite_analytic(const RayBatch& rays, const AnalyticField& field, int samples, const Rgb& background);

}  // namespace headrf
