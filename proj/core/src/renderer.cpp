// Copyright 2026 The headrf Authors.
// SPDX-License-Identifier: Apache-2.0
#include "headrf/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Geometry>

#include "headrf/parallel.hpp"

namespace headrf {

RigidPose RigidPose::from_euler(double yaw, double pitch, double roll, const Eigen::Vector3d& translation) {
  const Eigen::Matrix3d r = (Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitY()) *
                             Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitX()) *
                             Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitZ()))
                                .toRotationMatrix();
  return {r, translation};
}

void RigidPose::validate() const {
  if (!rotation.allFinite() || !translation.allFinite()) throw ContractViolation("pose has non-finite entries");
  const double ortho = (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (ortho > 1e-8) throw ContractViolation("singular pose: rotation is not orthonormal");
  if (std::fabs(rotation.determinant() - 1.0) > 1e-8) throw ContractViolation("singular pose: det(rotation) != +1");
}

Camera Camera::orbit(int width, int height, double distance, double fov_x_radians) {
  Camera c;
  c.width = width;
  c.height = height;
  c.focal = 0.5 * width / std::tan(0.5 * fov_x_radians);
  c.cx = 0.5 * width;
  c.cy = 0.5 * height;
  c.pose.translation = Eigen::Vector3d(0.0, 0.0, distance);
  return c;
}

void Camera::validate() const {
  if (width <= 0 || height <= 0) throw ContractViolation("camera image size must be positive");
  if (!(focal > 0.0)) throw ContractViolation("camera focal length must be positive");
  pose.validate();
}

std::vector<int> all_pixels(const Camera& camera) {
  std::vector<int> p(camera.num_pixels());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = static_cast<int>(i);
  return p;
}

RayBatch generate_rays(const Camera& camera, const RigidPose& head_pose, std::span<const int> pixels,
                       double bound_radius) {
  camera.validate();
  head_pose.validate();
  if (!(bound_radius > 0.0)) throw ContractViolation("bound radius must be positive");
  const auto n = static_cast<Eigen::Index>(pixels.size());
  RayBatch rays;
  rays.origins.resize(n, 3);
  rays.directions.resize(n, 3);
  rays.pixels.assign(pixels.begin(), pixels.end());
  const Eigen::Matrix3d rh_t = head_pose.rotation.transpose();
  const Eigen::Vector3d origin = rh_t * (camera.pose.translation - head_pose.translation);
  const int total = static_cast<int>(camera.num_pixels());
  for (Eigen::Index i = 0; i < n; ++i) {
    const int p = pixels[static_cast<std::size_t>(i)];
    if (p < 0 || p >= total) throw ContractViolation("pixel index " + std::to_string(p) + " out of bounds");
    const double u = p % camera.width + 0.5, v = p / camera.width + 0.5;
    const Eigen::Vector3d local((u - camera.cx) / camera.focal, -(v - camera.cy) / camera.focal, -1.0);
    const Eigen::Vector3d world = camera.pose.rotation * local;
    rays.origins.row(i) = origin.transpose();
    rays.directions.row(i) = (rh_t * world).normalized().transpose();
  }
  const double dist = origin.norm();
  rays.near = std::max(0.0, dist - bound_radius);
  rays.far = dist + bound_radius;
  return rays;
}

RayBatch slice_rays(const RayBatch& rays, std::size_t begin, std::size_t end) {
  if (begin > end || end > rays.size()) throw ContractViolation("ray slice out of range");
  RayBatch out;
  const auto b = static_cast<Eigen::Index>(begin), len = static_cast<Eigen::Index>(end - begin);
  out.origins = rays.origins.middleRows(b, len);
  out.directions = rays.directions.middleRows(b, len);
  out.near = rays.near;
  out.far = rays.far;
  if (!rays.pixels.empty()) out.pixels.assign(rays.pixels.begin() + b, rays.pixels.begin() + b + len);
  return out;
}

RowMatrix sample_coarse(const RayBatch& rays, int k, bool stratified, std::mt19937_64* rng) {
  if (k < 2) throw ContractViolation("need at least 2 samples per ray");
  if (stratified && rng == nullptr) throw ContractViolation("stratified sampling needs a generator");
  if (!(rays.near < rays.far)) throw ContractViolation("near must be below far");
  const auto n = static_cast<Eigen::Index>(rays.size());
  const double bin = (rays.far - rays.near) / k;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  RowMatrix depths(n, k);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (int j = 0; j < k; ++j) {
      const double u = stratified ? unit(*rng) : 0.5;
      depths(r, j) = rays.near + (j + u) * bin;
    }
  }
  return depths;
}

RowMatrix sample_fine(const RayBatch& rays, const RowMatrix& coarse_depths, const RowMatrix& coarse_weights,
                      int k_fine, bool stratified, std::mt19937_64* rng) {
  const Eigen::Index n = coarse_depths.rows(), k = coarse_depths.cols();
  if (coarse_weights.rows() != n || coarse_weights.cols() != k) {
    throw ContractViolation("coarse weights must match coarse depths");
  }
  if (static_cast<std::size_t>(n) != rays.size()) throw ContractViolation("depths do not match the ray batch");
  if (k_fine < 0) throw ContractViolation("k_fine must be non-negative");
  if (stratified && rng == nullptr) throw ContractViolation("stratified sampling needs a generator");
  const double bin = (rays.far - rays.near) / static_cast<double>(k);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  RowMatrix merged(n, k + k_fine);
  std::vector<double> cdf(static_cast<std::size_t>(k) + 1);
  std::vector<double> row(static_cast<std::size_t>(k + k_fine));
  for (Eigen::Index r = 0; r < n; ++r) {
    cdf[0] = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      const double w = std::max(coarse_weights(r, j), 0.0) + kPdfFloor;
      cdf[static_cast<std::size_t>(j) + 1] = cdf[static_cast<std::size_t>(j)] + w;
    }
    const double total = cdf.back();
    for (double& c : cdf) c /= total;
    for (Eigen::Index j = 0; j < k; ++j) row[static_cast<std::size_t>(j)] = coarse_depths(r, j);
    for (int i = 0; i < k_fine; ++i) {
      const double u = (i + (stratified ? unit(*rng) : 0.5)) / k_fine;
      auto it = std::upper_bound(cdf.begin() + 1, cdf.end() - 1, u);
      const auto j = static_cast<std::size_t>(it - cdf.begin()) - 1;
      const double mass = cdf[j + 1] - cdf[j];
      const double frac = mass > 0.0 ? std::clamp((u - cdf[j]) / mass, 0.0, 1.0) : 0.5;
      row[static_cast<std::size_t>(k + i)] = rays.near + (static_cast<double>(j) + frac) * bin;
    }
    std::sort(row.begin(), row.end());
    for (std::size_t j = 0; j < row.size(); ++j) merged(r, static_cast<Eigen::Index>(j)) = row[j];
  }
  return merged;
}

RowMatrix sample_deltas(const RowMatrix& depths) {
  RowMatrix d(depths.rows(), depths.cols());
  const Eigen::Index k = depths.cols();
  for (Eigen::Index r = 0; r < depths.rows(); ++r) {
    for (Eigen::Index j = 0; j + 1 < k; ++j) d(r, j) = depths(r, j + 1) - depths(r, j);
    if (k > 0) d(r, k - 1) = kFarDelta;
  }
  return d;
}

Tensor sample_positions(const RayBatch& rays, const RowMatrix& depths) {
  const std::size_t n = rays.size(), k = static_cast<std::size_t>(depths.cols());
  std::vector<double> v(n * k * 3);
  for (std::size_t r = 0; r < n; ++r) {
    const auto ri = static_cast<Eigen::Index>(r);
    for (std::size_t j = 0; j < k; ++j) {
      const double t = depths(ri, static_cast<Eigen::Index>(j));
      for (int c = 0; c < 3; ++c) v[(r * k + j) * 3 + c] = rays.origins(ri, c) + t * rays.directions(ri, c);
    }
  }
  return Tensor::from({n * k, 3}, std::move(v));
}

Tensor sample_directions(const RayBatch& rays, std::size_t samples_per_ray) {
  const std::size_t n = rays.size();
  std::vector<double> v(n * samples_per_ray * 3);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < samples_per_ray; ++j) {
      for (int c = 0; c < 3; ++c) v[(r * samples_per_ray + j) * 3 + c] = rays.directions(static_cast<Eigen::Index>(r), c);
    }
  }
  return Tensor::from({n * samples_per_ray, 3}, std::move(v));
}

CompositeResult composite(const Tensor& sigma, const Tensor& rgb, const RowMatrix& deltas, const Rgb& background) {
  const auto n = static_cast<std::size_t>(deltas.rows()), k = static_cast<std::size_t>(deltas.cols());
  if (sigma.numel() != n * k) {
    throw ContractViolation("sigma has " + std::to_string(sigma.numel()) + " values for " + std::to_string(n) +
                            "x" + std::to_string(k) + " samples");
  }
  if (rgb.shape() != Shape{n * k, 3}) throw ContractViolation("rgb must be [N*K, 3], got " + shape_str(rgb.shape()));
  for (double s : sigma.data()) {
    if (std::isnan(s)) throw NonFiniteError("NaN density in composite");
    if (s < 0.0) throw ContractViolation("negative density in composite");
  }
  const Tensor s = sigma.shape() == Shape{n, k} ? sigma : reshape(sigma, {n, k});
  const Tensor d = Tensor::from({n, k}, std::vector<double>(deltas.data(), deltas.data() + n * k));
  const Tensor tau = mul(s, d);
  const Tensor transmittance = exp(neg(cumsum(tau, 1, true)));
  const Tensor opacity = add_scalar(neg(exp(neg(tau))), 1.0);
  CompositeResult out;
  out.weights = mul(transmittance, opacity);
  const Tensor weighted = mul(rgb, reshape(out.weights, {n * k, 1}));
  const Tensor surface = sum(reshape(weighted, {n, k, 3}), 1);
  out.alpha = reshape(sum(out.weights, 1), {n, 1});
  std::vector<double> bg(n * 3);
  for (std::size_t r = 0; r < n; ++r) std::copy(background.begin(), background.end(), bg.begin() + r * 3);
  const Tensor remaining = add_scalar(neg(out.alpha), 1.0);
  out.color = add(surface, mul(Tensor::from({n, 3}, std::move(bg)), remaining));
  return out;
}

RowMatrix composite_analytic(const RayBatch& rays, const AnalyticField& field, int samples, const Rgb& background) {
  const RowMatrix depths = sample_coarse(rays, samples, false, nullptr);
  const std::size_t m = rays.size() * static_cast<std::size_t>(samples);
  const Tensor pos = sample_positions(rays, depths);
  const Tensor dirs = sample_directions(rays, static_cast<std::size_t>(samples));
  std::vector<double> sigma(m), rgb(m * 3);
  field(pos.data(), dirs.data(), sigma, rgb);
  const CompositeResult c = composite(Tensor::from({m, 1}, std::move(sigma)), Tensor::from({m, 3}, std::move(rgb)),
                                      sample_deltas(depths), background);
  RowMatrix out(static_cast<Eigen::Index>(rays.size()), 3);
  std::copy(c.color.data().begin(), c.color.data().end(), out.data());
  return out;
}

Image render_analytic(const Camera& camera, const RigidPose& head_pose, const AnalyticField& field,
                      const QuadratureSettings& settings) {
  const RayBatch rays = generate_rays(camera, head_pose, all_pixels(camera), settings.bound_radius);
  Image image(camera.width, camera.height);
  const std::size_t per = static_cast<std::size_t>(std::max(1, settings.rays_per_batch));
  const std::size_t batches = (rays.size() + per - 1) / per;
  parallel_for(batches, settings.threads, [&](std::size_t b) {
    const std::size_t begin = b * per, end = std::min(rays.size(), begin + per);
    const RayBatch part = slice_rays(rays, begin, end);
    const RowMatrix depths = sample_coarse(part, settings.samples, false, nullptr);
    const std::size_t m = part.size() * static_cast<std::size_t>(settings.samples);
    const Tensor pos = sample_positions(part, depths);
    const Tensor dirs = sample_directions(part, static_cast<std::size_t>(settings.samples));
    std::vector<double> sigma(m), rgb(m * 3);
    field(pos.data(), dirs.data(), sigma, rgb);
    const CompositeResult c = composite(Tensor::from({m, 1}, std::move(sigma)),
                                        Tensor::from({m, 3}, std::move(rgb)), sample_deltas(depths),
                                        settings.background);
    for (std::size_t r = 0; r < part.size(); ++r) {
      const auto p = static_cast<std::size_t>(part.pixels[r]);
      for (int ch = 0; ch < 3; ++ch) image.rgb[p * 3 + ch] = c.color[r * 3 + ch];
      image.alpha[p] = c.alpha[r];
    }
  });
  return image;
}

}  // namespace headrf
