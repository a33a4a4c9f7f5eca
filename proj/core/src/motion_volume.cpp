// Copyright 2026 The headrf Authors.
// SPDX-License-Identifier: Apache-2.0
#include "headrf/motion_volume.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace headrf {
namespace {
constexpr int kPadVoxels = 2;
}

VoxelCoord kernel_offset(int tap) { return {tap / 9 - 1, (tap / 3) % 3 - 1, tap % 3 - 1}; }

int AnchorLayout::index_of(const VoxelCoord& c) const {
  for (int a = 0; a < 3; ++a) {
    if (c[a] < 0 || c[a] >= extents[a]) return -1;
  }
  return dense_index[(static_cast<std::size_t>(c[0]) * extents[1] + c[1]) * extents[2] + c[2]];
}

Eigen::Vector3d AnchorLayout::center(const VoxelCoord& c) const {
  return origin + voxel_size * Eigen::Vector3d(c[0] + 0.5, c[1] + 0.5, c[2] + 0.5);
}

std::shared_ptr<const AnchorLayout> make_anchor_layout(const Points& canonical, double voxel_size) {
  if (!(voxel_size > 0.0)) throw ContractViolation("voxel_size must be positive");
  if (canonical.rows() == 0) throw ContractViolation("no vertices to anchor");
  const Eigen::Vector3d lo = canonical.colwise().minCoeff().transpose();
  const Eigen::Vector3d hi = canonical.colwise().maxCoeff().transpose();
  if ((hi - lo).norm() == 0.0) throw ContractViolation("degenerate mesh: zero-size bounding box");

  auto layout = std::make_shared<AnchorLayout>();
  layout->voxel_size = voxel_size;
  layout->origin = lo - Eigen::Vector3d::Constant(kPadVoxels * voxel_size);
  for (int a = 0; a < 3; ++a) {
    layout->extents[a] = static_cast<int>(std::floor((hi[a] - lo[a]) / voxel_size)) + 1 + 2 * kPadVoxels;
  }
  const std::size_t dense = static_cast<std::size_t>(layout->extents[0]) * layout->extents[1] * layout->extents[2];
  layout->dense_index.assign(dense, -1);

  const Eigen::Index nv = canonical.rows();
  layout->voxel_of_vertex.resize(static_cast<std::size_t>(nv));
  std::vector<std::vector<std::size_t>> members;
  for (Eigen::Index v = 0; v < nv; ++v) {
    VoxelCoord c;
    // Binned relative to the unpadded corner so the minimum vertex lands exactly at the pad offset.
    for (int a = 0; a < 3; ++a) c[a] = static_cast<int>(std::floor((canonical(v, a) - lo[a]) / voxel_size)) + kPadVoxels;
    const std::size_t flat = (static_cast<std::size_t>(c[0]) * layout->extents[1] + c[1]) * layout->extents[2] + c[2];
    int& slot = layout->dense_index[flat];
    if (slot < 0) {
      slot = static_cast<int>(layout->occupied.size());
      layout->occupied.push_back(c);
      members.emplace_back();
    }
    members[static_cast<std::size_t>(slot)].push_back(static_cast<std::size_t>(v));
    layout->voxel_of_vertex[static_cast<std::size_t>(v)] = slot;
  }

  layout->average.cols = static_cast<std::size_t>(nv);
  for (const auto& m : members) {
    for (std::size_t v : m) layout->average.push(v, 1.0 / static_cast<double>(m.size()));
    layout->average.end_row();
  }

  layout->neighborhood.cols = layout->occupied.size();
  for (const auto& c : layout->occupied) {
    for (int t = 0; t < kKernelTaps; ++t) {
      const VoxelCoord off = kernel_offset(t);
      const int j = layout->index_of({c[0] + off[0], c[1] + off[1], c[2] + off[2]});
      if (j >= 0) layout->neighborhood.push(static_cast<std::size_t>(j), 1.0);
      layout->neighborhood.end_row();
    }
  }
  return layout;
}

int anchored_channels(const HeadModel& head) {
  return 3 + head.expression_dim() + head.semantic_classes + head.latent_dim();
}

Tensor vertex_features(const HeadModel& head, const IdentityParams& beta, const ExpressionParams& psi,
                       const ChannelMask& mask) {
  const Eigen::Index nv = head.num_vertices();
  const int de = head.expression_dim();
  const int s = head.semantic_classes;
  const int fixed = 3 + de + s;
  std::vector<double> rows(static_cast<std::size_t>(nv * fixed), 0.0);
  const Points dv = displacement(head, beta, psi);
  for (Eigen::Index v = 0; v < nv; ++v) {
    double* row = rows.data() + v * fixed;
    if (mask.displacement) {
      for (int c = 0; c < 3; ++c) row[c] = dv(v, c);
    }
    if (mask.expression) {
      for (int j = 0; j < de; ++j) row[3 + j] = psi.values[j];
    }
    if (mask.semantic) row[3 + de + head.semantic_labels[static_cast<std::size_t>(v)]] = 1.0;
  }
  Tensor fixed_part = Tensor::from({static_cast<std::size_t>(nv), static_cast<std::size_t>(fixed)}, std::move(rows));
  Tensor latent = mask.latent ? head.latent_codes : Tensor::zeros(head.latent_codes.shape());
  return concat({fixed_part, latent}, 1);
}

VoxelGrid anchor(std::shared_ptr<const AnchorLayout> layout, const HeadModel& head, const IdentityParams& beta,
                 const ExpressionParams& psi, const ChannelMask& mask) {
  if (layout->average.cols != static_cast<std::size_t>(head.num_vertices())) {
    throw ContractViolation("anchor layout was built for a different mesh");
  }
  Tensor feats = spmm(layout->average, vertex_features(head, beta, psi, mask));
  return {std::move(layout), std::move(feats)};
}

VoxelGrid anchor(const HeadModel& head, const IdentityParams& beta, const ExpressionParams& psi, double voxel_size,
                 const ChannelMask& mask) {
  const Points canonical = vertices(head, beta, ExpressionParams::neutral(head.expression_dim()));
  return anchor(make_anchor_layout(canonical, voxel_size), head, beta, psi, mask);
}

SparseConvNet SparseConvNet::init(int in_channels, std::uint64_t seed, int hidden, int out_channels) {
  std::mt19937_64 rng(seed);
  auto uniform = [&rng](std::size_t rows, std::size_t cols) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
    std::uniform_real_distribution<double> u(-bound, bound);
    std::vector<double> v(rows * cols);
    for (double& x : v) x = u(rng);
    return Tensor::from({rows, cols}, std::move(v), true);
  };
  SparseConvNet net;
  net.w1 = uniform(static_cast<std::size_t>(kKernelTaps * in_channels), static_cast<std::size_t>(hidden));
  net.w2 = uniform(static_cast<std::size_t>(kKernelTaps * hidden), static_cast<std::size_t>(out_channels));
  net.b2 = Tensor::zeros({static_cast<std::size_t>(out_channels)}, true);
  return net;
}

VoxelGrid diffuse(const VoxelGrid& grid, const SparseConvNet& net) {
  const AnchorLayout& layout = *grid.layout;
  const std::size_t n = layout.num_occupied();
  if (grid.channels() != static_cast<std::size_t>(net.in_channels())) {
    throw ContractViolation("diffuse: grid has " + std::to_string(grid.channels()) + " channels, network expects " +
                            std::to_string(net.in_channels()));
  }
  const std::size_t cin = grid.channels();
  const std::size_t hidden = static_cast<std::size_t>(net.hidden_channels());
  Tensor cols1 = reshape(spmm(layout.neighborhood, grid.features), {n, kKernelTaps * cin});
  Tensor h = relu(matmul(cols1, net.w1));
  Tensor cols2 = reshape(spmm(layout.neighborhood, h), {n, kKernelTaps * hidden});
  return {grid.layout, affine(cols2, net.w2, net.b2)};
}

SparseRows trilinear_weights(const AnchorLayout& layout, std::span<const double> points_xyz) {
  if (points_xyz.size() % 3 != 0) throw ContractViolation("query points must be [N, 3]");
  const std::size_t n = points_xyz.size() / 3;
  SparseRows s;
  s.cols = layout.num_occupied();
  s.col_idx.reserve(n * 8);
  s.values.reserve(n * 8);
  for (std::size_t q = 0; q < n; ++q) {
    double u[3];
    int base[3];
    for (int a = 0; a < 3; ++a) {
      const double x = points_xyz[3 * q + a];
      if (!std::isfinite(x)) throw ContractViolation("query point is not finite");
      double g = (x - layout.origin[a]) / layout.voxel_size - 0.5;
      const double r = std::round(g);
      if (std::fabs(g - r) <= 8.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::fabs(g))) g = r;
      const double f = std::floor(g);
      base[a] = static_cast<int>(std::clamp(f, -2.0, static_cast<double>(layout.extents[a]) + 1.0));
      u[a] = g - f;
    }
    for (int corner = 0; corner < 8; ++corner) {
      const int dx = (corner >> 2) & 1, dy = (corner >> 1) & 1, dz = corner & 1;
      const int j = layout.index_of({base[0] + dx, base[1] + dy, base[2] + dz});
      if (j < 0) continue;
      const double w = (dx ? u[0] : 1.0 - u[0]) * (dy ? u[1] : 1.0 - u[1]) * (dz ? u[2] : 1.0 - u[2]);
      if (w != 0.0) s.push(static_cast<std::size_t>(j), w);
    }
    s.end_row();
  }
  return s;
}

Tensor query(const VoxelGrid& grid, const Tensor& points) {
  if (points.rank() != 2 || points.dim(1) != 3) throw ContractViolation("query points must be [N, 3]");
  return spmm(trilinear_weights(*grid.layout, points.data()), grid.features);
}

}  // namespace headrf
