// Copyright 2026 The headrf Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <vector>

#include <Eigen/Core>

#include "headrf/head_model.hpp"
#include "headrf/tensor.hpp"

namespace headrf {

using VoxelCoord = std::array<int, 3>;

/// Number of taps of a 3x3x3 kernel. Tap t corresponds to the offset
/// (t / 9 - 1, (t / 3) % 3 - 1, t % 3 - 1).
inline constexpr int kKernelTaps = 27;
VoxelCoord kernel_offset(int tap);

/// Voxel geometry of one subject: which voxels the canonical vertices fall
/// into, plus the constant maps used to anchor, convolve and interpolate.
///
/// Voxel (i, j, k) spans [origin + (i, j, k) h, origin + (i + 1, j + 1, k + 1) h)
/// and its center sits at origin + (i + 0.5, j + 0.5, k + 0.5) h.
struct AnchorLayout {
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  double voxel_size = 0.0;
  VoxelCoord extents{0, 0, 0};
  std::vector<VoxelCoord> occupied;
  std::vector<int> dense_index;      // extents product, -1 when empty
  std::vector<int> voxel_of_vertex;  // occupied index per vertex
  SparseRows average;                // [Nocc, Nv] mean over member vertices
  SparseRows neighborhood;           // [Nocc * 27, Nocc] tap gather, empty rows for absent neighbors

  std::size_t num_occupied() const { return occupied.size(); }
  int index_of(const VoxelCoord& c) const;
  Eigen::Vector3d center(const VoxelCoord& c) const;
};

/// Bounds are the bounding box of `canonical` padded by two voxels per side.
/// Throws ContractViolation when all points coincide or voxel_size <= 0.
std::shared_ptr<const AnchorLayout> make_anchor_layout(const Points& canonical, double voxel_size);

/// Which per-vertex channels reach the volume. Disabled channels are zeros.
struct ChannelMask {
  bool displacement = true;
  bool expression = true;
  bool semantic = true;
  bool latent = true;
};

/// Sparse voxel grid with one feature row per occupied voxel.
struct VoxelGrid {
  std::shared_ptr<const AnchorLayout> layout;
  Tensor features;  // [Nocc, F]

  std::size_t channels() const { return features.rank() == 2 ? features.dim(1) : 0; }
};

/// Channel count of anchored features: 3 + De + S + Dz.
int anchored_channels(const HeadModel& head);

/// Per-vertex feature rows [displacement | psi | one_hot(label) | latent code].
/// Differentiable in the latent codes.
Tensor vertex_features(const HeadModel& head, const IdentityParams& beta, const ExpressionParams& psi,
                       const ChannelMask& mask = {});

/// Deposits vertex features into the voxels containing each vertex's
/// canonical position, averaging when several vertices share a voxel.
VoxelGrid anchor(std::shared_ptr<const AnchorLayout> layout, const HeadModel& head, const IdentityParams& beta,
                 const ExpressionParams& psi, const ChannelMask& mask = {});
VoxelGrid anchor(const HeadModel& head, const IdentityParams& beta, const ExpressionParams& psi, double voxel_size,
                 const ChannelMask& mask = {});

/// Two submanifold 3x3x3 convolutions with a ReLU between them:
/// in -> hidden (no bias) -> out (bias). Weight rows are ordered tap-major,
/// i.e. row tap * C_in + c.
struct SparseConvNet {
  Tensor w1;  // [27 * F_in, hidden]
  Tensor w2;  // [27 * hidden, F_out]
  Tensor b2;  // [F_out]

  static SparseConvNet init(int in_channels, std::uint64_t seed, int hidden = 32, int out_channels = 16);
  int in_channels() const { return static_cast<int>(w1.dim(0)) / kKernelTaps; }
  int hidden_channels() const { return static_cast<int>(w1.dim(1)); }
  int out_channels() const { return static_cast<int>(w2.dim(1)); }
};

/// Output support equals the input's occupied set; absent neighbors read zero.
VoxelGrid diffuse(const VoxelGrid& grid, const SparseConvNet& net);

/// Trilinear interpolation matrix [N, Nocc] for query points [N, 3].
/// Unoccupied corners keep their weight but contribute nothing.
SparseRows trilinear_weights(const AnchorLayout& layout, std::span<const double> points_xyz);

/// Features at the query points [N, 3] -> [N, F]; zero away from occupied voxels.
Tensor query(const VoxelGrid& grid, const Tensor& points);

}  // namespace headrf
