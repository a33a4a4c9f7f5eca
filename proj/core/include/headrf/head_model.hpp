// Copyright 2026 The headrf Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "headrf/tensor.hpp"

namespace headrf {

/// Nv x 3 positions, one vertex per row.
using Points = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

/// Blend weights over the expression basis. The neutral (canonical)
/// expression is the zero vector.
struct ExpressionParams {
  Eigen::VectorXd values;

  static ExpressionParams neutral(Eigen::Index dim) { return {Eigen::VectorXd::Zero(dim)}; }
  Eigen::Index size() const { return values.size(); }
};

/// Subject identity coefficients; fixed per scene.
struct IdentityParams {
  Eigen::VectorXd values;

  static IdentityParams zero(Eigen::Index dim) { return {Eigen::VectorXd::Zero(dim)}; }
  Eigen::Index size() const { return values.size(); }
};

struct HeadDims {
  int subdivision_level = 3;  // Nv = 10 * 4^level + 2
  int identity_dim = 4;
  int expression_dim = 8;
  int semantic_classes = 6;
  int latent_dim = 8;
};

/// Linear blendshape head: V(beta, psi) = base + B_id beta + B_expr psi.
///
/// Bases are stored as (3 Nv) x D matrices with row 3v + c holding the
/// coordinate c of vertex v. `latent_codes` is the only learnable part.
struct HeadModel {
  Points base_vertices;
  Eigen::MatrixXd identity_basis;
  Eigen::MatrixXd expression_basis;
  std::vector<int> semantic_labels;
  int semantic_classes = 0;
  Tensor latent_codes;  // [Nv, Dz], requires_grad
  std::vector<std::array<int, 3>> faces;

  Eigen::Index num_vertices() const { return base_vertices.rows(); }
  int identity_dim() const { return static_cast<int>(identity_basis.cols()); }
  int expression_dim() const { return static_cast<int>(expression_basis.cols()); }
  int latent_dim() const { return latent_codes.rank() == 2 ? static_cast<int>(latent_codes.dim(1)) : 0; }

  /// Checks the structural invariants; throws ContractViolation.
  void validate() const;
};

struct Icosphere {
  Points vertices;  // unit length
  std::vector<std::array<int, 3>> faces;
};

/// Icosahedron subdivided `level` times, vertices projected to the unit sphere.
Icosphere make_icosphere(int level);
constexpr std::size_t icosphere_vertex_count(int level) { return 10 * (std::size_t{1} << (2 * level)) + 2; }

Points vertices(const HeadModel& model, const IdentityParams& beta, const ExpressionParams& psi);

/// Per-vertex offset from the given expression back to the neutral one:
/// vertices(beta, neutral) - vertices(beta, psi). Independent of beta.
Points displacement(const HeadModel& model, const IdentityParams& beta, const ExpressionParams& psi);

/// Nv x S indicator matrix of the semantic labels.
Eigen::MatrixXd semantic_one_hot(const HeadModel& model);

/// Deterministic synthetic head. Proportions scale the unit icosphere to a
/// head-like ellipsoid about 1 unit tall.
HeadModel generate_synthetic_head(std::uint64_t seed, const HeadDims& dims = {});

inline constexpr std::array<double, 3> kHeadProportions = {0.40, 0.50, 0.44};
inline constexpr double kLatentInitScale = 0.01;

}  // namespace headrf
