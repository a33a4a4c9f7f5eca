// Copyright 2026 The headrf Authors.
// SPDX-License-Identifier: Apache-2.0
#include "headrf/head_model.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <numbers>
#include <random>
#include <set>

namespace headrf {
namespace {

// Expression bumps: Gaussian falloff measured on the unit sphere, displacing
// along the sphere normal, outward or inward per column.
constexpr double kBumpRadius = 0.35;
constexpr double kBumpAmplitude = 0.2;
constexpr double kIdentityScale = 0.03;

void check_params(const HeadModel& model, const IdentityParams& beta, const ExpressionParams& psi) {
  if (beta.size() != model.identity_basis.cols()) {
    throw ContractViolation("identity parameters have length " + std::to_string(beta.size()) + ", model expects " +
                            std::to_string(model.identity_basis.cols()));
  }
  if (psi.size() != model.expression_basis.cols()) {
    throw ContractViolation("expression parameters have length " + std::to_string(psi.size()) + ", model expects " +
                            std::to_string(model.expression_basis.cols()));
  }
}

Points unflatten(const Eigen::VectorXd& flat) {
  Points p(flat.size() / 3, 3);
  for (Eigen::Index v = 0; v < p.rows(); ++v) p.row(v) = flat.segment<3>(3 * v).transpose();
  return p;
}

}  // namespace

void HeadModel::validate() const {
  const Eigen::Index nv = num_vertices();
  if (nv < 4) throw ContractViolation("head model needs at least 4 vertices");
  if (identity_basis.rows() != 3 * nv || expression_basis.rows() != 3 * nv) {
    throw ContractViolation("basis row count does not match 3 * Nv");
  }
  if (!base_vertices.allFinite() || !identity_basis.allFinite() || !expression_basis.allFinite()) {
    throw ContractViolation("head model contains non-finite entries");
  }
  if (static_cast<Eigen::Index>(semantic_labels.size()) != nv) throw ContractViolation("one label per vertex");
  std::set<int> distinct;
  for (int s : semantic_labels) {
    if (s < 0 || s >= semantic_classes) throw ContractViolation("semantic label out of range: " + std::to_string(s));
    distinct.insert(s);
  }
  if (distinct.size() < 2) throw ContractViolation("semantic labels must cover at least 2 classes");
  if (latent_codes.rank() != 2 || latent_codes.dim(0) != static_cast<std::size_t>(nv)) {
    throw ContractViolation("latent codes must be [Nv, Dz]");
  }
}

Icosphere make_icosphere(int level) {
  if (level < 0) throw ContractViolation("icosphere level must be non-negative");
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Eigen::Vector3d> verts = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                                        {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& v : verts) v.normalize();
  std::vector<std::array<int, 3>> faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                                           {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                           {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                                           {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int l = 0; l < level; ++l) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      verts.push_back((verts[a] + verts[b]).normalized());
      const int idx = static_cast<int>(verts.size()) - 1;
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      const int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }
  Icosphere ico;
  ico.vertices.resize(static_cast<Eigen::Index>(verts.size()), 3);
  for (std::size_t i = 0; i < verts.size(); ++i) ico.vertices.row(static_cast<Eigen::Index>(i)) = verts[i].transpose();
  ico.faces = std::move(faces);
  return ico;
}

Points vertices(const HeadModel& model, const IdentityParams& beta, const ExpressionParams& psi) {
  check_params(model, beta, psi);
  const Eigen::VectorXd offset = model.identity_basis * beta.values + model.expression_basis * psi.values;
  return model.base_vertices + unflatten(offset);
}

Points displacement(const HeadModel& model, const IdentityParams& beta, const ExpressionParams& psi) {
  return vertices(model, beta, ExpressionParams::neutral(model.expression_dim())) - vertices(model, beta, psi);
}

Eigen::MatrixXd semantic_one_hot(const HeadModel& model) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(model.num_vertices(), model.semantic_classes);
  for (Eigen::Index v = 0; v < model.num_vertices(); ++v) {
    const int s = model.semantic_labels[static_cast<std::size_t>(v)];
    if (s < 0 || s >= model.semantic_classes) {
      throw ContractViolation("semantic label " + std::to_string(s) + " out of range at vertex " + std::to_string(v));
    }
    out(v, s) = 1.0;
  }
  return out;
}

HeadModel generate_synthetic_head(std::uint64_t seed, const HeadDims& dims) {
  if (dims.identity_dim <= 0 || dims.expression_dim <= 0 || dims.semantic_classes <= 1 || dims.latent_dim <= 0) {
    throw ContractViolation("head dimensions must be positive (and at least 2 semantic classes)");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  const Icosphere ico = make_icosphere(dims.subdivision_level);
  const Eigen::Index nv = ico.vertices.rows();
  if (dims.expression_dim > nv) throw ContractViolation("more expression columns than vertices");

  HeadModel model;
  model.faces = ico.faces;
  model.base_vertices = ico.vertices;
  for (int c = 0; c < 3; ++c) model.base_vertices.col(c) *= kHeadProportions[static_cast<std::size_t>(c)];

  model.identity_basis.resize(3 * nv, dims.identity_dim);
  for (int k = 0; k < dims.identity_dim; ++k) {
    Eigen::Matrix3d a;
    for (int i = 0; i < 9; ++i) a(i / 3, i % 3) = kIdentityScale * normal(rng);
    for (Eigen::Index v = 0; v < nv; ++v) {
      model.identity_basis.block<3, 1>(3 * v, k) = a * ico.vertices.row(v).transpose();
    }
  }

  std::vector<int> order(static_cast<std::size_t>(nv));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  model.expression_basis = Eigen::MatrixXd::Zero(3 * nv, dims.expression_dim);
  for (int j = 0; j < dims.expression_dim; ++j) {
    const Eigen::Vector3d center = ico.vertices.row(order[static_cast<std::size_t>(j)]).transpose();
    const double sign = normal(rng) < 0.0 ? -1.0 : 1.0;
    for (Eigen::Index v = 0; v < nv; ++v) {
      const Eigen::Vector3d n = ico.vertices.row(v).transpose();
      const double w = std::exp(-(n - center).squaredNorm() / (2.0 * kBumpRadius * kBumpRadius));
      model.expression_basis.block<3, 1>(3 * v, j) = sign * kBumpAmplitude * w * n;
    }
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(model.expression_basis);
  if (qr.rank() != dims.expression_dim) throw ContractViolation("expression basis is rank deficient");

  model.semantic_classes = dims.semantic_classes;
  model.semantic_labels.resize(static_cast<std::size_t>(nv));
  std::vector<int> counts(static_cast<std::size_t>(dims.semantic_classes), 0);
  for (Eigen::Index v = 0; v < nv; ++v) {
    const double azimuth = std::atan2(ico.vertices(v, 0), ico.vertices(v, 2));  // about the vertical axis
    int s = static_cast<int>(std::floor((azimuth + std::numbers::pi) / (2.0 * std::numbers::pi) * dims.semantic_classes));
    s = std::clamp(s, 0, dims.semantic_classes - 1);
    model.semantic_labels[static_cast<std::size_t>(v)] = s;
    ++counts[static_cast<std::size_t>(s)];
  }
  if (std::find(counts.begin(), counts.end(), 0) != counts.end()) {
    throw ContractViolation("a semantic class received no vertices; use a finer subdivision level");
  }

  std::vector<double> z(static_cast<std::size_t>(nv * dims.latent_dim));
  for (double& x : z) x = kLatentInitScale * normal(rng);
  model.latent_codes = Tensor::from({static_cast<std::size_t>(nv), static_cast<std::size_t>(dims.latent_dim)},
                                    std::move(z), true);
  model.validate();
  return model;
}

}  // namespace headrf
