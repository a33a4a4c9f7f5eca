// Copyright 2026 The headrf Authors.
// SPDX-License-Identifier: Apache-2.0
#include <cstring>
#include <random>

#include <Eigen/QR>

#include "doctest.h"
#include "headrf/head_model.hpp"

using namespace headrf;

namespace {

const HeadModel& shared_head() {
  static const HeadModel head = generate_synthetic_head(1234);
  return head;
}

Eigen::VectorXd random_vec(std::mt19937_64& rng, int n, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

// Naive per-vertex summation, independent of the matrix-vector path.
Points vertices_loop(const HeadModel& m, const Eigen::VectorXd& beta, const Eigen::VectorXd& psi) {
  Points out(m.num_vertices(), 3);
  for (Eigen::Index v = 0; v < m.num_vertices(); ++v) {
    for (int c = 0; c < 3; ++c) {
      double acc = m.base_vertices(v, c);
      for (int k = 0; k < m.identity_dim(); ++k) acc += m.identity_basis(3 * v + c, k) * beta[k];
      for (int j = 0; j < m.expression_dim(); ++j) acc += m.expression_basis(3 * v + c, j) * psi[j];
      out(v, c) = acc;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("icosphere vertex counts follow 10*4^L+2") {
  for (int level = 0; level <= 4; ++level) {
    CHECK(static_cast<std::size_t>(make_icosphere(level).vertices.rows()) == 10 * (1u << (2 * level)) + 2);
  }
  CHECK(icosphere_vertex_count(3) == 642);
  CHECK(shared_head().num_vertices() == 642);
}

TEST_CASE("vertices") {
  const HeadModel& m = shared_head();
  SUBCASE("zero parameters give the base mesh exactly") {
    CHECK(vertices(m, IdentityParams::zero(4), ExpressionParams::neutral(8)) == m.base_vertices);
  }
  SUBCASE("one-hot expression adds one basis column") {
    std::mt19937_64 rng(2);
    IdentityParams beta{random_vec(rng, 4)};
    for (int j = 0; j < 8; ++j) {
      ExpressionParams psi{Eigen::VectorXd::Unit(8, j)};
      const Points v = vertices(m, beta, psi);
      const Points ref = vertices(m, beta, ExpressionParams::neutral(8));
      for (Eigen::Index i = 0; i < m.num_vertices(); ++i)
        for (int c = 0; c < 3; ++c) CHECK(v(i, c) - ref(i, c) == doctest::Approx(m.expression_basis(3 * i + c, j)));
    }
  }
  SUBCASE("random parameters match the per-vertex loop oracle") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 5; ++trial) {
      const Eigen::VectorXd beta = random_vec(rng, 4), psi = random_vec(rng, 8);
      const Points a = vertices(m, {beta}, {psi});
      const Points b = vertices_loop(m, beta, psi);
      CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
  SUBCASE("wrong parameter lengths are contract violations") {
    CHECK_THROWS_AS(vertices(m, IdentityParams::zero(3), ExpressionParams::neutral(8)), ContractViolation);
    CHECK_THROWS_AS(vertices(m, IdentityParams::zero(4), ExpressionParams::neutral(9)), ContractViolation);
  }
}

TEST_CASE("displacement") {
  const HeadModel& m = shared_head();
  std::mt19937_64 rng(4);
  const IdentityParams beta{random_vec(rng, 4)};
  SUBCASE("zero at the canonical expression") {
    CHECK(displacement(m, beta, ExpressionParams::neutral(8)).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("one-hot gives the negated column") {
    const Points d = displacement(m, beta, {Eigen::VectorXd::Unit(8, 5)});
    for (Eigen::Index i = 0; i < m.num_vertices(); ++i)
      for (int c = 0; c < 3; ++c) CHECK(d(i, c) == doctest::Approx(-m.expression_basis(3 * i + c, 5)).epsilon(1e-12));
  }
  SUBCASE("equals two independent vertices() evaluations") {
    const ExpressionParams psi{random_vec(rng, 8)};
    const Points d = displacement(m, beta, psi);
    const Points ref = vertices_loop(m, beta.values, Eigen::VectorXd::Zero(8)) - vertices_loop(m, beta.values, psi.values);
    CHECK((d - ref).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("linear in psi") {
    for (int trial = 0; trial < 10; ++trial) {
      const Eigen::VectorXd p1 = random_vec(rng, 8), p2 = random_vec(rng, 8);
      const double a = random_vec(rng, 1, 2.0)[0], b = random_vec(rng, 1, 2.0)[0];
      const Points lhs = displacement(m, beta, {a * p1 + b * p2});
      const Points rhs = a * displacement(m, beta, {p1}) + b * displacement(m, beta, {p2});
      CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
  SUBCASE("independent of beta") {
    const ExpressionParams psi{random_vec(rng, 8)};
    const Points ref = displacement(m, IdentityParams::zero(4), psi);
    for (int trial = 0; trial < 5; ++trial) {
      CHECK((displacement(m, {random_vec(rng, 4, 3.0)}, psi) - ref).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("semantic one-hot") {
  const HeadModel& m = shared_head();
  const Eigen::MatrixXd oh = semantic_one_hot(m);
  CHECK(oh.rows() == 642);
  CHECK(oh.cols() == 6);
  for (Eigen::Index v = 0; v < oh.rows(); ++v) {
    CHECK(oh.row(v).sum() == 1.0);
    CHECK(oh(v, m.semantic_labels[static_cast<std::size_t>(v)]) == 1.0);
  }
  // Histogram oracle.
  std::vector<double> hist(6, 0.0);
  for (int s : m.semantic_labels) hist[static_cast<std::size_t>(s)] += 1.0;
  for (int s = 0; s < 6; ++s) {
    CHECK(oh.col(s).sum() == hist[static_cast<std::size_t>(s)]);
    CHECK(hist[static_cast<std::size_t>(s)] > 0.0);
  }

  HeadModel tiny = m;
  tiny.semantic_labels[0] = 0;
  Eigen::MatrixXd first = semantic_one_hot(tiny);
  CHECK(first.row(0) == Eigen::RowVectorXd::Unit(6, 0));
  tiny.semantic_labels[3] = 6;
  CHECK_THROWS_AS(semantic_one_hot(tiny), ContractViolation);
}

TEST_CASE("generation is deterministic and well formed") {
  const HeadModel a = generate_synthetic_head(77);
  const HeadModel b = generate_synthetic_head(77);
  const HeadModel c = generate_synthetic_head(78);
  CHECK(a.base_vertices == b.base_vertices);
  CHECK(a.identity_basis == b.identity_basis);
  CHECK(a.expression_basis == b.expression_basis);
  CHECK(a.semantic_labels == b.semantic_labels);
  CHECK(std::memcmp(a.latent_codes.values().data(), b.latent_codes.values().data(),
                    a.latent_codes.numel() * sizeof(double)) == 0);
  CHECK_FALSE(a.expression_basis == c.expression_basis);
  CHECK(a.latent_codes.requires_grad());
  CHECK(a.latent_codes.shape() == Shape{642, 8});
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a.expression_basis);
  CHECK(qr.rank() == 8);
  // Head is about one unit tall.
  CHECK(a.base_vertices.col(1).maxCoeff() - a.base_vertices.col(1).minCoeff() == doctest::Approx(1.0));
  CHECK_NOTHROW(a.validate());
  CHECK_THROWS_AS(generate_synthetic_head(1, HeadDims{.semantic_classes = 1}), ContractViolation);
}
