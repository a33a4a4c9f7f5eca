// Copyright 2026 The headrf Authors.
// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "gradcheck.hpp"
#include "headrf/motion_volume.hpp"
#include "oracles.hpp"

using namespace headrf;
using headrf::testing::dense_conv_oracle;

namespace {

const HeadModel& shared_head() {
  static const HeadModel head = generate_synthetic_head(99);
  return head;
}

Points points_from(const std::vector<Eigen::Vector3d>& pts) {
  Points p(static_cast<Eigen::Index>(pts.size()), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) p.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
  return p;
}

Tensor random_features(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(rows * cols);
  for (double& x : v) x = n(rng);
  return Tensor::from({rows, cols}, std::move(v));
}

}  // namespace

TEST_CASE("anchor layout") {
  SUBCASE("vertex at the bounding-box corner lands in the padded voxel (2,2,2)") {
    const auto layout = make_anchor_layout(points_from({{0.1, 0.2, 0.3}, {0.4, 0.25, 0.5}}), 0.05);
    CHECK(layout->origin.isApprox(Eigen::Vector3d(0.0, 0.1, 0.2)));
    CHECK(layout->occupied.size() == 2);
    CHECK(layout->occupied[0] == VoxelCoord{2, 2, 2});
    CHECK(layout->index_of({2, 2, 2}) == 0);
  }
  SUBCASE("two vertices in one voxel average their features") {
    const auto layout = make_anchor_layout(points_from({{0.0, 0.0, 0.0}, {0.01, 0.01, 0.01}, {1.0, 1.0, 1.0}}), 0.05);
    REQUIRE(layout->occupied.size() == 2);
    Tensor f = Tensor::from({3, 2}, {1.0, 4.0, 3.0, -2.0, 7.0, 7.0});
    Tensor avg = spmm(layout->average, f);
    CHECK(avg.values() == std::vector<double>{2.0, 1.0, 7.0, 7.0});
  }
  SUBCASE("full head occupancy matches brute-force binning") {
    const HeadModel& head = shared_head();
    const Points canon = vertices(head, IdentityParams::zero(4), ExpressionParams::neutral(8));
    const double h = 0.05;
    const auto layout = make_anchor_layout(canon, h);
    const Eigen::Vector3d origin = canon.colwise().minCoeff().transpose();
    std::set<std::array<long, 3>> bins;
    for (Eigen::Index v = 0; v < canon.rows(); ++v) {
      bins.insert({static_cast<long>(std::floor((canon(v, 0) - origin[0]) / h)),
                   static_cast<long>(std::floor((canon(v, 1) - origin[1]) / h)),
                   static_cast<long>(std::floor((canon(v, 2) - origin[2]) / h))});
    }
    CHECK(layout->num_occupied() == bins.size());
    for (const auto& c : layout->occupied) {
      for (int a = 0; a < 3; ++a) {
        CHECK(c[a] >= 2);
        CHECK(c[a] < layout->extents[a] - 2);
      }
    }
  }
  SUBCASE("degenerate input") {
    CHECK_THROWS_AS(make_anchor_layout(points_from({{0.3, 0.3, 0.3}, {0.3, 0.3, 0.3}}), 0.05), ContractViolation);
    CHECK_THROWS_AS(make_anchor_layout(points_from({{0, 0, 0}, {1, 1, 1}}), 0.0), ContractViolation);
  }
}

TEST_CASE("anchored features") {
  const HeadModel& head = shared_head();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-0.6, 0.6);
  ExpressionParams psi{Eigen::VectorXd(8)};
  for (int j = 0; j < 8; ++j) psi.values[j] = u(rng);
  const VoxelGrid grid = anchor(head, IdentityParams::zero(4), psi, 0.05);
  CHECK(grid.channels() == 25);
  CHECK(anchored_channels(head) == 25);
  // psi channels are shared, so every voxel carries psi exactly.
  for (std::size_t v = 0; v < grid.layout->num_occupied(); ++v)
    for (int j = 0; j < 8; ++j) CHECK(grid.features[v * 25 + 3 + j] == doctest::Approx(psi.values[j]).epsilon(1e-14));

  const VoxelGrid masked = anchor(head, IdentityParams::zero(4), psi, 0.05,
                                  ChannelMask{.displacement = false, .expression = false, .semantic = false});
  for (std::size_t v = 0; v < masked.layout->num_occupied(); ++v)
    for (int c = 0; c < 17; ++c) CHECK(masked.features[v * 25 + c] == 0.0);
}

TEST_CASE("diffuse") {
  const HeadModel& head = shared_head();
  SUBCASE("zero input stays zero at initialization") {
    const auto layout = make_anchor_layout(vertices(head, IdentityParams::zero(4), ExpressionParams::neutral(8)), 0.05);
    VoxelGrid grid{layout, Tensor::zeros({layout->num_occupied(), 25})};
    const VoxelGrid out = diffuse(grid, SparseConvNet::init(25, 3));
    CHECK(out.features.shape() == Shape{layout->num_occupied(), 16});
    for (double v : out.features.values()) CHECK(v == 0.0);
  }
  SUBCASE("single voxel with a center-tap identity kernel") {
    const auto layout = make_anchor_layout(points_from({{0.0, 0.0, 0.0}, {0.5, 0.5, 0.5}}), 0.05);
    SparseConvNet net = SparseConvNet::init(4, 5, 32, 16);
    std::fill(net.w1.mutable_data().begin(), net.w1.mutable_data().end(), 0.0);
    for (std::size_t c = 0; c < 4; ++c) net.w1.mutable_data()[(13 * 4 + c) * 32 + c] = 1.0;
    std::mt19937_64 rng(8);
    std::normal_distribution<double> n(0.0, 1.0);
    for (double& b : net.b2.mutable_data()) b = n(rng);
    const std::vector<double> x = {0.7, -0.3, 1.5, -2.0, 0.0, 0.0, 0.0, 0.0};
    const VoxelGrid out = diffuse({layout, Tensor::from({2, 4}, x)}, net);
    // Hand evaluation: relu(x) through the center tap of layer 2.
    for (std::size_t o = 0; o < 16; ++o) {
      double expect = net.b2[o];
      for (std::size_t c = 0; c < 4; ++c) expect += std::max(x[c], 0.0) * net.w2[(13 * 32 + c) * 16 + o];
      CHECK(out.features[o] == doctest::Approx(expect).epsilon(1e-14));
    }
  }
  SUBCASE("random sparse 8^3 grids match the dense convolution oracle") {
    std::mt19937_64 rng(21);
    std::bernoulli_distribution occupied(0.35);
    for (int trial = 0; trial < 4; ++trial) {
      std::vector<Eigen::Vector3d> pts;
      const double h = 0.125;  // exact in binary so centers bin unambiguously
      for (int x = 0; x < 8; ++x)
        for (int y = 0; y < 8; ++y)
          for (int z = 0; z < 8; ++z)
            if (occupied(rng) || (x + y + z == 0) || (x & y & z) == 7) pts.emplace_back((x + 0.5) * h, (y + 0.5) * h, (z + 0.5) * h);
      const auto layout = make_anchor_layout(points_from(pts), h);
      CHECK(layout->num_occupied() == pts.size());
      const std::size_t cin = 5;
      Tensor feats = random_features(rng, layout->num_occupied(), cin);
      SparseConvNet net = SparseConvNet::init(static_cast<int>(cin), 100 + trial, 6, 4);
      for (double& b : net.b2.mutable_data()) b = 0.1 * trial;
      const VoxelGrid out = diffuse({layout, feats}, net);
      // Submanifold: the same layout and one output row per occupied voxel.
      CHECK(out.layout == layout);
      CHECK(out.features.dim(0) == layout->num_occupied());
      const auto oracle = dense_conv_oracle(*layout, feats.values(), cin, net);
      REQUIRE(oracle.size() == out.features.numel());
      double worst = 0.0;
      for (std::size_t i = 0; i < oracle.size(); ++i) worst = std::max(worst, std::fabs(oracle[i] - out.features[i]));
      CHECK(worst < 1e-10);
    }
  }
  SUBCASE("channel mismatch") {
    const auto layout = make_anchor_layout(points_from({{0, 0, 0}, {1, 1, 1}}), 0.5);
    CHECK_THROWS_AS(diffuse({layout, Tensor::zeros({2, 3})}, SparseConvNet::init(4, 1)), ContractViolation);
  }
}

TEST_CASE("trilinear query") {
  // Fully occupied 6^3 block of voxel centers.
  const double h = 0.05;
  std::vector<Eigen::Vector3d> pts;
  for (int x = 0; x < 6; ++x)
    for (int y = 0; y < 6; ++y)
      for (int z = 0; z < 6; ++z) pts.emplace_back((x + 0.5) * h, (y + 0.5) * h, (z + 0.5) * h);
  const auto layout = make_anchor_layout(points_from(pts), h);
  REQUIRE(layout->num_occupied() == 216);
  std::mt19937_64 rng(4);
  const Tensor feats = random_features(rng, 216, 3);
  const VoxelGrid grid{layout, feats};

  SUBCASE("node values are exact") {
    for (std::size_t i = 0; i < 216; i += 17) {
      const Eigen::Vector3d c = layout->center(layout->occupied[i]);
      const Tensor q = query(grid, Tensor::from({1, 3}, {c[0], c[1], c[2]}));
      for (std::size_t k = 0; k < 3; ++k) CHECK(q[k] == feats[i * 3 + k]);
    }
  }
  SUBCASE("cell midpoint is the mean of its 8 corners") {
    const VoxelCoord base = layout->occupied[layout->index_of(layout->occupied[0])];
    const Eigen::Vector3d mid = layout->center(base) + Eigen::Vector3d::Constant(0.5 * h);
    const Tensor q = query(grid, Tensor::from({1, 3}, {mid[0], mid[1], mid[2]}));
    for (std::size_t k = 0; k < 3; ++k) {
      double mean = 0.0;
      for (int corner = 0; corner < 8; ++corner) {
        const int j = layout->index_of({base[0] + ((corner >> 2) & 1), base[1] + ((corner >> 1) & 1), base[2] + (corner & 1)});
        REQUIRE(j >= 0);
        mean += feats[static_cast<std::size_t>(j) * 3 + k] / 8.0;
      }
      CHECK(q[k] == doctest::Approx(mean).epsilon(1e-14));
    }
  }
  SUBCASE("linear fields are reproduced in the interior") {
    Eigen::Matrix3d a;
    a << 0.3, -1.2, 2.0, 0.7, 0.1, -0.4, -1.5, 0.9, 0.25;
    const Eigen::Vector3d b(0.2, -0.1, 0.05);
    std::vector<double> lin;
    for (const auto& c : layout->occupied) {
      const Eigen::Vector3d f = a * layout->center(c) + b;
      lin.insert(lin.end(), {f[0], f[1], f[2]});
    }
    const VoxelGrid linear{layout, Tensor::from({216, 3}, lin)};
    // Interior = between the first and last voxel centers on every axis.
    const Eigen::Vector3d lo = layout->center(layout->occupied.front());
    const Eigen::Vector3d hi = layout->center(layout->occupied.back());
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> xs;
    for (int i = 0; i < 200; ++i) {
      for (int k = 0; k < 3; ++k) xs.push_back(lo[k] + u(rng) * (hi[k] - lo[k]));
    }
    const Tensor q = query(linear, Tensor::from({200, 3}, xs));
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
      const Eigen::Vector3d expect = a * Eigen::Vector3d(xs[3 * i], xs[3 * i + 1], xs[3 * i + 2]) + b;
      for (int k = 0; k < 3; ++k) worst = std::max(worst, std::fabs(q[3 * i + k] - expect[k]));
    }
    CHECK(worst < 1e-12);
  }
  SUBCASE("points with no occupied corner read exactly zero") {
    const Tensor q = query(grid, Tensor::from({3, 3}, {-1.0, 0.1, 0.1, 5.0, 5.0, 5.0, 0.1, 0.1, 0.4}));
    for (double v : q.values()) CHECK(v == 0.0);
  }
  SUBCASE("unoccupied corners keep their weight without renormalization") {
    const auto two = make_anchor_layout(points_from({{0.025, 0.025, 0.025}, {1.0, 1.0, 1.0}}), h);
    const Eigen::Vector3d c = two->center(two->occupied[0]) + Eigen::Vector3d(0.25 * h, 0.0, 0.0);
    const Tensor q = query({two, Tensor::from({2, 1}, {2.0, 0.0})}, Tensor::from({1, 3}, {c[0], c[1], c[2]}));
    CHECK(q[0] == doctest::Approx(0.75 * 2.0).epsilon(1e-14));
  }
  SUBCASE("Lipschitz continuity on fully occupied neighborhoods") {
    const Eigen::Vector3d lo = layout->center(layout->occupied.front());
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> n(0.0, 1.0);
    double worst_ratio = 0.0;
    for (int i = 0; i < 100; ++i) {
      Eigen::Vector3d x = lo + Eigen::Vector3d(u(rng), u(rng), u(rng)) * 4.0 * h;
      Eigen::Vector3d dir(n(rng), n(rng), n(rng));
      dir.normalize();
      const double eps = h / 10.0 * u(rng);
      const Eigen::Vector3d y = x + eps * dir;
      const Tensor q = query(grid, Tensor::from({2, 3}, {x[0], x[1], x[2], y[0], y[1], y[2]}));
      double diff = 0.0;
      for (int k = 0; k < 3; ++k) diff = std::max(diff, std::fabs(q[3 + k] - q[k]));
      worst_ratio = std::max(worst_ratio, diff / eps);
    }
    // Bound: sum of |feature differences| across a cell edge over the voxel size.
    double max_feat = 0.0;
    for (double v : feats.values()) max_feat = std::max(max_feat, std::fabs(v));
    CHECK(worst_ratio <= 3.0 * 2.0 * max_feat / h);
  }
}

TEST_CASE("gradients flow from queries to latent codes through anchor and diffuse") {
  HeadModel head = generate_synthetic_head(5);
  const SparseConvNet net = SparseConvNet::init(anchored_channels(head), 9);
  const ExpressionParams psi{Eigen::VectorXd::Constant(8, 0.3)};
  const Points canon = vertices(head, IdentityParams::zero(4), ExpressionParams::neutral(8));
  const auto layout = make_anchor_layout(canon, 0.05);
  std::vector<double> xs;
  for (Eigen::Index v = 0; v < 40; v += 3) {
    for (int k = 0; k < 3; ++k) xs.push_back(canon(v, k) + 0.01 * (k - 1));
  }
  const Tensor pts = Tensor::from({xs.size() / 3, 3}, xs);
  std::mt19937_64 rng(3);
  const Tensor weights = random_features(rng, xs.size() / 3, 16);
  auto loss = [&] {
    const VoxelGrid out = diffuse(anchor(layout, head, IdentityParams::zero(4), psi), net);
    return sum(mul(query(out, pts), weights));
  };
  auto r = headrf::testing::grad_check(loss, {head.latent_codes, net.w1, net.b2}, 1e-5, 64, 1e-6);
  CHECK(r.max_rel_error < 1e-4);
  // Some latent codes must actually be reached.
  double mag = 0.0;
  for (double g : head.latent_codes.grad()) mag += std::fabs(g);
  CHECK(mag > 0.0);
}

TEST_CASE("ablation masks keep the pipeline finite") {
  HeadModel head = generate_synthetic_head(6);
  const SparseConvNet net = SparseConvNet::init(anchored_channels(head), 2);
  const ExpressionParams psi{Eigen::VectorXd::Constant(8, -0.8)};
  for (const ChannelMask mask : {ChannelMask{.semantic = false}, ChannelMask{.expression = false},
                                 ChannelMask{.displacement = false}, ChannelMask{false, false, false, false}}) {
    const VoxelGrid out = diffuse(anchor(head, IdentityParams::zero(4), psi, 0.05, mask), net);
    CHECK(out.features.all_finite());
  }
}
