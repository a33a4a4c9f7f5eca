// Copyright 2026 The headrf Authors.
// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "gradcheck.hpp"
#include "headrf/fields.hpp"

using namespace headrf;

namespace {

Tensor random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  std::vector<double> v(rows * cols);
  for (double& x : v) x = n(rng);
  return Tensor::from({rows, cols}, std::move(v));
}

Tensor unit_dirs(std::mt19937_64& rng, std::size_t rows) {
  Tensor d = random_matrix(rng, rows, 3);
  auto v = d.mutable_data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double len = std::sqrt(v[3 * r] * v[3 * r] + v[3 * r + 1] * v[3 * r + 1] + v[3 * r + 2] * v[3 * r + 2]);
    for (int c = 0; c < 3; ++c) v[3 * r + c] /= len;
  }
  return d;
}

FieldConfig small_config() {
  FieldConfig c;
  c.deform_width = 16;
  c.trunk_width = 16;
  c.color_width = 8;
  return c;
}

}  // namespace

TEST_CASE("encode examples") {
  PositionalEncoding pe{2, true};
  Tensor y = pe(Tensor::zeros({1, 1}));
  CHECK(y.values() == std::vector<double>{0, 0, 1, 0, 1});

  PositionalEncoding id{0, true};
  Tensor x = Tensor::from({2, 3}, {1, -2, 3, 0.5, 0.25, -7});
  CHECK(id(x).values() == x.values());

  PositionalEncoding one{1, true};
  Tensor h = one(Tensor::from({1, 1}, {0.5}));
  CHECK(h[0] == 0.5);
  CHECK(h[1] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::fabs(h[2]) < 1e-15);
}

TEST_CASE("encode layout and width") {
  for (int L : {0, 1, 4, 10}) {
    for (bool inc : {true, false}) {
      PositionalEncoding pe{L, inc};
      Tensor y = pe(Tensor::zeros({5, 3}));
      CHECK(y.dim(1) == 3 * ((inc ? 1 : 0) + 2 * L));
      CHECK(pe.output_dim(3) == y.dim(1));
    }
  }
  // Component-major: per coordinate, a direct trigonometric evaluation.
  std::mt19937_64 rng(3);
  Tensor x = random_matrix(rng, 7, 3);
  PositionalEncoding pe{4, true};
  Tensor y = pe(x);
  for (std::size_t r = 0; r < 7; ++r) {
    for (std::size_t c = 0; c < 3; ++c) {
      const double v = x[r * 3 + c];
      const double* row = y.data().data() + r * 27 + c * 9;
      CHECK(row[0] == v);
      for (int l = 0; l < 4; ++l) {
        const double f = std::pow(2.0, l) * std::numbers::pi;
        CHECK(row[1 + 2 * l] == doctest::Approx(std::sin(f * v)).epsilon(1e-14));
        CHECK(row[2 + 2 * l] == doctest::Approx(std::cos(f * v)).epsilon(1e-14));
      }
    }
  }
  CHECK_THROWS_AS(PositionalEncoding({-1, true})(x), ContractViolation);
}

TEST_CASE("encode gradient") {
  std::mt19937_64 rng(4);
  Tensor x = random_matrix(rng, 6, 3, 0.5);
  Tensor w = random_matrix(rng, 6, 27);
  PositionalEncoding pe{4, true};
  auto r = testing::grad_check([&] { return sum(mul(pe(x), w)); }, {x}, 1e-6, 64);
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("deform field") {
  const FieldConfig cfg;
  DeformField field(cfg, 8, 16, 11);
  std::mt19937_64 rng(5);
  const std::size_t n = 9;
  Tensor x = random_matrix(rng, n, 3), psi = random_matrix(rng, n, 8), f = random_matrix(rng, n, 16);

  SUBCASE("identity at init") {
    Tensor dx = field(x, psi, f);
    REQUIRE(dx.shape() == Shape{n, 3});
    for (double v : dx.values()) CHECK(v == 0.0);
    CHECK(field.input_dim() == 39 + 8 + 16);
    const auto params = field.params("deform");
    CHECK(params.size() == 12);
    CHECK(params.front().tensor.shape() == Shape{63, 128});
    CHECK(params.back().name == "deform/out/b");
  }

  SUBCASE("width mismatch") { CHECK_THROWS_AS(field(x, psi, slice(f, 1, 0, 15)), ContractViolation); }

  SUBCASE("finite-difference gradient of |dx|^2") {
    DeformField small(small_config(), 8, 16, 12);
    auto params = small.params("deform");
    // Move the output layer off zero so every layer carries gradient.
    std::normal_distribution<double> nd(0.0, 0.3);
    for (auto& p : params) {
      if (p.name.starts_with("deform/out")) {
        for (double& v : p.tensor.mutable_data()) v = nd(rng);
      }
    }
    std::vector<Tensor> leaves;
    for (auto& p : params) leaves.push_back(p.tensor);
    leaves.push_back(x);
    auto r = testing::grad_check([&] { return sum(square(small(x, psi, f))); }, leaves, 1e-6, 24);
    CHECK(r.max_rel_error < 1e-4);
    CHECK(r.checked > 100);
  }
}

TEST_CASE("radiance field") {
  const FieldConfig cfg;
  RadianceField field(cfg, 21);
  std::mt19937_64 rng(6);
  const std::size_t n = 32;
  Tensor x = random_matrix(rng, n, 3, 0.5), d = unit_dirs(rng, n), w = random_matrix(rng, n, 8);

  SUBCASE("ranges") {
    const RadianceOutput out = field(x, d, w);
    REQUIRE(out.sigma.shape() == Shape{n, 1});
    REQUIRE(out.rgb.shape() == Shape{n, 3});
    for (double s : out.sigma.values()) CHECK(s >= 0.0);
    for (double c : out.rgb.values()) {
      CHECK(c > 0.0);
      CHECK(c < 1.0);
    }
    // Extreme inputs still land in range.
    Tensor big = Tensor::full({2, 3}, 50.0);
    const RadianceOutput e = field(big, unit_dirs(rng, 2), Tensor::full({2, 8}, 100.0));
    for (double s : e.sigma.values()) CHECK(s >= 0.0);
    for (double c : e.rgb.values()) CHECK((c >= 0.0 && c <= 1.0));
  }

  SUBCASE("density ignores direction and appearance") {
    const RadianceOutput a = field(x, d, w);
    const RadianceOutput b = field(x, unit_dirs(rng, n), random_matrix(rng, n, 8, 5.0));
    CHECK(a.sigma.values() == b.sigma.values());
    CHECK(field.density(x).values() == a.sigma.values());
    CHECK(a.rgb.values() != b.rgb.values());
  }

  SUBCASE("architecture shapes") {
    const auto params = field.params("canon");
    CHECK(params.size() == 2 * (6 + 3));
    CHECK(params[0].tensor.shape() == Shape{63, 128});
    CHECK(params[2].tensor.shape() == Shape{128, 128});
    CHECK(params[8].tensor.shape() == Shape{128 + 63, 128});  // skip at layer 4
    CHECK(params[12].tensor.shape() == Shape{128, 1});
    CHECK(params[14].tensor.shape() == Shape{128 + 27 + 8, 64});
    CHECK(params[16].tensor.shape() == Shape{64, 3});
  }

  SUBCASE("skip-connected trunk matches a plain evaluation") {
    // Independent forward pass over the exported weights.
    const auto params = field.params("canon");
    const Tensor xs = slice(x, 0, 0, 1);
    std::vector<double> e;
    for (int c = 0; c < 3; ++c) {
      const double v = xs[c];
      e.push_back(v);
      for (int l = 0; l < 10; ++l) {
        e.push_back(std::sin(std::pow(2.0, l) * std::numbers::pi * v));
        e.push_back(std::cos(std::pow(2.0, l) * std::numbers::pi * v));
      }
    }
    std::vector<double> h = e;
    for (int layer = 0; layer < 6; ++layer) {
      if (layer == 4) h.insert(h.end(), e.begin(), e.end());
      const Tensor& W = params[2 * layer].tensor;
      const Tensor& B = params[2 * layer + 1].tensor;
      std::vector<double> next(W.dim(1));
      for (std::size_t o = 0; o < next.size(); ++o) {
        double acc = B[o];
        for (std::size_t i = 0; i < h.size(); ++i) acc += h[i] * W[i * W.dim(1) + o];
        next[o] = std::max(acc, 0.0);
      }
      h = next;
    }
    double sigma = params[13].tensor[0];
    for (std::size_t i = 0; i < h.size(); ++i) sigma += h[i] * params[12].tensor[i];
    CHECK(field.density(xs)[0] == doctest::Approx(std::max(sigma, 0.0)).epsilon(1e-12));
  }

  SUBCASE("zeroed density head renders nothing") {
    RadianceField copy(cfg, 21);
    for (double& v : copy.density_head().weight.mutable_data()) v = 0.0;
    for (double& v : copy.density_head().bias.mutable_data()) v = 0.0;
    const Tensor sigma = copy.density(x);
    for (double s : sigma.values()) CHECK(s == 0.0);
  }
}

TEST_CASE("radiance gradient") {
  RadianceField field(small_config(), 31);
  std::mt19937_64 rng(7);
  Tensor x = random_matrix(rng, 5, 3, 0.3), d = unit_dirs(rng, 5), w = random_matrix(rng, 5, 8);
  auto params = field.params("canon");
  // A positive density bias keeps the ReLU head away from its kink.
  for (double& v : field.density_head().bias.mutable_data()) v = 2.0;
  std::vector<Tensor> leaves{w};
  for (auto& p : params) leaves.push_back(p.tensor);
  auto r = testing::grad_check(
      [&] {
        const RadianceOutput o = field(x, d, w);
        return add(sum(o.sigma), sum(square(o.rgb)));
      },
      leaves, 1e-6, 16, 1e-4);
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("appearance codes") {
  AppearanceCodes three(Tensor::from({3, 2}, {1, 0, 0, 1, 1, 1}, true));
  const Tensor m = three.code(99, CodeMode::kTest);
  CHECK(m[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(m[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(three.code(1, CodeMode::kTrain).values() == std::vector<double>{0, 1});
  CHECK(three.code(5, CodeMode::kTestZero).values() == std::vector<double>{0, 0});
  CHECK_THROWS_AS(three.code(3, CodeMode::kTrain), ContractViolation);
  CHECK_THROWS_AS(three.rows(3, CodeMode::kTrain, 4), ContractViolation);

  AppearanceCodes one(Tensor::from({1, 3}, {0.2, -0.4, 0.9}, true));
  CHECK(one.code(0, CodeMode::kTest).values() == one.code(0, CodeMode::kTrain).values());

  AppearanceCodes zero(Tensor::zeros({4, 8}, true));
  const Tensor zc = zero.code(0, CodeMode::kTest);
  for (double v : zc.values()) CHECK(v == 0.0);

  AppearanceCodes init(32, 8, 5);
  CHECK(init.size() == 32);
  CHECK(init.dim() == 8);
  CHECK(init.table().requires_grad());

  // Rows route gradient only into the selected code.
  Tensor table = three.table();
  table.zero_grad();
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor rows = three.rows(2, CodeMode::kTrain, 4);
    CHECK(rows.shape() == Shape{4, 2});
    tape.backward(sum(rows));
  }
  CHECK(table.grad_values() == std::vector<double>{0, 0, 0, 0, 4, 4});
  const Tensor test_rows = three.rows(0, CodeMode::kTest, 3);
  CHECK(!test_rows.requires_grad());
  CHECK(test_rows[4] == doctest::Approx(2.0 / 3.0));
}
