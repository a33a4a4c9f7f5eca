// Copyright 2026 The headrf Authors.
// SPDX-License-Identifier: Apache-2.0
#include <filesystem>
#include <random>

#include <benchmark/benchmark.h>

#include "headrf/dataset.hpp"
#include "headrf/head_model.hpp"
#include "headrf/metrics.hpp"
#include "headrf/motion_volume.hpp"
#include "headrf/parallel.hpp"
#include "headrf/renderer.hpp"
#include "headrf/trainer.hpp"

using namespace headrf;

namespace {

std::vector<double> uniform(std::size_t n, double lo, double hi, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

void BM_Composite(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const Tensor sigma = Tensor::from({n, k}, uniform(n * k, 0.0, 4.0, 1));
  const Tensor rgb = Tensor::from({n * k, 3}, uniform(n * k * 3, 0.0, 1.0, 2));
  const RowMatrix deltas = RowMatrix::Constant(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k), 0.02);
  for (auto _ : state) benchmark::DoNotOptimize(composite(sigma, rgb, deltas, Rgb{1.0, 1.0, 1.0}));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * k));
}
BENCHMARK(BM_Composite)->Args({1024, 64})->Args({1024, 128});

void BM_TrilinearQuery(benchmark::State& state) {
  static const HeadModel head = generate_synthetic_head(99);
  const VoxelGrid grid =
      anchor(head, IdentityParams::zero(head.identity_dim()), ExpressionParams::neutral(head.expression_dim()),
             state.range(1) / 1000.0);
  const auto m = static_cast<std::size_t>(state.range(0));
  const Tensor points = Tensor::from({m, 3}, uniform(m * 3, -0.8, 0.8, 3));
  for (auto _ : state) benchmark::DoNotOptimize(query(grid, points));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * m));
}
BENCHMARK(BM_TrilinearQuery)->Args({8192, 50})->Args({8192, 100});

void BM_Ssim(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  Image a(side, side), b(side, side);
  a.rgb = uniform(a.rgb.size(), 0.0, 1.0, 4);
  b.rgb = uniform(b.rgb.size(), 0.0, 1.0, 5);
  for (auto _ : state) benchmark::DoNotOptimize(ssim(a, b));
}
BENCHMARK(BM_Ssim)->Arg(64)->Arg(256);

void BM_TrainStep(benchmark::State& state) {
  GeneratorSettings g;
  g.width = 32;
  g.height = 32;
  g.n_train = 8;
  g.n_test_seen = 1;
  g.n_test_unseen = 1;
  g.quadrature_samples = 64;
  const auto dir = std::filesystem::temp_directory_path() / "headrf_bench_scene";
  std::filesystem::remove_all(dir);
  const SceneManifest m = generate_dataset(g, dir);
  TrainConfig c;
  c.rays_per_batch = static_cast<int>(state.range(0));
  c.model.fields.trunk_width = static_cast<int>(state.range(1));
  c.model.fields.color_width = static_cast<int>(state.range(1)) / 2;
  c.model.coarse_samples = 32;
  c.model.fine_samples = 32;
  c.iterations = 1 << 30;
  Trainer trainer(m, c);
  for (auto _ : state) benchmark::DoNotOptimize(trainer.step());
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * c.rays_per_batch));
  std::filesystem::remove_all(dir);
}
BENCHMARK(BM_TrainStep)->Args({128, 64})->Args({128, 128})->Unit(benchmark::kMillisecond);

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
