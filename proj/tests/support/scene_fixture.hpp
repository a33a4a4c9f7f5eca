// Copyright 2026 The headrf Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>

#include "headrf/dataset.hpp"
#include "headrf/trainer.hpp"

namespace headrf::testing {

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("headrf_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

/// Small scene that renders in well under a second.
inline GeneratorSettings tiny_scene(std::uint64_t seed = 1) {
  GeneratorSettings g;
  g.seed = seed;
  g.width = 16;
  g.height = 16;
  g.n_train = 8;
  g.n_test_seen = 1;
  g.n_test_unseen = 2;
  g.quadrature_samples = 128;
  return g;
}

/// Narrow networks with the full topology.
inline ModelConfig tiny_model() {
  ModelConfig m;
  m.fields.deform_freqs = 2;
  m.fields.deform_depth = 3;
  m.fields.deform_width = 16;
  m.fields.pos_freqs = 3;
  m.fields.dir_freqs = 2;
  m.fields.trunk_depth = 3;
  m.fields.trunk_width = 16;
  m.fields.skip_layer = 2;
  m.fields.color_width = 8;
  m.fields.appearance_dim = 4;
  m.conv_hidden = 4;
  m.conv_out = 4;
  m.voxel_size = 0.1;
  m.coarse_samples = 8;
  m.fine_samples = 8;
  return m;
}

inline TrainConfig tiny_train(int iterations) {
  TrainConfig c;
  c.iterations = iterations;
  c.rays_per_batch = 32;
  c.checkpoint_interval = 0;
  c.edge_rays = 4;
  c.edge_samples = 8;
  c.model = tiny_model();
  return c;
}

inline SceneManifest tiny_dataset(const std::string& name, const GeneratorSettings& settings = tiny_scene()) {
  const auto dir = scratch_dir(name);
  return generate_dataset(settings, dir);
}

}  // namespace headrf::testing
