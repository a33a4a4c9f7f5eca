// Copyright 2026 The headrf Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <optional>
#include <random>

#include "headrf/tensor.hpp"

namespace headrf {

struct LossWeights {
  double lambda1 = 0.01;  // hard surface
  double lambda2 = 0.01;  // canonical edge

  /// Throws ContractViolation unless both are finite and non-negative.
  void validate() const;
};

/// Mean over rays of |C_coarse - C|^2 + |C_fine - C|^2; all [N, 3].
Tensor photometric(const Tensor& coarse, const Tensor& fine, const Tensor& target);

/// Elementwise -log(exp(-|a|) + exp(-|1 - a|)), averaged over all entries.
/// Entries must lie in [0, 1] (a few ulps of rounding are tolerated).
Tensor binary_opacity_penalty(const Tensor& a);

/// Penalty on per-ray accumulated alpha [N] or [N, 1].
Tensor hard_surface(const Tensor& alpha);

/// Per-sample variant on the composite weights [N, K].
Tensor hard_surface_per_sample(const Tensor& weights);

/// Canonical density on points [M, 3] -> [M, 1] (or [M]).
using DensityFn = std::function<Tensor(const Tensor& points)>;

struct EdgeProbeSettings {
  int num_rays = 16;
  int samples = 32;
  double bound_radius = 1.0;
};

/// Straight probe rays from random points on the bound sphere toward random
/// interior points, composited through `density` alone; the penalty of the
/// resulting alpha, averaged over probes.
Tensor canonical_edge(const DensityFn& density, const EdgeProbeSettings& settings, std::mt19937_64& rng);

/// Probe geometry drawn by `canonical_edge`, exposed for tests.
struct ProbeRays {
  std::vector<double> points;  // num_rays * samples * 3
  std::vector<double> deltas;  // num_rays * samples
};
ProbeRays draw_probe_rays(const EdgeProbeSettings& settings, std::mt19937_64& rng);

/// Accumulated alpha per probe ray, [num_rays, 1].
Tensor probe_alpha(const DensityFn& density, const ProbeRays& probes, const EdgeProbeSettings& settings);

struct LossTerms {
  Tensor photometric;
  std::optional<Tensor> hard;
  std::optional<Tensor> edge;
};

/// L = L_p + lambda1 L_hard + lambda2 L_edge. Terms that are absent or have a
/// zero weight are left out. A non-finite term, used or not, throws
/// NonFiniteError naming it.
Tensor total_loss(const LossTerms& terms, const LossWeights& weights);

}  // namespace headrf
