// Copyright 2026 The headrf Authors.
// SPDX-License-Identifier: Apache-2.0
#include "headrf/objectives.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Core>

#include "headrf/renderer.hpp"

namespace headrf {
namespace {

constexpr double kAlphaSlack = 1e-9;

void require_finite(const Tensor& t, const char* name) {
  if (!t.all_finite()) throw NonFiniteError(std::string("loss component ") + name + " is not finite");
}

}  // namespace

void LossWeights::validate() const {
  if (!std::isfinite(lambda1) || lambda1 < 0.0) throw ContractViolation("lambda1 must be finite and >= 0");
  if (!std::isfinite(lambda2) || lambda2 < 0.0) throw ContractViolation("lambda2 must be finite and >= 0");
}

Tensor photometric(const Tensor& coarse, const Tensor& fine, const Tensor& target) {
  if (coarse.shape() != target.shape() || fine.shape() != target.shape()) {
    throw ContractViolation("photometric: shapes " + shape_str(coarse.shape()) + ", " + shape_str(fine.shape()) +
                            " and " + shape_str(target.shape()) + " differ");
  }
  if (target.rank() != 2 || target.dim(1) != 3) throw ContractViolation("photometric expects [N, 3] colors");
  const double rays = static_cast<double>(target.dim(0));
  const Tensor err = add(sum(square(sub(coarse, target))), sum(square(sub(fine, target))));
  return mul_scalar(err, 1.0 / rays);
}

Tensor binary_opacity_penalty(const Tensor& a) {
  if (a.numel() == 0) throw ContractViolation("opacity penalty of an empty tensor");
  for (double v : a.data()) {
    if (!(v >= -kAlphaSlack && v <= 1.0 + kAlphaSlack)) {
      throw ContractViolation("opacity " + std::to_string(v) + " outside [0, 1]");
    }
  }
  const Tensor near_zero = exp(neg(abs(a)));
  const Tensor near_one = exp(neg(abs(add_scalar(neg(a), 1.0))));
  return mean(neg(log(add(near_zero, near_one))));
}

Tensor hard_surface(const Tensor& alpha) { return binary_opacity_penalty(alpha); }

Tensor hard_surface_per_sample(const Tensor& weights) { return binary_opacity_penalty(weights); }

ProbeRays draw_probe_rays(const EdgeProbeSettings& settings, std::mt19937_64& rng) {
  if (settings.num_rays < 1) throw ContractViolation("need at least one probe ray");
  if (settings.samples < 2) throw ContractViolation("need at least two samples per probe");
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double r = settings.bound_radius;
  const auto k = static_cast<std::size_t>(settings.samples);
  ProbeRays probes;
  probes.points.reserve(static_cast<std::size_t>(settings.num_rays) * k * 3);
  probes.deltas.reserve(static_cast<std::size_t>(settings.num_rays) * k);
  auto random_dir = [&] {
    Eigen::Vector3d v;
    do {
      v = Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
    } while (v.norm() < 1e-12);
    return v.normalized();
  };
  for (int i = 0; i < settings.num_rays; ++i) {
    const Eigen::Vector3d origin = r * random_dir();
    Eigen::Vector3d dir;
    double chord = 0.0;
    do {
      const Eigen::Vector3d target = r * std::cbrt(unit(rng)) * random_dir();
      dir = target - origin;
      if (dir.norm() < 1e-9) continue;
      dir.normalize();
      chord = -2.0 * origin.dot(dir);
    } while (!(chord > 1e-9));
    const double bin = chord / static_cast<double>(k);
    std::vector<double> depth(k);
    for (std::size_t j = 0; j < k; ++j) depth[j] = (static_cast<double>(j) + unit(rng)) * bin;
    for (std::size_t j = 0; j < k; ++j) {
      const Eigen::Vector3d p = origin + depth[j] * dir;
      probes.points.insert(probes.points.end(), {p.x(), p.y(), p.z()});
      probes.deltas.push_back(j + 1 < k ? depth[j + 1] - depth[j] : kFarDelta);
    }
  }
  return probes;
}

Tensor probe_alpha(const DensityFn& density, const ProbeRays& probes, const EdgeProbeSettings& settings) {
  const auto n = static_cast<std::size_t>(settings.num_rays), k = static_cast<std::size_t>(settings.samples);
  if (probes.deltas.size() != n * k) throw ContractViolation("probe geometry does not match settings");
  const Tensor sigma = density(Tensor::from({n * k, 3}, probes.points));
  RowMatrix deltas(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  std::copy(probes.deltas.begin(), probes.deltas.end(), deltas.data());
  return composite(sigma, Tensor::zeros({n * k, 3}), deltas, Rgb{0, 0, 0}).alpha;
}

Tensor canonical_edge(const DensityFn& density, const EdgeProbeSettings& settings, std::mt19937_64& rng) {
  const ProbeRays probes = draw_probe_rays(settings, rng);
  return binary_opacity_penalty(probe_alpha(density, probes, settings));
}

Tensor total_loss(const LossTerms& terms, const LossWeights& weights) {
  weights.validate();
  require_finite(terms.photometric, "photometric");
  if (terms.hard) require_finite(*terms.hard, "hard_surface");
  if (terms.edge) require_finite(*terms.edge, "canonical_edge");
  Tensor total = terms.photometric;
  if (terms.hard && weights.lambda1 != 0.0) {
    total = add(total, mul_scalar(*terms.hard, weights.lambda1));
  }
  if (terms.edge && weights.lambda2 != 0.0) {
    total = add(total, mul_scalar(*terms.edge, weights.lambda2));
  }
  require_finite(total, "total");
  return total;
}

}  // namespace headrf
