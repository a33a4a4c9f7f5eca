// Copyright 2026 The headrf Authors.
// SPDX-License-Identifier: Apache-2.0
#include "headrf/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <fmt/format.h>

#include "headrf/avatar.hpp"
#include "headrf/head_model.hpp"
#include "headrf/metrics.hpp"
#include "headrf/motion_volume.hpp"
#include "headrf/objectives.hpp"

namespace headrf {
namespace {

struct Outcome {
  bool passed;
  std::string detail;
};

Outcome within(double err, double tol) { return {err <= tol, fmt::format("max error {:.3g} (tol {:.0e})", err, tol)}; }

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double worst = a.size() == b.size() ? 0.0 : std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) worst = std::max(worst, std::fabs(a[i] - b[i]));
  return worst;
}

RowMatrix row(std::initializer_list<double> v) {
  RowMatrix m(1, static_cast<Eigen::Index>(v.size()));
  std::copy(v.begin(), v.end(), m.data());
  return m;
}

// Worst relative error of tape gradients against central differences.
double fd_worst(const std::function<Tensor()>& f, std::vector<Tensor> leaves, double step, double floor) {
  for (auto& l : leaves) {
    l.set_requires_grad(true);
    l.zero_grad();
  }
  {
    Tape tape;
    TapeScope scope(tape);
    tape.backward(f());
  }
  double worst = 0.0;
  for (auto& l : leaves) {
    const std::vector<double> g = l.grad_values();
    auto v = l.mutable_data();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double keep = v[i];
      v[i] = keep + step;
      const double up = f().item();
      v[i] = keep - step;
      const double down = f().item();
      v[i] = keep;
      const double numeric = (up - down) / (2 * step);
      worst = std::max(worst, std::fabs(g[i] - numeric) / std::max({std::fabs(g[i]), std::fabs(numeric), floor}));
    }
  }
  return worst;
}

Tensor uniform(std::mt19937_64& rng, Shape shape, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = u(rng);
  return Tensor::from(std::move(shape), std::move(v));
}

Points lattice(int n, double h) {
  Points p(n * n * n, 3);
  Eigen::Index r = 0;
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y)
      for (int z = 0; z < n; ++z) p.row(r++) << (x + 0.5) * h, (y + 0.5) * h, (z + 0.5) * h;
  return p;
}

double penalty_closed_form(double w) { return -std::log(std::exp(-std::fabs(w)) + std::exp(-std::fabs(1.0 - w))); }

}  // namespace

std::vector<SelftestCheck> run_selftest(const SelftestOptions& options) {
  const CompositeFn comp = options.composite ? options.composite : CompositeFn(composite);
  std::vector<std::pair<std::string, std::function<Outcome()>>> checks;
  const Rgb bg{1.0, 0.5, 0.25};

  checks.emplace_back("composite_empty", [&] {
    const CompositeResult c = comp(Tensor::zeros({1, 2}), Tensor::full({2, 3}, 0.3), row({0.5, 0.5}), bg);
    return within(std::max(max_abs_diff(c.color.data(), bg), std::fabs(c.alpha[0])), 1e-10);
  });
  checks.emplace_back("composite_opaque", [&] {
    const Tensor rgb = Tensor::from({2, 3}, {0.9, 0.2, 0.1, 0.0, 1.0, 0.0});
    const CompositeResult c = comp(Tensor::from({1, 2}, {1e4, 3.0}), rgb, row({1.0, 1.0}), bg);
    const std::vector<double> first{0.9, 0.2, 0.1};
    return within(std::max(max_abs_diff(c.color.data(), first), std::fabs(c.alpha[0] - 1.0)), 1e-10);
  });
  checks.emplace_back("composite_half_split", [&] {
    const Tensor rgb = Tensor::from({2, 3}, {1.0, 0.0, 0.2, 0.0, 1.0, 0.6});
    const CompositeResult c = comp(Tensor::from({1, 2}, {std::numbers::ln2, 50.0}), rgb, row({1.0, 1.0}), bg);
    const std::vector<double> color{0.5, 0.5, 0.4}, w{0.5, 0.5};
    return within(std::max(max_abs_diff(c.color.data(), color), max_abs_diff(c.weights.data(), w)), 1e-10);
  });
  checks.emplace_back("composite_loop_oracle", [&] {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const std::size_t n = 16, k = 24;
    const Tensor sigma = uniform(rng, {n, k}, 0.0, 8.0), rgb = uniform(rng, {n * k, 3}, 0.0, 1.0);
    RowMatrix deltas(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
    for (Eigen::Index i = 0; i < deltas.size(); ++i) deltas.data()[i] = 0.01 + 0.1 * u(rng);
    const CompositeResult c = comp(sigma, rgb, deltas, bg);
    std::vector<double> color(n * 3);
    for (std::size_t r = 0; r < n; ++r) {
      double trans = 1.0, acc = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        const double a = 1.0 - std::exp(-sigma[r * k + j] * deltas(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)));
        for (int ch = 0; ch < 3; ++ch) color[r * 3 + ch] += trans * a * rgb[(r * k + j) * 3 + ch];
        acc += trans * a;
        trans *= 1.0 - a;
      }
      for (int ch = 0; ch < 3; ++ch) color[r * 3 + ch] += (1.0 - acc) * bg[static_cast<std::size_t>(ch)];
    }
    return within(max_abs_diff(c.color.data(), color), 1e-12);
  });
  checks.emplace_back("hard_surface_closed_form", [] {
    const double ends = -std::log(1.0 + std::exp(-1.0)), half = 0.5 - std::numbers::ln2;
    double err = std::fabs(hard_surface(Tensor::from({1}, {0.0})).item() - ends);
    err = std::max(err, std::fabs(hard_surface(Tensor::from({1}, {1.0})).item() - ends));
    err = std::max(err, std::fabs(hard_surface(Tensor::from({1}, {0.5})).item() - half));
    err = std::max(err, std::fabs(ends + 0.31326) > 5e-6 ? 1.0 : 0.0);
    err = std::max(err, std::fabs(half + 0.19315) > 5e-6 ? 1.0 : 0.0);
    return within(err, 1e-9);
  });
  checks.emplace_back("opacity_penalty_scan", [] {
    bool ok = true;
    double prev = -1e9;
    for (int i = 0; i <= 100; ++i) {
      const double w = i * 0.01, v = binary_opacity_penalty(Tensor::from({1}, {w})).item();
      ok = ok && std::fabs(v - penalty_closed_form(w)) < 1e-12;
      ok = ok && (i > 50 || v > prev);  // rising to the peak at 0.5
      ok = ok && (i <= 50 || v < prev);
      prev = v;
    }
    return Outcome{ok, ok ? "symmetric with a single peak at 0.5" : "extremum structure broken"};
  });
  checks.emplace_back("canonical_edge_closed_form", [] {
    EdgeProbeSettings s{4, 8, 1.0};
    std::mt19937_64 rng(5);
    const ProbeRays probes = draw_probe_rays(s, rng);
    auto forced = [&](double first_depth) {
      std::vector<double> sigma(probes.deltas.size(), 0.0);
      for (int r = 0; r < s.num_rays; ++r) sigma[r * s.samples] = first_depth / probes.deltas[r * s.samples];
      const DensityFn f = [sigma](const Tensor& p) { return Tensor::from({p.dim(0), 1}, sigma); };
      return binary_opacity_penalty(probe_alpha(f, probes, s)).item();
    };
    const double ends = -std::log(1.0 + std::exp(-1.0)), half = 0.5 - std::numbers::ln2;
    const double err = std::max({std::fabs(forced(0.0) - ends), std::fabs(forced(std::numbers::ln2) - half),
                                 std::fabs(forced(800.0) - ends)});
    return within(err, 1e-9);
  });
  checks.emplace_back("trilinear_linear_field", [] {
    const double h = 0.125;
    const auto layout = make_anchor_layout(lattice(5, h), h);
    Eigen::Matrix3d a;
    a << 0.3, -1.2, 2.0, 0.7, 0.1, -0.4, -1.5, 0.9, 0.25;
    std::vector<double> lin;
    for (const auto& c : layout->occupied) {
      const Eigen::Vector3d f = a * layout->center(c);
      lin.insert(lin.end(), {f[0] + 0.2, f[1], f[2] - 0.1});
    }
    const VoxelGrid grid{layout, Tensor::from({layout->num_occupied(), 3}, lin)};
    std::mt19937_64 rng(8);
    const Eigen::Vector3d lo = layout->center(layout->occupied.front()), hi = layout->center(layout->occupied.back());
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> xs(300);
    for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = lo[i % 3] + u(rng) * (hi[i % 3] - lo[i % 3]);
    const Tensor q = query(grid, Tensor::from({100, 3}, xs));
    double worst = 0.0;
    for (std::size_t i = 0; i < 100; ++i) {
      const Eigen::Vector3d e = a * Eigen::Vector3d(xs[3 * i], xs[3 * i + 1], xs[3 * i + 2]);
      worst = std::max({worst, std::fabs(q[3 * i] - e[0] - 0.2), std::fabs(q[3 * i + 1] - e[1]),
                        std::fabs(q[3 * i + 2] - e[2] + 0.1)});
    }
    return within(worst, 1e-12);
  });
  checks.emplace_back("trilinear_nodes", [] {
    const double h = 0.125;
    const auto layout = make_anchor_layout(lattice(3, h), h);
    std::mt19937_64 rng(9);
    const Tensor feats = uniform(rng, {layout->num_occupied(), 2}, -1.0, 1.0);
    std::vector<double> centers;
    for (const auto& c : layout->occupied) {
      const Eigen::Vector3d x = layout->center(c);
      centers.insert(centers.end(), {x[0], x[1], x[2]});
    }
    const Tensor q = query({layout, feats}, Tensor::from({layout->num_occupied(), 3}, centers));
    return within(max_abs_diff(q.data(), feats.data()), 0.0);
  });
  checks.emplace_back("diffuse_dense_oracle", [] {
    const double h = 0.125;
    std::mt19937_64 rng(11);
    std::bernoulli_distribution keep(0.4);
    std::vector<Eigen::Vector3d> pts;
    for (int x = 0; x < 8; ++x)
      for (int y = 0; y < 8; ++y)
        for (int z = 0; z < 8; ++z)
          if (keep(rng) || x + y + z == 0) pts.emplace_back((x + 0.5) * h, (y + 0.5) * h, (z + 0.5) * h);
    Points p(static_cast<Eigen::Index>(pts.size()), 3);
    for (std::size_t i = 0; i < pts.size(); ++i) p.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
    const auto layout = make_anchor_layout(p, h);
    const std::size_t cin = 3;
    const Tensor feats = uniform(rng, {layout->num_occupied(), cin}, -1.0, 1.0);
    const SparseConvNet net = SparseConvNet::init(static_cast<int>(cin), 12, 4, 2);
    const VoxelGrid out = diffuse({layout, feats}, net);
    // Dense zero-padded correlation over the extents.
    const int ex = layout->extents[0], ey = layout->extents[1], ez = layout->extents[2];
    auto at = [&](const std::vector<double>& grid, std::size_t ch, int x, int y, int z, std::size_t c) {
      if (x < 0 || y < 0 || z < 0 || x >= ex || y >= ey || z >= ez) return 0.0;
      return grid[((static_cast<std::size_t>(x) * ey + y) * ez + z) * ch + c];
    };
    std::vector<double> dense(static_cast<std::size_t>(ex) * ey * ez * cin, 0.0);
    for (std::size_t i = 0; i < layout->num_occupied(); ++i) {
      const auto& c = layout->occupied[i];
      for (std::size_t ch = 0; ch < cin; ++ch) {
        dense[((static_cast<std::size_t>(c[0]) * ey + c[1]) * ez + c[2]) * cin + ch] = feats[i * cin + ch];
      }
    }
    auto conv_at = [&](const std::vector<double>& grid, std::size_t ci, const Tensor& w, std::size_t co,
                       const VoxelCoord& c, std::size_t o) {
      double acc = 0.0;
      for (int t = 0; t < kKernelTaps; ++t) {
        const VoxelCoord off = kernel_offset(t);
        for (std::size_t ch = 0; ch < ci; ++ch) {
          acc += at(grid, ci, c[0] + off[0], c[1] + off[1], c[2] + off[2], ch) * w[(t * ci + ch) * co + o];
        }
      }
      return acc;
    };
    const auto hidden = static_cast<std::size_t>(net.hidden_channels());
    const auto cout = static_cast<std::size_t>(net.out_channels());
    std::vector<double> mid(static_cast<std::size_t>(ex) * ey * ez * hidden, 0.0);
    for (const auto& c : layout->occupied) {
      for (std::size_t o = 0; o < hidden; ++o) {
        mid[((static_cast<std::size_t>(c[0]) * ey + c[1]) * ez + c[2]) * hidden + o] =
            std::max(0.0, conv_at(dense, cin, net.w1, hidden, c, o));
      }
    }
    std::vector<double> expect;
    for (const auto& c : layout->occupied) {
      for (std::size_t o = 0; o < cout; ++o) expect.push_back(conv_at(mid, hidden, net.w2, cout, c, o) + net.b2[o]);
    }
    return within(max_abs_diff(out.features.data(), expect), 1e-10);
  });
  checks.emplace_back("displacement_canonical_zero", [] {
    const HeadModel head = generate_synthetic_head(5, HeadDims{2, 3, 4, 6, 2});
    const IdentityParams beta{Eigen::VectorXd::LinSpaced(3, -0.5, 0.5)};
    return within(displacement(head, beta, ExpressionParams::neutral(4)).cwiseAbs().maxCoeff(), 0.0);
  });
  checks.emplace_back("displacement_linear_identity_free", [] {
    const HeadModel head = generate_synthetic_head(5, HeadDims{2, 3, 4, 6, 2});
    const IdentityParams b0 = IdentityParams::zero(3), b1{Eigen::VectorXd::Constant(3, 0.7)};
    const ExpressionParams p{Eigen::Vector4d(0.3, -0.2, 0.5, 0.1)}, q{Eigen::Vector4d(-0.4, 0.6, 0.0, 0.2)};
    const ExpressionParams sum{p.values * 2.0 + q.values};
    const Points lin = displacement(head, b0, sum) - 2.0 * displacement(head, b0, p) - displacement(head, b0, q);
    const Points ind = displacement(head, b0, p) - displacement(head, b1, p);
    return within(std::max(lin.cwiseAbs().maxCoeff(), ind.cwiseAbs().maxCoeff()), 1e-10);
  });
  checks.emplace_back("primitive_gradients", [] {
    std::mt19937_64 rng(13);
    const Tensor a = uniform(rng, {3, 4}, 0.2, 1.5), b = uniform(rng, {3, 4}, -1.0, 1.0);
    const Tensor w = uniform(rng, {4, 2}, -1.0, 1.0), bias = uniform(rng, {2}, -1.0, 1.0);
    const double worst = fd_worst(
        [&] {
          const Tensor h = add(mul(sigmoid(a), exp(b)), sqrt(a));
          const Tensor s = sum(cumsum(mul(log(a), sin(b)), 1, true));
          return add(sum(square(affine(h, w, bias))), add(s, sum(cos(reshape(b, {4, 3})))));
        },
        {a, b, w, bias}, 1e-6, 1e-6);
    return within(worst, 1e-4);
  });
  checks.emplace_back("composite_gradient", [&] {
    std::mt19937_64 rng(17);
    const Tensor sigma = uniform(rng, {1, 2}, 0.5, 2.0), rgb = uniform(rng, {2, 3}, 0.1, 0.9);
    const RowMatrix deltas = row({0.4, 0.7});
    const Tensor target = Tensor::full({1, 3}, 0.5);
    const double worst = fd_worst([&] { return sum(square(sub(comp(sigma, rgb, deltas, bg).color, target))); },
                                  {sigma, rgb}, 1e-6, 1e-6);
    return within(worst, 1e-4);
  });
  checks.emplace_back("psnr_closed_form", [] {
    Image a(4, 4), b(4, 4);
    std::fill(a.rgb.begin(), a.rgb.end(), 0.5);
    std::fill(b.rgb.begin(), b.rgb.end(), 0.6);
    const double v = psnr(a, b);
    return Outcome{std::fabs(v - 20.0) < 1e-9 && psnr(a, a) == kPsnrIdentical, fmt::format("PSNR {:.12f}", v)};
  });
  checks.emplace_back("ssim_identical", [] {
    Image a(16, 16);
    for (std::size_t i = 0; i < a.rgb.size(); ++i) a.rgb[i] = 0.5 + 0.4 * std::sin(0.37 * static_cast<double>(i));
    return within(std::fabs(ssim(a, a) - 1.0), 0.0);
  });
  checks.emplace_back("static_reduction", [] {
    GeneratorSettings g;
    g.width = 8;
    g.height = 8;
    g.n_train = 8;
    g.n_test_seen = 1;
    g.n_test_unseen = 1;
    g.head = HeadDims{2, 4, 8, 6, 4};
    const SceneManifest m = make_manifest(g);
    ModelConfig mc;
    mc.fields.trunk_width = 16;
    mc.fields.deform_width = 16;
    mc.fields.color_width = 8;
    mc.coarse_samples = 8;
    mc.fine_samples = 8;
    const HeadAvatar model(m, mc, {}, 7);
    const Frame& f = m.frames.front();
    const Image on = model.render_frame(f, 64, 1, true), off = model.render_frame(f, 64, 1, false);
    const bool same = on.rgb == off.rgb && on.alpha == off.alpha;
    return Outcome{same, same ? "bitwise identical" : "deformation path changed the render"};
  });

  std::vector<SelftestCheck> report;
  for (const auto& [name, fn] : checks) {
    SelftestCheck c{name, false, {}};
    try {
      const Outcome o = fn();
      c.passed = o.passed;
      c.detail = o.detail;
    } catch (const std::exception& e) {
      c.detail = std::string("threw: ") + e.what();
    }
    report.push_back(std::move(c));
  }
  return report;
}

}  // namespace headrf
