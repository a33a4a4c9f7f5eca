// Copyright 2026 The headrf Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Plain reference implementations shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <vector>

#include "headrf/motion_volume.hpp"
#include "headrf/renderer.hpp"

namespace headrf::testing {

// Plain per-ray loop, written independently of the tensor composite.
inline void loop_composite(const std::vector<double>& sigma, const std::vector<double>& rgb, const RowMatrix& deltas,
                    const Rgb& bg, std::vector<double>& color, std::vector<double>& alpha,
                    std::vector<double>& weights) {
  const auto n = static_cast<std::size_t>(deltas.rows()), k = static_cast<std::size_t>(deltas.cols());
  color.assign(n * 3, 0.0);
  alpha.assign(n, 0.0);
  weights.assign(n * k, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    double optical = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double sd = sigma[r * k + j] * deltas(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j));
      const double t = std::exp(-optical);
      const double w = t * (1.0 - std::exp(-sd));
      weights[r * k + j] = w;
      alpha[r] += w;
      for (int c = 0; c < 3; ++c) color[r * 3 + c] += w * rgb[(r * k + j) * 3 + c];
      optical += sd;
    }
    for (int c = 0; c < 3; ++c) color[r * 3 + c] += (1.0 - alpha[r]) * bg[static_cast<std::size_t>(c)];
  }
}

// Zero-filled dense grid, plain 3x3x3 correlation with the same tap order,
// then the same on the hidden layer, read back at the occupied voxels.
inline std::vector<double> dense_conv_oracle(const AnchorLayout& layout, const std::vector<double>& feats, std::size_t cin,
                                      const SparseConvNet& net) {
  const int ex = layout.extents[0], ey = layout.extents[1], ez = layout.extents[2];
  auto flat = [&](int x, int y, int z) { return (static_cast<std::size_t>(x) * ey + y) * ez + z; };
  auto conv = [&](const std::vector<double>& in, std::size_t ci, const std::vector<double>& w, std::size_t co,
                  const std::vector<double>* bias) {
    std::vector<double> out(static_cast<std::size_t>(ex) * ey * ez * co, 0.0);
    for (int x = 0; x < ex; ++x)
      for (int y = 0; y < ey; ++y)
        for (int z = 0; z < ez; ++z) {
          double* dst = out.data() + flat(x, y, z) * co;
          if (bias) {
            for (std::size_t o = 0; o < co; ++o) dst[o] = (*bias)[o];
          }
          for (int t = 0; t < kKernelTaps; ++t) {
            const auto off = kernel_offset(t);
            const int nx = x + off[0], ny = y + off[1], nz = z + off[2];
            if (nx < 0 || ny < 0 || nz < 0 || nx >= ex || ny >= ey || nz >= ez) continue;
            const double* src = in.data() + flat(nx, ny, nz) * ci;
            for (std::size_t c = 0; c < ci; ++c)
              for (std::size_t o = 0; o < co; ++o) dst[o] += src[c] * w[(t * ci + c) * co + o];
          }
        }
    return out;
  };
  std::vector<double> dense(static_cast<std::size_t>(ex) * ey * ez * cin, 0.0);
  for (std::size_t i = 0; i < layout.num_occupied(); ++i) {
    const auto& c = layout.occupied[i];
    std::copy_n(feats.data() + i * cin, cin, dense.data() + flat(c[0], c[1], c[2]) * cin);
  }
  const std::size_t hidden = static_cast<std::size_t>(net.hidden_channels());
  std::vector<double> h = conv(dense, cin, net.w1.values(), hidden, nullptr);
  for (double& v : h) v = std::max(v, 0.0);
  // Submanifold: hidden activity exists only on the occupied set.
  std::vector<double> masked(h.size(), 0.0);
  for (const auto& c : layout.occupied) {
    std::copy_n(h.data() + flat(c[0], c[1], c[2]) * hidden, hidden, masked.data() + flat(c[0], c[1], c[2]) * hidden);
  }
  const std::size_t cout = static_cast<std::size_t>(net.out_channels());
  std::vector<double> out = conv(masked, hidden, net.w2.values(), cout, &net.b2.values());
  std::vector<double> result;
  for (const auto& c : layout.occupied) {
    result.insert(result.end(), out.begin() + static_cast<std::ptrdiff_t>(flat(c[0], c[1], c[2]) * cout),
                  out.begin() + static_cast<std::ptrdiff_t>((flat(c[0], c[1], c[2]) + 1) * cout));
  }
  return result;
}

}  // namespace headrf::testing
