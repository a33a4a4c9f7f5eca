// Copyright 2026 The headrf Authors.
// SPDX-License-Identifier: Apache-2.0
#include "headrf/metrics.hpp"

#include <cmath>

namespace headrf {
namespace {

void require_same(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height || a.rgb.size() != b.rgb.size()) {
    throw ContractViolation("image sizes differ: " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                            " vs " + std::to_string(b.width) + "x" + std::to_string(b.height));
  }
}

}  // namespace

double psnr(const Image& a, const Image& b) {
  require_same(a, b);
  if (a.rgb.empty()) throw ContractViolation("psnr of empty images");
  double sse = 0.0;
  for (std::size_t i = 0; i < a.rgb.size(); ++i) {
    const double d = a.rgb[i] - b.rgb[i];
    sse += d * d;
  }
  const double mse = sse / static_cast<double>(a.rgb.size());
  if (mse == 0.0) return kPsnrIdentical;
  return -10.0 * std::log10(mse);
}

std::vector<double> luma(const Image& image) {
  std::vector<double> y(image.num_pixels());
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = 0.299 * image.rgb[3 * i] + 0.587 * image.rgb[3 * i + 1] + 0.114 * image.rgb[3 * i + 2];
  }
  return y;
}

double ssim(const Image& a, const Image& b, const SsimOptions& options) {
  require_same(a, b);
  const int win = options.window;
  if (a.width < win || a.height < win) {
    throw ContractViolation("image " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                            " is smaller than the " + std::to_string(win) + "x" + std::to_string(win) + " window");
  }
  std::vector<double> kernel(static_cast<std::size_t>(win));
  double norm = 0.0;
  for (int i = 0; i < win; ++i) {
    const double x = i - (win - 1) / 2.0;
    kernel[static_cast<std::size_t>(i)] = std::exp(-x * x / (2.0 * options.sigma * options.sigma));
    norm += kernel[static_cast<std::size_t>(i)];
  }
  for (double& k : kernel) k /= norm;

  const std::vector<double> x = luma(a), y = luma(b);
  const double c1 = std::pow(options.k1 * options.dynamic_range, 2);
  const double c2 = std::pow(options.k2 * options.dynamic_range, 2);
  const int w = a.width;
  double total = 0.0;
  std::size_t count = 0;
  for (int top = 0; top + win <= a.height; ++top) {
    for (int left = 0; left + win <= w; ++left) {
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (int i = 0; i < win; ++i) {
        for (int j = 0; j < win; ++j) {
          const double g = kernel[static_cast<std::size_t>(i)] * kernel[static_cast<std::size_t>(j)];
          const std::size_t p = static_cast<std::size_t>(top + i) * w + (left + j);
          mx += g * x[p];
          my += g * y[p];
          sxx += g * x[p] * x[p];
          syy += g * y[p] * y[p];
          sxy += g * x[p] * y[p];
        }
      }
      const double vx = sxx - mx * mx, vy = syy - my * my, cov = sxy - mx * my;
      total += ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

}  // namespace headrf
