// Copyright 2026 The headrf Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <limits>
#include <vector>

#include "headrf/renderer.hpp"

namespace headrf {

/// Returned by `psnr` for identical images.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

/// 10 log10(1 / MSE) over all channels, for images in [0, 1].
double psnr(const Image& a, const Image& b);

/// Luma (0.299, 0.587, 0.114) of each pixel, H*W.
std::vector<double> luma(const Image& image);

struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

/// Mean SSIM over all fully-contained Gaussian windows of the luma images.
/// Throws ContractViolation when the image is smaller than the window.
double ssim(const Image& a, const Image& b, const SsimOptions& options = {});

}  // namespace headrf
