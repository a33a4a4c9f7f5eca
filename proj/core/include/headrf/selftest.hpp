// Copyright 2026 The headrf Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "headrf/renderer.hpp"

namespace headrf {

struct SelftestCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

using CompositeFn = std::function<CompositeResult(const Tensor& sigma, const Tensor& rgb, const RowMatrix& deltas,
                                                  const Rgb& background)>;

struct SelftestOptions {
  /// Implementation under test for the compositing checks; defaults to `composite`.
  CompositeFn composite;
};

/// Closed-form and oracle checks over the core modules. Each check catches
/// its own exceptions and reports them as failures.
std::vector<SelftestCheck> run_selftest(const SelftestOptions& options = {});

}  // namespace headrf
