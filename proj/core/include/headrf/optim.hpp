// Copyright 2026 The headrf Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "headrf/checkpoint.hpp"
#include "headrf/tensor.hpp"

namespace headrf {

struct NamedParam {
  std::string name;
  Tensor tensor;
};

struct AdamOptions {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First and second moment estimates, one pair per parameter, plus the
/// number of completed steps.
struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  long step = 0;
};

/// One bias-corrected Adam update in place. Step index used for the bias
/// correction is `state.step + 1`. Throws NonFiniteError naming the first
/// parameter whose gradient has a NaN/Inf; in that case nothing is modified.
void adam_step(std::vector<NamedParam>& params, const std::vector<std::vector<double>>& grads, AdamState& state,
               const AdamOptions& options);

class Adam {
 public:
  Adam(std::vector<NamedParam> params, AdamOptions options);

  /// Applies the update from each parameter's accumulated gradient.
  void step();
  void zero_grad();

  const std::vector<NamedParam>& params() const { return params_; }
  const AdamState& state() const { return state_; }
  const AdamOptions& options() const { return options_; }

  /// Moments as named arrays ("adam.m/<name>", "adam.v/<name>", "adam.step").
  std::vector<NamedArray> export_state() const;
  void import_state(const std::vector<NamedArray>& arrays);

 private:
  std::vector<NamedParam> params_;
  AdamOptions options_;
  AdamState state_;
};

}  // namespace headrf
