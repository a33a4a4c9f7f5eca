// Copyright 2026 The headrf Authors.
// SPDX-License-Identifier: Apache-2.0
#include "headrf/optim.hpp"

#include <algorithm>
#include <cmath>

namespace headrf {

void adam_step(std::vector<NamedParam>& params, const std::vector<std::vector<double>>& grads, AdamState& state,
               const AdamOptions& options) {
  if (grads.size() != params.size()) throw ContractViolation("adam_step: one gradient per parameter required");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.tensor.numel(), 0.0);
      state.v.emplace_back(p.tensor.numel(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw ContractViolation("adam_step: state does not match parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::size_t n = params[i].tensor.numel();
    if (grads[i].size() != n || state.m[i].size() != n || state.v[i].size() != n) {
      throw ContractViolation("adam_step: shape mismatch for parameter '" + params[i].name + "'");
    }
    if (!std::all_of(grads[i].begin(), grads[i].end(), [](double g) { return std::isfinite(g); })) {
      throw NonFiniteError("adam_step: non-finite gradient in parameter '" + params[i].name + "'");
    }
  }
  const long t = state.step + 1;
  const double bc1 = 1.0 - std::pow(options.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(options.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].tensor.mutable_data();
    auto& m = state.m[i];
    auto& v = state.v[i];
    const auto& g = grads[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = options.beta1 * m[j] + (1.0 - options.beta1) * g[j];
      v[j] = options.beta2 * v[j] + (1.0 - options.beta2) * g[j] * g[j];
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      p[j] -= options.lr * m_hat / (std::sqrt(v_hat) + options.eps);
    }
  }
  state.step = t;
}

Adam::Adam(std::vector<NamedParam> params, AdamOptions options) : params_(std::move(params)), options_(options) {
  for (const auto& p : params_) {
    state_.m.emplace_back(p.tensor.numel(), 0.0);
    state_.v.emplace_back(p.tensor.numel(), 0.0);
  }
}

void Adam::step() {
  std::vector<std::vector<double>> grads;
  grads.reserve(params_.size());
  for (const auto& p : params_) grads.push_back(p.tensor.grad_values());
  adam_step(params_, grads, state_, options_);
}

void Adam::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

std::vector<NamedArray> Adam::export_state() const {
  std::vector<NamedArray> out;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    out.push_back({"adam.m/" + params_[i].name, params_[i].tensor.shape(), state_.m[i]});
    out.push_back({"adam.v/" + params_[i].name, params_[i].tensor.shape(), state_.v[i]});
  }
  out.push_back({"adam.step", {}, {static_cast<double>(state_.step)}});
  return out;
}

void Adam::import_state(const std::vector<NamedArray>& arrays) {
  AdamState next;
  for (const auto& p : params_) {
    const NamedArray* m = find_array(arrays, "adam.m/" + p.name);
    const NamedArray* v = find_array(arrays, "adam.v/" + p.name);
    if (m == nullptr || v == nullptr || m->values.size() != p.tensor.numel() ||
        v->values.size() != p.tensor.numel()) {
      throw ContractViolation("optimizer state missing or mismatched for '" + p.name + "'");
    }
    next.m.push_back(m->values);
    next.v.push_back(v->values);
  }
  const NamedArray* step = find_array(arrays, "adam.step");
  if (step == nullptr || step->values.size() != 1) throw ContractViolation("optimizer step count missing");
  next.step = static_cast<long>(step->values[0]);
  state_ = std::move(next);
}

}  // namespace headrf
