// Copyright 2026 The headrf Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "headrf/optim.hpp"
#include "headrf/tensor.hpp"

namespace headrf {

/// Frequency encoding, component-major:
///   [x_c, sin(2^0 pi x_c), cos(2^0 pi x_c), ..., sin(2^(L-1) pi x_c), cos(2^(L-1) pi x_c)]
/// for each input component c (x_c omitted when include_input is false).
struct PositionalEncoding {
  int num_freqs = 0;
  bool include_input = true;

  std::size_t output_dim(std::size_t in_dim) const {
    return in_dim * ((include_input ? 1 : 0) + 2 * static_cast<std::size_t>(num_freqs));
  }
  /// [N, k] -> [N, output_dim(k)], differentiable in x.
  Tensor operator()(const Tensor& x) const;
};

struct Linear {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]

  /// Weights and bias uniform in +-1/sqrt(in).
  static Linear init(std::size_t in, std::size_t out, std::mt19937_64& rng);
  static Linear zeros(std::size_t in, std::size_t out);
  Tensor operator()(const Tensor& x) const { return affine(x, weight, bias); }
  std::size_t in_dim() const { return weight.dim(0); }
  std::size_t out_dim() const { return weight.dim(1); }
};

struct FieldConfig {
  int deform_freqs = 6;
  int deform_depth = 5;
  int deform_width = 128;
  int pos_freqs = 10;
  int dir_freqs = 4;
  int trunk_depth = 6;
  int trunk_width = 128;
  int skip_layer = 4;  // 0-based trunk layer whose input is [h, encoded x]
  int color_width = 64;
  int appearance_dim = 8;
  double density_bias = 1.0;  // initial density-head bias; keeps the ReLU live at start
};

/// Observation-space point, expression and volume feature to a canonical offset.
/// The output layer starts at zero, so a fresh field is the identity warp.
class DeformField {
 public:
  DeformField() = default;
  DeformField(const FieldConfig& config, std::size_t expression_dim, std::size_t feature_dim, std::uint64_t seed);

  /// x [N,3], psi [N,De], feature [N,F] -> offset [N,3].
  Tensor operator()(const Tensor& x, const Tensor& psi, const Tensor& feature) const;

  std::vector<NamedParam> params(const std::string& prefix) const;
  std::size_t input_dim() const { return hidden_.front().in_dim(); }

 private:
  PositionalEncoding encoding_;
  std::vector<Linear> hidden_;
  Linear out_;
};

struct RadianceOutput {
  Tensor sigma;  // [N,1], >= 0
  Tensor rgb;    // [N,3], in (0,1)
};

/// Canonical radiance field: density from position only, color from the
/// trunk feature, view direction and appearance code.
class RadianceField {
 public:
  RadianceField() = default;
  RadianceField(const FieldConfig& config, std::uint64_t seed);

  /// x [N,3] canonical points, dirs [N,3] unit, appearance [N,A].
  RadianceOutput operator()(const Tensor& x, const Tensor& dirs, const Tensor& appearance) const;
  Tensor density(const Tensor& x) const;

  std::vector<NamedParam> params(const std::string& prefix) const;
  const Linear& density_head() const { return density_; }
  Linear& density_head() { return density_; }

 private:
  Tensor trunk(const Tensor& x) const;

  int skip_layer_ = 4;
  PositionalEncoding pos_encoding_;
  PositionalEncoding dir_encoding_;
  std::vector<Linear> trunk_;
  Linear density_;
  Linear color_hidden_;
  Linear color_out_;
};

/// kTest uses the mean of trained codes; kTestZero uses the zero code.
enum class CodeMode { kTrain, kTest, kTestZero };

/// Per-frame appearance codes. Unseen frames use the mean of the trained codes.
class AppearanceCodes {
 public:
  AppearanceCodes() = default;
  AppearanceCodes(std::size_t num_frames, std::size_t dim, std::uint64_t seed, double init_scale = 0.01);
  explicit AppearanceCodes(Tensor table) : table_(std::move(table)) {}

  /// [dim] code. Train mode requires index < size(); test modes ignore the index.
  Tensor code(std::size_t frame_index, CodeMode mode) const;
  /// The code repeated over `rows` rows, differentiable into the table in train mode.
  Tensor rows(std::size_t frame_index, CodeMode mode, std::size_t rows) const;

  std::size_t size() const { return table_.dim(0); }
  std::size_t dim() const { return table_.dim(1); }
  const Tensor& table() const { return table_; }
  Tensor& table() { return table_; }

 private:
  Tensor table_;  // [frames, dim], requires_grad
};

/// [N, k] constant tensor with `row` repeated.
Tensor repeat_row(std::span<const double> row, std::size_t rows);

}  // namespace headrf
