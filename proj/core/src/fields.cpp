// Copyright 2026 The headrf Authors.
// SPDX-License-Identifier: Apache-2.0
#include "headrf/fields.hpp"

#include <cmath>
#include <numbers>

namespace headrf {

Tensor PositionalEncoding::operator()(const Tensor& x) const {
  if (x.rank() != 2) throw ContractViolation("positional encoding expects [N, k] input");
  if (num_freqs < 0) throw ContractViolation("num_freqs must be non-negative");
  const std::size_t n = x.dim(0), k = x.dim(1);
  const std::size_t per = (include_input ? 1 : 0) + 2 * static_cast<std::size_t>(num_freqs);
  const std::size_t width = k * per;
  const bool inc = include_input;
  const int freqs = num_freqs;
  std::vector<double> out(n * width);
  const auto& xv = x.values();
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < k; ++c) {
      const double v = xv[r * k + c];
      double* dst = out.data() + r * width + c * per;
      if (inc) *dst++ = v;
      double f = std::numbers::pi;
      for (int l = 0; l < freqs; ++l, f *= 2.0) {
        *dst++ = std::sin(f * v);
        *dst++ = std::cos(f * v);
      }
    }
  }
  return record_op("positional_encoding", {x}, {n, width}, std::move(out),
                   [n, k, per, width, inc, freqs](detail::Node& o, std::span<detail::Node* const> in) {
                     detail::Node& nx = *in[0];
                     nx.ensure_grad();
                     for (std::size_t r = 0; r < n; ++r) {
                       for (std::size_t c = 0; c < k; ++c) {
                         const double* g = o.grad.data() + r * width + c * per;
                         const double* y = o.data.data() + r * width + c * per;
                         double acc = 0.0;
                         if (inc) {
                           acc += *g++;
                           ++y;
                         }
                         double f = std::numbers::pi;
                         for (int l = 0; l < freqs; ++l, f *= 2.0) {
                           // d sin(fx) = f cos(fx), d cos(fx) = -f sin(fx)
                           acc += g[0] * f * y[1] - g[1] * f * y[0];
                           g += 2;
                           y += 2;
                         }
                         nx.grad[r * k + c] += acc;
                       }
                     }
                   });
}

Linear Linear::init(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> u(-bound, bound);
  std::vector<double> w(in * out), b(out);
  for (double& x : w) x = u(rng);
  for (double& x : b) x = u(rng);
  return {Tensor::from({in, out}, std::move(w), true), Tensor::from({out}, std::move(b), true)};
}

Linear Linear::zeros(std::size_t in, std::size_t out) {
  return {Tensor::zeros({in, out}, true), Tensor::zeros({out}, true)};
}

namespace {
void append_linear(std::vector<NamedParam>& out, const std::string& name, const Linear& l) {
  out.push_back({name + "/w", l.weight});
  out.push_back({name + "/b", l.bias});
}
}  // namespace

DeformField::DeformField(const FieldConfig& config, std::size_t expression_dim, std::size_t feature_dim,
                         std::uint64_t seed)
    : encoding_{config.deform_freqs, true} {
  if (config.deform_depth < 1 || config.deform_width < 1) throw ContractViolation("deform field needs a hidden layer");
  std::mt19937_64 rng(seed);
  std::size_t in = encoding_.output_dim(3) + expression_dim + feature_dim;
  const auto width = static_cast<std::size_t>(config.deform_width);
  for (int i = 0; i < config.deform_depth; ++i) {
    hidden_.push_back(Linear::init(in, width, rng));
    in = width;
  }
  out_ = Linear::zeros(width, 3);
}

Tensor DeformField::operator()(const Tensor& x, const Tensor& psi, const Tensor& feature) const {
  Tensor h = concat({encoding_(x), psi, feature}, 1);
  if (h.dim(1) != input_dim()) {
    throw ContractViolation("deform field input width " + std::to_string(h.dim(1)) + ", expected " +
                            std::to_string(input_dim()));
  }
  for (const auto& layer : hidden_) h = relu(layer(h));
  return out_(h);
}

std::vector<NamedParam> DeformField::params(const std::string& prefix) const {
  std::vector<NamedParam> out;
  for (std::size_t i = 0; i < hidden_.size(); ++i) append_linear(out, prefix + "/l" + std::to_string(i), hidden_[i]);
  append_linear(out, prefix + "/out", out_);
  return out;
}

RadianceField::RadianceField(const FieldConfig& config, std::uint64_t seed)
    : skip_layer_(config.skip_layer), pos_encoding_{config.pos_freqs, true}, dir_encoding_{config.dir_freqs, true} {
  if (config.trunk_depth < 1) throw ContractViolation("radiance trunk needs a hidden layer");
  std::mt19937_64 rng(seed);
  const std::size_t enc = pos_encoding_.output_dim(3);
  const auto width = static_cast<std::size_t>(config.trunk_width);
  std::size_t in = enc;
  for (int i = 0; i < config.trunk_depth; ++i) {
    if (i == skip_layer_ && i > 0) in += enc;
    trunk_.push_back(Linear::init(in, width, rng));
    in = width;
  }
  density_ = Linear::init(width, 1, rng);
  density_.bias.mutable_data()[0] = config.density_bias;
  const auto cw = static_cast<std::size_t>(config.color_width);
  color_hidden_ = Linear::init(width + dir_encoding_.output_dim(3) + static_cast<std::size_t>(config.appearance_dim),
                               cw, rng);
  color_out_ = Linear::init(cw, 3, rng);
}

Tensor RadianceField::trunk(const Tensor& x) const {
  const Tensor e = pos_encoding_(x);
  Tensor h = e;
  for (std::size_t i = 0; i < trunk_.size(); ++i) {
    if (static_cast<int>(i) == skip_layer_ && i > 0) h = concat({h, e}, 1);
    h = relu(trunk_[i](h));
  }
  return h;
}

Tensor RadianceField::density(const Tensor& x) const { return relu(density_(trunk(x))); }

RadianceOutput RadianceField::operator()(const Tensor& x, const Tensor& dirs, const Tensor& appearance) const {
  const Tensor h = trunk(x);
  RadianceOutput out;
  out.sigma = relu(density_(h));
  const Tensor c = relu(color_hidden_(concat({h, dir_encoding_(dirs), appearance}, 1)));
  out.rgb = sigmoid(color_out_(c));
  return out;
}

std::vector<NamedParam> RadianceField::params(const std::string& prefix) const {
  std::vector<NamedParam> out;
  for (std::size_t i = 0; i < trunk_.size(); ++i) append_linear(out, prefix + "/trunk" + std::to_string(i), trunk_[i]);
  append_linear(out, prefix + "/density", density_);
  append_linear(out, prefix + "/color_hidden", color_hidden_);
  append_linear(out, prefix + "/color_out", color_out_);
  return out;
}

AppearanceCodes::AppearanceCodes(std::size_t num_frames, std::size_t dim, std::uint64_t seed, double init_scale) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, init_scale);
  std::vector<double> v(num_frames * dim);
  for (double& x : v) x = n(rng);
  table_ = Tensor::from({num_frames, dim}, std::move(v), true);
}

Tensor AppearanceCodes::code(std::size_t frame_index, CodeMode mode) const {
  if (mode == CodeMode::kTestZero) return Tensor::zeros({dim()});
  if (mode == CodeMode::kTest) {
    if (size() == 0) return Tensor::zeros({dim()});
    return mean(table_.detach(), 0);
  }
  if (frame_index >= size()) {
    throw ContractViolation("appearance code index " + std::to_string(frame_index) + " out of range for " +
                            std::to_string(size()) + " training frames");
  }
  return reshape(slice(table_, 0, frame_index, frame_index + 1), {dim()});
}

Tensor AppearanceCodes::rows(std::size_t frame_index, CodeMode mode, std::size_t rows) const {
  if (mode != CodeMode::kTrain) {
    const Tensor c = code(frame_index, mode);
    return repeat_row(c.data(), rows);
  }
  if (frame_index >= size()) {
    throw ContractViolation("appearance code index " + std::to_string(frame_index) + " out of range");
  }
  SparseRows pick;
  pick.cols = size();
  for (std::size_t r = 0; r < rows; ++r) {
    pick.push(frame_index, 1.0);
    pick.end_row();
  }
  return spmm(pick, table_);
}

Tensor repeat_row(std::span<const double> row, std::size_t rows) {
  std::vector<double> v;
  v.reserve(row.size() * rows);
  for (std::size_t r = 0; r < rows; ++r) v.insert(v.end(), row.begin(), row.end());
  return Tensor::from({rows, row.size()}, std::move(v));
}

}  // namespace headrf
