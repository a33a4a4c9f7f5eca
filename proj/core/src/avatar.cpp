// Copyright 2026 The headrf Authors.
// SPDX-License-Identifier: Apache-2.0
#include "headrf/avatar.hpp"

#include <algorithm>

#include "headrf/parallel.hpp"

namespace headrf {
namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(purpose), 0x61766174u};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

// [rows, A] copies of a [A] code, differentiable into the code.
Tensor broadcast_rows(const Tensor& code, std::size_t rows) {
  SparseRows ones;
  ones.cols = 1;
  for (std::size_t r = 0; r < rows; ++r) {
    ones.push(0, 1.0);
    ones.end_row();
  }
  return spmm(ones, reshape(code, {1, code.numel()}));
}

RowMatrix weights_matrix(const Tensor& w) {
  RowMatrix m(static_cast<Eigen::Index>(w.dim(0)), static_cast<Eigen::Index>(w.dim(1)));
  std::copy(w.data().begin(), w.data().end(), m.data());
  return m;
}

}  // namespace

ChannelMask AblationFlags::channel_mask() const {
  ChannelMask m;
  m.semantic = !no_semantic;
  m.expression = !no_expression;
  m.displacement = !no_displacement;
  return m;
}

HeadAvatar::HeadAvatar(const SceneManifest& manifest, const ModelConfig& config, const AblationFlags& flags,
                       std::uint64_t seed)
    : config_(config), flags_(flags), head_(manifest.head), beta_(manifest.beta) {
  if (config.coarse_samples < 2 || config.fine_samples < 0) throw ContractViolation("invalid sample counts");
  std::mt19937_64 zrng(mix_seed(seed, 6));
  std::normal_distribution<double> gauss(0.0, kLatentInitScale);
  std::vector<double> z(static_cast<std::size_t>(head_.num_vertices()) * static_cast<std::size_t>(head_.latent_dim()));
  for (double& v : z) v = gauss(zrng);
  head_.latent_codes = Tensor::from(manifest.head.latent_codes.shape(), std::move(z), true);

  layout_ = make_anchor_layout(manifest.canonical_vertices(), config.voxel_size);
  phi_ = SparseConvNet::init(anchored_channels(head_), mix_seed(seed, 1), config.conv_hidden, config.conv_out);
  deform_ = DeformField(config.fields, static_cast<std::size_t>(head_.expression_dim()),
                        static_cast<std::size_t>(config.conv_out), mix_seed(seed, 2));
  coarse_ = RadianceField(config.fields, mix_seed(seed, 3));
  fine_ = RadianceField(config.fields, mix_seed(seed, 4));

  train_slot_.assign(manifest.frames.size(), -1);
  int slots = 0;
  for (const Frame& f : manifest.frames) {
    if (f.split == Split::kTrain) train_slot_[static_cast<std::size_t>(f.index)] = slots++;
  }
  codes_ = AppearanceCodes(static_cast<std::size_t>(slots), static_cast<std::size_t>(config.fields.appearance_dim),
                           mix_seed(seed, 5));
  bound_radius_ = manifest.bound_radius;
  background_ = manifest.generator.scene.background;
}

int HeadAvatar::train_slot(int index) const {
  if (index < 0 || static_cast<std::size_t>(index) >= train_slot_.size()) return -1;
  return train_slot_[static_cast<std::size_t>(index)];
}

VoxelGrid HeadAvatar::volume(const ExpressionParams& psi) const {
  return diffuse(anchor(layout_, head_, beta_, psi, flags_.channel_mask()), phi_);
}

Tensor HeadAvatar::appearance(const Frame& frame, bool train) const {
  const int slot = train_slot(frame.index);
  if (train && slot >= 0) return codes_.code(static_cast<std::size_t>(slot), CodeMode::kTrain);
  return codes_.code(0, config_.test_code);
}

Tensor HeadAvatar::sample_field(const RadianceField& field, const Tensor& points, const Tensor& dirs,
                                const VoxelGrid& volume, const ExpressionParams& psi, const Tensor& code,
                                bool deform, Tensor* rgb_out) const {
  const std::size_t m = points.dim(0);
  Tensor x = points;
  if (deform) {
    const Tensor feature = query(volume, points);
    const Tensor psi_rows = repeat_row(std::span<const double>(psi.values.data(), static_cast<std::size_t>(psi.size())), m);
    x = add(points, deform_(points, psi_rows, feature));
  }
  RadianceOutput out = field(x, dirs, broadcast_rows(code, m));
  *rgb_out = out.rgb;
  return out.sigma;
}

RenderPass HeadAvatar::render_rays(const RayBatch& rays, const VoxelGrid& volume, const ExpressionParams& psi,
                                   const Tensor& code, bool stratified, std::mt19937_64* coarse_rng,
                                   std::mt19937_64* fine_rng, bool deform) const {
  RenderPass pass;
  const RowMatrix coarse_depths = sample_coarse(rays, config_.coarse_samples, stratified, coarse_rng);
  {
    const Tensor pts = sample_positions(rays, coarse_depths);
    const Tensor dirs = sample_directions(rays, static_cast<std::size_t>(config_.coarse_samples));
    Tensor rgb;
    const Tensor sigma = sample_field(coarse_, pts, dirs, volume, psi, code, deform, &rgb);
    pass.coarse = composite(sigma, rgb, sample_deltas(coarse_depths), background_);
  }
  const RowMatrix fine_depths = sample_fine(rays, coarse_depths, weights_matrix(pass.coarse.weights),
                                            config_.fine_samples, stratified, fine_rng);
  const Tensor pts = sample_positions(rays, fine_depths);
  const Tensor dirs = sample_directions(rays, static_cast<std::size_t>(fine_depths.cols()));
  Tensor rgb;
  const Tensor sigma = sample_field(fine_, pts, dirs, volume, psi, code, deform, &rgb);
  pass.fine = composite(sigma, rgb, sample_deltas(fine_depths), background_);
  return pass;
}

Image HeadAvatar::render_view(const Camera& camera, const RigidPose& pose, const ExpressionParams& psi,
                              const Tensor& code, int rays_per_batch, int threads, bool deform) const {
  if (psi.size() != head_.expression_dim()) throw ContractViolation("psi has the wrong length");
  const RayBatch rays = generate_rays(camera, pose, all_pixels(camera), bound_radius_);
  const VoxelGrid grid = volume(psi);
  const Tensor fixed_code = code.detach();
  Image image(camera.width, camera.height);
  const std::size_t per = static_cast<std::size_t>(std::max(1, rays_per_batch));
  const std::size_t batches = (rays.size() + per - 1) / per;
  parallel_for(batches, threads, [&](std::size_t b) {
    const std::size_t begin = b * per, end = std::min(rays.size(), begin + per);
    const RayBatch part = slice_rays(rays, begin, end);
    const RenderPass pass = render_rays(part, grid, psi, fixed_code, false, nullptr, nullptr, deform);
    for (std::size_t r = 0; r < part.size(); ++r) {
      const auto p = static_cast<std::size_t>(part.pixels[r]);
      for (int ch = 0; ch < 3; ++ch) image.rgb[p * 3 + ch] = pass.fine.color[r * 3 + ch];
      image.alpha[p] = pass.fine.alpha[r];
    }
  });
  return image;
}

Image HeadAvatar::render_frame(const Frame& frame, int rays_per_batch, int threads, bool deform) const {
  return render_view(frame.camera, frame.head_pose, frame.psi, appearance(frame, true), rays_per_batch, threads,
                     deform);
}

const std::vector<std::string>& HeadAvatar::param_groups() {
  static const std::vector<std::string> groups{"canon_coarse", "canon_fine", "deform", "phi", "latent", "appearance"};
  return groups;
}

std::vector<NamedParam> HeadAvatar::params() const {
  std::vector<NamedParam> out = coarse_.params("canon_coarse");
  for (auto& p : fine_.params("canon_fine")) out.push_back(std::move(p));
  for (auto& p : deform_.params("deform")) out.push_back(std::move(p));
  out.push_back({"phi/w1", phi_.w1});
  out.push_back({"phi/w2", phi_.w2});
  out.push_back({"phi/b2", phi_.b2});
  out.push_back({"latent/z", head_.latent_codes});
  out.push_back({"appearance/omega", codes_.table()});
  return out;
}

std::vector<NamedArray> HeadAvatar::export_params() const {
  std::vector<NamedArray> out;
  for (const auto& p : params()) out.push_back(to_named_array(p.name, p.tensor));
  return out;
}

void HeadAvatar::import_params(const std::vector<NamedArray>& arrays) {
  auto ps = params();
  for (const auto& p : ps) {
    const NamedArray* a = find_array(arrays, p.name);
    if (a == nullptr) throw CheckpointError("checkpoint lacks parameter " + p.name);
    if (a->shape != p.tensor.shape()) {
      throw CheckpointError("parameter " + p.name + " has shape " + shape_str(a->shape) + ", model expects " +
                            shape_str(p.tensor.shape()));
    }
  }
  for (auto& p : ps) {
    const NamedArray* a = find_array(arrays, p.name);
    auto dst = p.tensor.mutable_data();
    std::copy(a->values.begin(), a->values.end(), dst.begin());
  }
}

}  // namespace headrf
