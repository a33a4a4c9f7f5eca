// Copyright 2026 The headrf Authors.
// SPDX-License-Identifier: Apache-2.0
#include "headrf/trainer.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <memory>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "headrf/metrics.hpp"

namespace headrf {
namespace {

constexpr std::uint64_t kDrawPurpose = 1;
constexpr std::uint64_t kCoarsePurpose = 10;
constexpr std::uint64_t kFinePurpose = 11;
constexpr std::uint64_t kEdgePurpose = 12;

std::uint64_t fnv1a(std::uint64_t h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xffu;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string fmt_optional(const std::optional<double>& v) { return v ? fmt::format("{:.17g}", *v) : std::string{}; }

std::string fmt_metric(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  return fmt::format("{:.6f}", v);
}

const char* kLogHeader = "step,frame,L_p,L_hard,L_edge,total";

std::string log_line(const StepRecord& r) {
  return fmt::format("{},{},{:.17g},{},{},{:.17g}", r.step, r.frame, r.photometric, fmt_optional(r.hard),
                     fmt_optional(r.edge), r.total);
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ContractViolation("lr must be positive");
  if (iterations < 0) throw ContractViolation("iterations must be non-negative");
  if (rays_per_batch < 1) throw ContractViolation("rays_per_batch must be at least 1");
  if (checkpoint_interval < 0) throw ContractViolation("checkpoint_interval must be non-negative");
  if (edge_rays < 1 || edge_samples < 2) throw ContractViolation("edge probes need >= 1 ray and >= 2 samples");
  weights.validate();
}

LossWeights TrainConfig::effective_weights() const {
  return flags.no_reg_losses ? LossWeights{0.0, 0.0} : weights;
}

std::mt19937_64 step_stream(std::uint64_t seed, std::uint64_t purpose, std::uint64_t step) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(purpose), static_cast<std::uint32_t>(step),
                    static_cast<std::uint32_t>(step >> 32), 0x74726e72u};
  return std::mt19937_64(seq);
}

StepDraw draw_step(std::uint64_t seed, int step, const std::vector<int>& train_frames, int pixels_per_frame,
                   int rays) {
  if (train_frames.empty()) throw ContractViolation("no training frames");
  auto rng = step_stream(seed, kDrawPurpose, static_cast<std::uint64_t>(step));
  std::uniform_int_distribution<std::size_t> pick_frame(0, train_frames.size() - 1);
  std::uniform_int_distribution<int> pick_pixel(0, pixels_per_frame - 1);
  StepDraw d;
  d.frame = train_frames[pick_frame(rng)];
  d.pixels.resize(static_cast<std::size_t>(rays));
  for (int& p : d.pixels) p = pick_pixel(rng);
  return d;
}

struct TrainerState {
  SceneManifest manifest;
  TrainConfig config;
  HeadAvatar model;
  Adam adam;
  int step = 0;
  std::vector<int> train_frames;
  std::vector<Image> targets;  // by frame index; empty for non-training frames
  std::vector<double> group_norms;
  std::uint64_t digest = 0xcbf29ce484222325ull;

  TrainerState(const SceneManifest& m, const TrainConfig& c)
      : manifest(m), config(c), model(m, c.model, c.flags, c.seed), adam(model.params(), AdamOptions{c.lr}) {}
};

Trainer::Trainer(const SceneManifest& manifest, const TrainConfig& config) {
  config.validate();
  state_ = std::make_unique<TrainerState>(manifest, config);
  auto& s = *state_;
  s.targets.resize(manifest.frames.size());
  for (const Frame& f : manifest.frames) {
    if (f.split != Split::kTrain) continue;
    s.train_frames.push_back(f.index);
    s.targets[static_cast<std::size_t>(f.index)] = load_frame_image(manifest, f, false);
    const Image& t = s.targets[static_cast<std::size_t>(f.index)];
    if (t.width != f.camera.width || t.height != f.camera.height) {
      throw ContractViolation(fmt::format("frame {} image is {}x{}, camera expects {}x{}", f.index, t.width, t.height,
                                          f.camera.width, f.camera.height));
    }
  }
  if (s.train_frames.empty()) throw ContractViolation("manifest has no training frames");
  s.group_norms.assign(HeadAvatar::param_groups().size(), 0.0);
}

Trainer::~Trainer() = default;

int Trainer::completed_steps() const { return state_->step; }
HeadAvatar& Trainer::model() { return state_->model; }
const HeadAvatar& Trainer::model() const { return state_->model; }
const TrainConfig& Trainer::config() const { return state_->config; }
const std::vector<double>& Trainer::group_grad_norms() const { return state_->group_norms; }
std::uint64_t Trainer::draw_digest() const { return state_->digest; }

StepRecord Trainer::step() {
  auto& s = *state_;
  const int step_index = s.step + 1;
  const Frame& first = s.manifest.frames[static_cast<std::size_t>(s.train_frames.front())];
  const StepDraw draw = draw_step(s.config.seed, step_index, s.train_frames,
                                  first.camera.width * first.camera.height, s.config.rays_per_batch);
  s.digest = fnv1a(s.digest, static_cast<std::uint64_t>(draw.frame));
  for (int p : draw.pixels) s.digest = fnv1a(s.digest, static_cast<std::uint64_t>(p));

  const Frame& frame = s.manifest.frames[static_cast<std::size_t>(draw.frame)];
  const Image& image = s.targets[static_cast<std::size_t>(draw.frame)];
  const RayBatch rays = generate_rays(frame.camera, frame.head_pose, draw.pixels, s.model.bound_radius());
  std::vector<double> target(draw.pixels.size() * 3);
  for (std::size_t r = 0; r < draw.pixels.size(); ++r) {
    for (int ch = 0; ch < 3; ++ch) target[r * 3 + ch] = image.rgb[static_cast<std::size_t>(draw.pixels[r]) * 3 + ch];
  }

  const LossWeights weights = s.config.effective_weights();
  StepRecord rec;
  rec.step = step_index;
  rec.frame = draw.frame;
  s.adam.zero_grad();
  {
    Tape tape;
    TapeScope scope(tape);
    const VoxelGrid grid = s.model.volume(frame.psi);
    const Tensor code = s.model.appearance(frame, true);
    auto coarse_rng = step_stream(s.config.seed, kCoarsePurpose, static_cast<std::uint64_t>(step_index));
    auto fine_rng = step_stream(s.config.seed, kFinePurpose, static_cast<std::uint64_t>(step_index));
    RenderPass pass;
    try {
      pass = s.model.render_rays(rays, grid, frame.psi, code, true, &coarse_rng, &fine_rng);
    } catch (const NonFiniteError& e) {
      throw NonFiniteError(fmt::format("step {}: render: {}", step_index, e.what()));
    }
    LossTerms terms{photometric(pass.coarse.color, pass.fine.color,
                                Tensor::from({draw.pixels.size(), 3}, std::move(target))),
                    std::nullopt, std::nullopt};
    if (weights.lambda1 != 0.0) {
      terms.hard = s.config.hard_mode == HardSurfaceMode::kPerRay ? hard_surface(pass.fine.alpha)
                                                                  : hard_surface_per_sample(pass.fine.weights);
    }
    if (weights.lambda2 != 0.0) {
      auto edge_rng = step_stream(s.config.seed, kEdgePurpose, static_cast<std::uint64_t>(step_index));
      const EdgeProbeSettings probe{s.config.edge_rays, s.config.edge_samples, s.model.bound_radius()};
      const RadianceField& canon = s.model.canonical_fine();
      terms.edge = canonical_edge([&canon](const Tensor& p) { return canon.density(p); }, probe, edge_rng);
    }
    Tensor total;
    try {
      total = total_loss(terms, weights);
    } catch (const NonFiniteError& e) {
      throw NonFiniteError(fmt::format("step {}: {}", step_index, e.what()));
    }
    rec.photometric = terms.photometric.item();
    if (terms.hard) rec.hard = terms.hard->item();
    if (terms.edge) rec.edge = terms.edge->item();
    rec.total = total.item();
    tape.backward(total);
  }

  const auto& groups = HeadAvatar::param_groups();
  std::fill(s.group_norms.begin(), s.group_norms.end(), 0.0);
  for (const auto& p : s.adam.params()) {
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (p.name.starts_with(groups[g] + "/")) {
        for (double v : p.tensor.grad()) s.group_norms[g] += v * v;
      }
    }
  }
  for (double& n : s.group_norms) n = std::sqrt(n);
  try {
    s.adam.step();
  } catch (const NonFiniteError& e) {
    throw NonFiniteError(fmt::format("step {}: {}", step_index, e.what()));
  }
  s.step = step_index;
  return rec;
}

std::vector<StepRecord> Trainer::run(const std::filesystem::path& out_dir,
                                     const std::function<void(const StepRecord&)>& on_step) {
  auto& s = *state_;
  std::ofstream log;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    nlohmann::json run = nlohmann::json::parse(config_json(s.config));
    run["dataset"] = s.manifest.root.string();
    run["start_step"] = s.step;
    std::ofstream(out_dir / "run.json") << run.dump(2) << '\n';
    const auto log_path = out_dir / "log.csv";
    const bool append = s.step > 0 && std::filesystem::exists(log_path);
    log.open(log_path, append ? std::ios::app : std::ios::trunc);
    if (!log) throw std::runtime_error("cannot write " + log_path.string());
    if (!append) log << kLogHeader << '\n';
  }
  std::vector<StepRecord> records;
  while (s.step < s.config.iterations) {
    const StepRecord rec = step();
    records.push_back(rec);
    if (log.is_open()) log << log_line(rec) << '\n' << std::flush;
    if (on_step) on_step(rec);
    if (rec.step % 100 == 0) {
      spdlog::debug("step {} frame {} L_p {:.6f} total {:.6f}", rec.step, rec.frame, rec.photometric, rec.total);
    }
    if (!out_dir.empty() && s.config.checkpoint_interval > 0 && rec.step % s.config.checkpoint_interval == 0) {
      save_checkpoint(out_dir / "checkpoint.bin");
    }
  }
  if (!out_dir.empty()) save_checkpoint(out_dir / "checkpoint.bin");
  return records;
}

std::vector<NamedArray> Trainer::checkpoint() const {
  const auto& s = *state_;
  std::vector<NamedArray> out = s.model.export_params();
  for (auto& a : s.adam.export_state()) out.push_back(std::move(a));
  out.push_back({"train/step", {1}, {static_cast<double>(s.step)}});
  out.push_back({"train/digest",
                 {2},
                 {static_cast<double>(s.digest >> 32), static_cast<double>(s.digest & 0xffffffffu)}});
  return out;
}

void Trainer::save_checkpoint(const std::filesystem::path& path) const { write_checkpoint(path, checkpoint()); }

void Trainer::restore(const std::vector<NamedArray>& arrays) {
  auto& s = *state_;
  const NamedArray* step = find_array(arrays, "train/step");
  const NamedArray* digest = find_array(arrays, "train/digest");
  if (step == nullptr || digest == nullptr || digest->values.size() != 2) {
    throw CheckpointError("checkpoint has no training state");
  }
  s.model.import_params(arrays);
  s.adam.import_state(arrays);
  s.step = static_cast<int>(step->values.at(0));
  s.digest = (static_cast<std::uint64_t>(digest->values[0]) << 32) | static_cast<std::uint64_t>(digest->values[1]);
}

void Trainer::resume(const std::filesystem::path& path) { restore(read_checkpoint(path)); }

void write_log_csv(const std::filesystem::path& path, const std::vector<StepRecord>& log) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << kLogHeader << '\n';
  for (const auto& r : log) out << log_line(r) << '\n';
}

EvalTable evaluate(const HeadAvatar& model, const SceneManifest& manifest, Split split, int threads,
                   int rays_per_batch) {
  if (model.head().num_vertices() != manifest.head.num_vertices() ||
      model.head().expression_dim() != manifest.head.expression_dim()) {
    throw ContractViolation("model was built for a different head model");
  }
  EvalTable table;
  table.split = split;
  double sum_psnr = 0.0, sum_ssim = 0.0;
  for (const Frame* f : manifest.frames_in(split)) {
    const Image rendered = model.render_frame(*f, rays_per_batch, threads);
    const Image truth = load_frame_image(manifest, *f, true);
    FrameMetrics row{f->index, psnr(rendered, truth), ssim(rendered, truth)};
    sum_psnr += row.psnr;
    sum_ssim += row.ssim;
    table.rows.push_back(row);
  }
  const double n = static_cast<double>(table.rows.size());
  table.mean_psnr = table.rows.empty() ? std::numeric_limits<double>::quiet_NaN() : sum_psnr / n;
  table.mean_ssim = table.rows.empty() ? std::numeric_limits<double>::quiet_NaN() : sum_ssim / n;
  return table;
}

void write_eval_csv(const std::filesystem::path& path, const EvalTable& table) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const std::string split(split_name(table.split));
  out << "frame,split,psnr,ssim\n";
  for (const auto& r : table.rows) out << r.frame << ',' << split << ',' << fmt_metric(r.psnr) << ',' << fmt_metric(r.ssim) << '\n';
  out << "mean," << split << ',' << fmt_metric(table.mean_psnr) << ',' << fmt_metric(table.mean_ssim) << '\n';
}

HeadAvatar load_model(const SceneManifest& manifest, const TrainConfig& config,
                      const std::filesystem::path& checkpoint) {
  HeadAvatar model(manifest, config.model, config.flags, config.seed);
  model.import_params(read_checkpoint(checkpoint));
  return model;
}

std::vector<AblationRow> ablation_suite(const SceneManifest& manifest, const TrainConfig& base, Split split,
                                        const std::filesystem::path& out_dir) {
  std::vector<AblationRow> rows(5);
  rows[0].name = "full";
  rows[1].name = "no_semantic";
  rows[1].flags.no_semantic = true;
  rows[2].name = "no_expression";
  rows[2].flags.no_expression = true;
  rows[3].name = "no_reg_losses";
  rows[3].flags.no_reg_losses = true;
  rows[4].name = "no_displacement";
  rows[4].flags.no_displacement = true;
  for (auto& row : rows) {
    TrainConfig cfg = base;
    cfg.flags = row.flags;
    Trainer trainer(manifest, cfg);
    const auto dir = out_dir.empty() ? std::filesystem::path{} : out_dir / row.name;
    trainer.run(dir);
    const EvalTable table = evaluate(trainer.model(), manifest, split, cfg.threads);
    if (!dir.empty()) write_eval_csv(dir / fmt::format("eval_{}.csv", split_name(split)), table);
    row.psnr = table.mean_psnr;
    row.ssim = table.mean_ssim;
    row.draw_digest = trainer.draw_digest();
    spdlog::info("ablation {}: PSNR {:.3f} SSIM {:.4f}", row.name, row.psnr, row.ssim);
  }
  return rows;
}

void write_ablation_csv(const std::filesystem::path& path, const std::vector<AblationRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "variant,psnr,ssim\n";
  for (const auto& r : rows) out << r.name << ',' << fmt_metric(r.psnr) << ',' << fmt_metric(r.ssim) << '\n';
}

std::string config_json(const TrainConfig& c) {
  const auto& f = c.model.fields;
  nlohmann::json j = {
      {"lr", c.lr},
      {"iterations", c.iterations},
      {"rays_per_batch", c.rays_per_batch},
      {"lambda1", c.weights.lambda1},
      {"lambda2", c.weights.lambda2},
      {"seed", c.seed},
      {"checkpoint_interval", c.checkpoint_interval},
      {"hard_mode", c.hard_mode == HardSurfaceMode::kPerRay ? "per_ray" : "per_sample"},
      {"edge_rays", c.edge_rays},
      {"edge_samples", c.edge_samples},
      {"threads", c.threads},
      {"flags",
       {{"no_semantic", c.flags.no_semantic},
        {"no_expression", c.flags.no_expression},
        {"no_reg_losses", c.flags.no_reg_losses},
        {"no_displacement", c.flags.no_displacement}}},
      {"model",
       {{"voxel_size", c.model.voxel_size},
        {"conv_hidden", c.model.conv_hidden},
        {"conv_out", c.model.conv_out},
        {"coarse_samples", c.model.coarse_samples},
        {"fine_samples", c.model.fine_samples},
        {"test_code", c.model.test_code == CodeMode::kTestZero ? "zero" : "mean"},
        {"deform_freqs", f.deform_freqs},
        {"deform_depth", f.deform_depth},
        {"deform_width", f.deform_width},
        {"pos_freqs", f.pos_freqs},
        {"dir_freqs", f.dir_freqs},
        {"trunk_depth", f.trunk_depth},
        {"trunk_width", f.trunk_width},
        {"skip_layer", f.skip_layer},
        {"color_width", f.color_width},
        {"appearance_dim", f.appearance_dim},
        {"density_bias", f.density_bias}}},
  };
  return j.dump(2);
}

TrainConfig config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("run config: ") + e.what());
  }
  TrainConfig c;
  auto get = [](const nlohmann::json& obj, const char* key, auto& out) {
    if (obj.contains(key)) obj.at(key).get_to(out);
  };
  try {
    get(j, "lr", c.lr);
    get(j, "iterations", c.iterations);
    get(j, "rays_per_batch", c.rays_per_batch);
    get(j, "lambda1", c.weights.lambda1);
    get(j, "lambda2", c.weights.lambda2);
    get(j, "seed", c.seed);
    get(j, "checkpoint_interval", c.checkpoint_interval);
    if (j.contains("hard_mode")) {
      c.hard_mode = j.at("hard_mode").get<std::string>() == "per_sample" ? HardSurfaceMode::kPerSample
                                                                         : HardSurfaceMode::kPerRay;
    }
    get(j, "edge_rays", c.edge_rays);
    get(j, "edge_samples", c.edge_samples);
    get(j, "threads", c.threads);
    if (j.contains("flags")) {
      const auto& f = j.at("flags");
      get(f, "no_semantic", c.flags.no_semantic);
      get(f, "no_expression", c.flags.no_expression);
      get(f, "no_reg_losses", c.flags.no_reg_losses);
      get(f, "no_displacement", c.flags.no_displacement);
    }
    if (j.contains("model")) {
      const auto& m = j.at("model");
      auto& f = c.model.fields;
      get(m, "voxel_size", c.model.voxel_size);
      get(m, "conv_hidden", c.model.conv_hidden);
      get(m, "conv_out", c.model.conv_out);
      get(m, "coarse_samples", c.model.coarse_samples);
      get(m, "fine_samples", c.model.fine_samples);
      if (m.contains("test_code")) {
        c.model.test_code = m.at("test_code").get<std::string>() == "zero" ? CodeMode::kTestZero : CodeMode::kTest;
      }
      get(m, "deform_freqs", f.deform_freqs);
      get(m, "deform_depth", f.deform_depth);
      get(m, "deform_width", f.deform_width);
      get(m, "pos_freqs", f.pos_freqs);
      get(m, "dir_freqs", f.dir_freqs);
      get(m, "trunk_depth", f.trunk_depth);
      get(m, "trunk_width", f.trunk_width);
      get(m, "skip_layer", f.skip_layer);
      get(m, "color_width", f.color_width);
      get(m, "appearance_dim", f.appearance_dim);
      get(m, "density_bias", f.density_bias);
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("run config: ") + e.what());
  }
  return c;
}

}  // namespace headrf
