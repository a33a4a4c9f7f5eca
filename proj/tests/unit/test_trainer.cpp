// Copyright 2026 The headrf Authors.
// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <fstream>
#include <random>
#include <string>

#include "doctest.h"
#include "gradcheck.hpp"
#include "headrf/objectives.hpp"
#include "headrf/trainer.hpp"
#include "scene_fixture.hpp"

using namespace headrf;
using headrf::testing::tiny_dataset;
using headrf::testing::tiny_train;

namespace {

const SceneManifest& shared_scene() {
  static const SceneManifest m = tiny_dataset("trainer");
  return m;
}

bool same_arrays(const std::vector<NamedArray>& a, const std::vector<NamedArray>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].name != b[i].name || a[i].shape != b[i].shape || a[i].values != b[i].values) return false;
  }
  return true;
}

int count_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  int n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

void randomize(Tensor t, std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  for (double& v : t.mutable_data()) v = n(rng);
}

}  // namespace

TEST_CASE("zero iterations leave the initialization in the checkpoint") {
  const auto& m = shared_scene();
  const auto out = headrf::testing::scratch_dir("trainer_zero");
  TrainConfig cfg = tiny_train(0);
  Trainer t(m, cfg);
  CHECK(t.run(out).empty());
  const auto saved = read_checkpoint(out / "checkpoint.bin");
  const HeadAvatar fresh(m, cfg.model, cfg.flags, cfg.seed);
  for (const auto& a : fresh.export_params()) {
    const NamedArray* s = find_array(saved, a.name);
    REQUIRE(s != nullptr);
    CHECK(s->values == a.values);
  }
  CHECK(count_lines(out / "log.csv") == 1);
}

TEST_CASE("regularizer terms follow the weights and the no_reg flag") {
  const auto& m = shared_scene();
  TrainConfig cfg = tiny_train(1);
  Trainer with(m, cfg);
  const StepRecord r = with.step();
  REQUIRE(r.hard.has_value());
  REQUIRE(r.edge.has_value());
  CHECK(r.total == doctest::Approx(r.photometric + 0.01 * *r.hard + 0.01 * *r.edge).epsilon(1e-12));

  cfg.flags.no_reg_losses = true;
  Trainer without(m, cfg);
  const StepRecord q = without.step();
  CHECK_FALSE(q.hard.has_value());
  CHECK_FALSE(q.edge.has_value());
  CHECK(q.total == q.photometric);
  // Same draws and initialization, so the photometric term agrees.
  CHECK(q.photometric == r.photometric);
  CHECK(without.draw_digest() == with.draw_digest());
}

TEST_CASE("every parameter group receives gradient") {
  const auto& m = shared_scene();
  Trainer t(m, tiny_train(50));
  std::vector<double> seen(HeadAvatar::param_groups().size(), 0.0);
  t.run({}, [&](const StepRecord&) {
    for (std::size_t g = 0; g < seen.size(); ++g) seen[g] = std::max(seen[g], t.group_grad_norms()[g]);
  });
  for (std::size_t g = 0; g < seen.size(); ++g) {
    INFO(HeadAvatar::param_groups()[g]);
    CHECK(seen[g] > 0.0);
    CHECK(std::isfinite(seen[g]));
  }
}

TEST_CASE("seeded runs are bitwise repeatable and resume exactly") {
  const auto& m = shared_scene();
  const TrainConfig cfg = tiny_train(6);
  Trainer a(m, cfg);
  a.run();
  Trainer b(m, cfg);
  b.run();
  CHECK(same_arrays(a.checkpoint(), b.checkpoint()));

  const auto dir = headrf::testing::scratch_dir("trainer_resume");
  TrainConfig half = cfg;
  half.iterations = 3;
  Trainer first(m, half);
  first.run(dir);
  Trainer second(m, cfg);
  second.resume(dir / "checkpoint.bin");
  CHECK(second.completed_steps() == 3);
  second.run(dir);
  CHECK(same_arrays(a.checkpoint(), second.checkpoint()));
  CHECK(count_lines(dir / "log.csv") == 7);

  TrainConfig other = cfg;
  other.seed = 8;
  Trainer c(m, other);
  c.run();
  CHECK(c.draw_digest() != a.draw_digest());
}

TEST_CASE("deformation path is exact identity at initialization") {
  const auto& m = shared_scene();
  const HeadAvatar model(m, tiny_train(0).model, {}, 3);
  for (const Frame& f : m.frames) {
    const Image on = model.render_frame(f, 64, 1, true);
    const Image off = model.render_frame(f, 64, 1, false);
    CHECK(on.rgb == off.rgb);
    CHECK(on.alpha == off.alpha);
  }
}

TEST_CASE("an explicit view of a frame's pose and expression matches the frame render") {
  const auto& m = shared_scene();
  Trainer t(m, tiny_train(5));
  t.run();
  const HeadAvatar& model = t.model();
  for (const Frame& f : m.frames) {
    const bool train = f.split == Split::kTrain;
    const Image a = model.render_frame(f, 64, 1);
    const Image b = model.render_view(f.camera, f.head_pose, f.psi, model.appearance(f, train), 64, 2);
    CHECK(a.rgb == b.rgb);
  }
}

TEST_CASE("zero density head renders the background") {
  const auto& m = shared_scene();
  HeadAvatar model(m, tiny_train(0).model, {}, 3);
  for (RadianceField* f : {&model.canonical_coarse(), &model.canonical_fine()}) {
    for (double& v : f->density_head().weight.mutable_data()) v = 0.0;
    for (double& v : f->density_head().bias.mutable_data()) v = 0.0;
  }
  const Image img = model.render_frame(m.frames.front());
  for (double v : img.alpha) CHECK(v == 0.0);
  for (std::size_t i = 0; i < img.rgb.size(); ++i) CHECK(img.rgb[i] == model.background()[i % 3]);
}

TEST_CASE("pixel loss gradient reaches every parameter") {
  const auto& m = shared_scene();
  ModelConfig mc = tiny_train(0).model;
  mc.coarse_samples = 2;
  mc.fine_samples = 0;
  HeadAvatar model(m, mc, {}, 5);
  // Move off the zero-initialized warp so every layer carries signal.
  std::uint64_t seed = 100;
  for (auto& p : model.params()) {
    if (p.name.starts_with("deform/")) randomize(p.tensor, ++seed, 0.05);
  }
  const Frame& f = m.frames.front();
  const int w = f.camera.width, h = f.camera.height;
  const std::vector<int> pixels{(h / 2) * w + w / 2, (h / 2) * w + w / 2 + 1};
  const RayBatch rays = generate_rays(f.camera, f.head_pose, pixels, model.bound_radius());
  const Tensor target = Tensor::full({2, 3}, 0.3);
  auto loss = [&] {
    const VoxelGrid grid = model.volume(f.psi);
    const RenderPass pass = model.render_rays(rays, grid, f.psi, model.appearance(f, true), false, nullptr, nullptr);
    return photometric(pass.coarse.color, pass.fine.color, target);
  };
  std::vector<Tensor> leaves;
  for (auto& p : model.params()) leaves.push_back(p.tensor);
  const auto r = headrf::testing::grad_check(loss, leaves, 1e-6, 8, 1e-4);
  CHECK(r.checked > 50);
  CHECK(r.max_rel_error < 1e-3);
}

TEST_CASE("non-finite loss names the step and the term") {
  const auto& m = shared_scene();
  Trainer t(m, tiny_train(2));
  for (auto& p : t.model().params()) {
    if (p.name == "appearance/omega") for (double& v : p.tensor.mutable_data()) v = std::nan("");
  }
  try {
    t.step();
    FAIL("expected NonFiniteError");
  } catch (const NonFiniteError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("step 1") != std::string::npos);
    CHECK(msg.find("photometric") != std::string::npos);
  }
  Trainer u(m, tiny_train(2));
  for (double& v : u.model().canonical_fine().density_head().bias.mutable_data()) v = std::nan("");
  CHECK_THROWS_WITH_AS(u.step(), doctest::Contains("step 1"), NonFiniteError);
}

TEST_CASE("evaluation tables and checkpoints for the wrong model") {
  const auto& m = shared_scene();
  const auto dir = headrf::testing::scratch_dir("trainer_eval");
  const TrainConfig cfg = tiny_train(2);
  Trainer t(m, cfg);
  t.run(dir);
  const EvalTable unseen = evaluate(t.model(), m, Split::kTestUnseen);
  CHECK(unseen.rows.size() == 2);
  CHECK(std::isfinite(unseen.mean_psnr));
  CHECK(unseen.mean_ssim <= 1.0);
  write_eval_csv(dir / "eval.csv", unseen);
  CHECK(count_lines(dir / "eval.csv") == 4);

  const HeadAvatar loaded = load_model(m, cfg, dir / "checkpoint.bin");
  CHECK(same_arrays(loaded.export_params(), t.model().export_params()));
  TrainConfig wider = cfg;
  wider.model.fields.trunk_width = 24;
  CHECK_THROWS_AS(load_model(m, wider, dir / "checkpoint.bin"), CheckpointError);

  SceneManifest empty = m;
  empty.frames.erase(std::remove_if(empty.frames.begin(), empty.frames.end(),
                                    [](const Frame& f) { return f.split == Split::kTestSeen; }),
                     empty.frames.end());
  CHECK(std::isnan(evaluate(t.model(), empty, Split::kTestSeen).mean_psnr));
}

TEST_CASE("config validation") {
  TrainConfig c = tiny_train(1);
  c.lr = 0.0;
  CHECK_THROWS_AS(c.validate(), ContractViolation);
  c = tiny_train(1);
  c.weights.lambda1 = -1.0;
  CHECK_THROWS_AS(c.validate(), ContractViolation);
  c = tiny_train(-1);
  CHECK_THROWS_AS(c.validate(), ContractViolation);
  CHECK(config_json(tiny_train(3)).find("\"iterations\": 3") != std::string::npos);
  TrainConfig odd = tiny_train(11);
  odd.flags.no_expression = true;
  odd.hard_mode = HardSurfaceMode::kPerSample;
  odd.model.test_code = CodeMode::kTestZero;
  odd.seed = 1234567890123ull;
  CHECK(config_json(config_from_json(config_json(odd))) == config_json(odd));
  CHECK_THROWS_AS(config_from_json("{not json"), std::runtime_error);
}
