// Copyright 2026 The headrf Authors.
// SPDX-License-Identifier: Apache-2.0
#include "headrf/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "headrf/checkpoint.hpp"
#include "headrf/image_io.hpp"

namespace headrf {
namespace {

using nlohmann::json;

constexpr std::array<Rgb, 6> kPalette = {{
    {0.86, 0.66, 0.55},
    {0.72, 0.40, 0.36},
    {0.50, 0.32, 0.22},
    {0.93, 0.82, 0.70},
    {0.30, 0.22, 0.18},
    {0.62, 0.52, 0.76},
}};

double deg(double d) { return d * std::numbers::pi / 180.0; }

// Independent generator per purpose so adding draws to one stream never shifts another.
std::mt19937_64 stream(std::uint64_t seed, std::uint64_t purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(purpose), 0x68656164u};
  return std::mt19937_64(seq);
}

RigidPose random_pose(const GeneratorSettings& s, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> yaw(-deg(s.yaw_degrees), deg(s.yaw_degrees));
  std::uniform_real_distribution<double> pitch(-deg(s.pitch_degrees), deg(s.pitch_degrees));
  std::uniform_real_distribution<double> t(-s.max_translation, s.max_translation);
  const double y = yaw(rng), p = pitch(rng);
  const Eigen::Vector3d tr(t(rng), t(rng), t(rng));
  return RigidPose::from_euler(y, p, 0.0, tr);
}

json matrix_json(const Eigen::Matrix3d& m) {
  json a = json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) a.push_back(m(r, c));
  return a;
}

Eigen::Matrix3d matrix_from(const json& a) {
  if (!a.is_array() || a.size() != 9) throw std::runtime_error("manifest: rotation must have 9 entries");
  Eigen::Matrix3d m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = a.at(static_cast<std::size_t>(r * 3 + c)).get<double>();
  return m;
}

json vector_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd vector_from(const json& a) {
  const auto values = a.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

json pose_json(const RigidPose& p) {
  return {{"rotation", matrix_json(p.rotation)}, {"translation", vector_json(p.translation)}};
}

RigidPose pose_from(const json& j) {
  RigidPose p;
  p.rotation = matrix_from(j.at("rotation"));
  p.translation = vector_from(j.at("translation"));
  if (p.translation.size() != 3) throw std::runtime_error("manifest: translation must have 3 entries");
  return p;
}

json camera_json(const Camera& c) {
  return {{"focal", c.focal}, {"cx", c.cx}, {"cy", c.cy}, {"width", c.width}, {"height", c.height},
          {"pose", pose_json(c.pose)}};
}

Camera camera_from(const json& j) {
  Camera c;
  c.focal = j.at("focal").get<double>();
  c.cx = j.at("cx").get<double>();
  c.cy = j.at("cy").get<double>();
  c.width = j.at("width").get<int>();
  c.height = j.at("height").get<int>();
  c.pose = pose_from(j.at("pose"));
  return c;
}

json generator_json(const GeneratorSettings& s) {
  return {{"seed", s.seed},
          {"width", s.width},
          {"height", s.height},
          {"n_train", s.n_train},
          {"n_test_seen", s.n_test_seen},
          {"n_test_unseen", s.n_test_unseen},
          {"yaw_degrees", s.yaw_degrees},
          {"pitch_degrees", s.pitch_degrees},
          {"max_translation", s.max_translation},
          {"train_psi", s.train_psi},
          {"unseen_psi_min", s.unseen_psi_min},
          {"unseen_psi_max", s.unseen_psi_max},
          {"quadrature_samples", s.quadrature_samples},
          {"camera_distance", s.camera_distance},
          {"fov_x_degrees", s.fov_x_degrees},
          {"bound_scale", s.bound_scale},
          {"identity_scale", s.identity_scale},
          {"write_raw", s.write_raw},
          {"blob_amplitude", s.scene.amplitude},
          {"blob_scale", s.scene.blob_scale},
          {"blob_truncation", s.scene.truncation},
          {"anchors", s.scene.anchors},
          {"blend_colors", s.scene.blend_colors},
          {"background", {s.scene.background[0], s.scene.background[1], s.scene.background[2]}},
          {"head",
           {{"subdivision_level", s.head.subdivision_level},
            {"identity_dim", s.head.identity_dim},
            {"expression_dim", s.head.expression_dim},
            {"semantic_classes", s.head.semantic_classes},
            {"latent_dim", s.head.latent_dim}}}};
}

GeneratorSettings generator_from(const json& j) {
  GeneratorSettings s;
  s.seed = j.at("seed").get<std::uint64_t>();
  s.width = j.at("width").get<int>();
  s.height = j.at("height").get<int>();
  s.n_train = j.at("n_train").get<int>();
  s.n_test_seen = j.at("n_test_seen").get<int>();
  s.n_test_unseen = j.at("n_test_unseen").get<int>();
  s.yaw_degrees = j.at("yaw_degrees").get<double>();
  s.pitch_degrees = j.at("pitch_degrees").get<double>();
  s.max_translation = j.at("max_translation").get<double>();
  s.train_psi = j.at("train_psi").get<double>();
  s.unseen_psi_min = j.at("unseen_psi_min").get<double>();
  s.unseen_psi_max = j.at("unseen_psi_max").get<double>();
  s.quadrature_samples = j.at("quadrature_samples").get<int>();
  s.camera_distance = j.at("camera_distance").get<double>();
  s.fov_x_degrees = j.at("fov_x_degrees").get<double>();
  s.bound_scale = j.at("bound_scale").get<double>();
  s.identity_scale = j.at("identity_scale").get<double>();
  s.write_raw = j.at("write_raw").get<bool>();
  s.scene.amplitude = j.at("blob_amplitude").get<double>();
  s.scene.blob_scale = j.at("blob_scale").get<double>();
  s.scene.truncation = j.at("blob_truncation").get<double>();
  s.scene.anchors = j.at("anchors").get<int>();
  s.scene.blend_colors = j.at("blend_colors").get<bool>();
  const auto bg = j.at("background").get<std::vector<double>>();
  if (bg.size() != 3) throw std::runtime_error("manifest: background must have 3 entries");
  s.scene.background = {bg[0], bg[1], bg[2]};
  const json& h = j.at("head");
  s.head.subdivision_level = h.at("subdivision_level").get<int>();
  s.head.identity_dim = h.at("identity_dim").get<int>();
  s.head.expression_dim = h.at("expression_dim").get<int>();
  s.head.semantic_classes = h.at("semantic_classes").get<int>();
  s.head.latent_dim = h.at("latent_dim").get<int>();
  return s;
}

std::vector<NamedArray> head_arrays(const HeadModel& head) {
  const auto nv = static_cast<std::size_t>(head.num_vertices());
  auto flatten = [](const Eigen::MatrixXd& m) {
    std::vector<double> v(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) v[static_cast<std::size_t>(r * m.cols() + c)] = m(r, c);
    return v;
  };
  std::vector<double> labels(head.semantic_labels.begin(), head.semantic_labels.end());
  std::vector<double> faces;
  for (const auto& f : head.faces) faces.insert(faces.end(), {double(f[0]), double(f[1]), double(f[2])});
  return {
      {"head/base_vertices", {nv, 3}, std::vector<double>(head.base_vertices.data(), head.base_vertices.data() + nv * 3)},
      {"head/identity_basis", {3 * nv, static_cast<std::size_t>(head.identity_dim())}, flatten(head.identity_basis)},
      {"head/expression_basis", {3 * nv, static_cast<std::size_t>(head.expression_dim())},
       flatten(head.expression_basis)},
      {"head/semantic_labels", {nv}, labels},
      {"head/semantic_classes", {1}, {static_cast<double>(head.semantic_classes)}},
      to_named_array("head/latent_codes", head.latent_codes),
      {"head/faces", {head.faces.size(), 3}, faces},
  };
}

const NamedArray& need(const std::vector<NamedArray>& arrays, const std::string& name) {
  const NamedArray* a = find_array(arrays, name);
  if (a == nullptr) throw CheckpointError("head file lacks " + name);
  return *a;
}

HeadModel head_from(const std::vector<NamedArray>& arrays) {
  HeadModel head;
  const NamedArray& base = need(arrays, "head/base_vertices");
  const auto nv = static_cast<Eigen::Index>(base.shape.at(0));
  head.base_vertices = Eigen::Map<const Points>(base.values.data(), nv, 3);
  auto unflatten = [](const NamedArray& a) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(a.shape.at(0)), static_cast<Eigen::Index>(a.shape.at(1)));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = a.values[static_cast<std::size_t>(r * m.cols() + c)];
    return m;
  };
  head.identity_basis = unflatten(need(arrays, "head/identity_basis"));
  head.expression_basis = unflatten(need(arrays, "head/expression_basis"));
  for (double l : need(arrays, "head/semantic_labels").values) head.semantic_labels.push_back(static_cast<int>(l));
  head.semantic_classes = static_cast<int>(need(arrays, "head/semantic_classes").values.at(0));
  const NamedArray& z = need(arrays, "head/latent_codes");
  head.latent_codes = Tensor::from(z.shape, z.values, true);
  const NamedArray& f = need(arrays, "head/faces");
  for (std::size_t i = 0; i + 2 < f.values.size(); i += 3) {
    head.faces.push_back({static_cast<int>(f.values[i]), static_cast<int>(f.values[i + 1]),
                          static_cast<int>(f.values[i + 2])});
  }
  head.validate();
  return head;
}

}  // namespace

std::string_view split_name(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kTestSeen:
      return "test_seen_expr";
    case Split::kTestUnseen:
      return "test_unseen_expr";
  }
  return "train";
}

Split parse_split(std::string_view name) {
  for (Split s : {Split::kTrain, Split::kTestSeen, Split::kTestUnseen}) {
    if (split_name(s) == name) return s;
  }
  throw ContractViolation("unknown split '" + std::string(name) + "'");
}

Rgb semantic_color(int semantic_class) {
  const auto n = static_cast<int>(kPalette.size());
  return kPalette[static_cast<std::size_t>(((semantic_class % n) + n) % n)];
}

AnalyticScene::AnalyticScene(Points anchors, std::vector<int> labels, const SceneSettings& settings)
    : anchors_(std::move(anchors)), labels_(std::move(labels)), settings_(settings) {
  if (anchors_.rows() == 0) throw ContractViolation("analytic scene needs anchors");
  if (static_cast<std::size_t>(anchors_.rows()) != labels_.size()) throw ContractViolation("one label per anchor");
  if (!(settings_.blob_scale > 0.0) || !(settings_.truncation > 0.0)) {
    throw ContractViolation("blob scale and truncation must be positive");
  }
  reach_ = settings_.truncation * settings_.blob_scale;
  cell_ = settings_.blob_scale;
  const Eigen::Vector3d lo = anchors_.colwise().minCoeff().transpose().array() - reach_;
  const Eigen::Vector3d hi = anchors_.colwise().maxCoeff().transpose().array() + reach_;
  grid_origin_ = lo;
  for (int a = 0; a < 3; ++a) cells_[a] = static_cast<int>(std::ceil((hi[a] - lo[a]) / cell_)) + 1;
  cell_anchors_.resize(static_cast<std::size_t>(cells_[0]) * cells_[1] * cells_[2]);
  for (int i = 0; i < cells_[0]; ++i) {
    for (int j = 0; j < cells_[1]; ++j) {
      for (int k = 0; k < cells_[2]; ++k) {
        const Eigen::Vector3d box_lo = grid_origin_ + cell_ * Eigen::Vector3d(i, j, k);
        auto& list = cell_anchors_[(static_cast<std::size_t>(i) * cells_[1] + j) * cells_[2] + k];
        for (Eigen::Index v = 0; v < anchors_.rows(); ++v) {
          const Eigen::Vector3d p = anchors_.row(v).transpose();
          const Eigen::Vector3d box_hi = box_lo + Eigen::Vector3d::Constant(cell_);
          const Eigen::Vector3d nearest = p.cwiseMax(box_lo).cwiseMin(box_hi);
          if ((p - nearest).norm() <= reach_) list.push_back(static_cast<int>(v));
        }
      }
    }
  }
}

AnalyticScene AnalyticScene::from_head(const HeadModel& head, const IdentityParams& beta, const ExpressionParams& psi,
                                       const std::vector<int>& anchor_ids, const SceneSettings& settings) {
  const Points v = vertices(head, beta, psi);
  Points anchors(static_cast<Eigen::Index>(anchor_ids.size()), 3);
  std::vector<int> labels;
  for (std::size_t i = 0; i < anchor_ids.size(); ++i) {
    const int id = anchor_ids[i];
    if (id < 0 || id >= head.num_vertices()) throw ContractViolation("anchor vertex out of range");
    anchors.row(static_cast<Eigen::Index>(i)) = v.row(id);
    labels.push_back(head.semantic_labels[static_cast<std::size_t>(id)]);
  }
  return AnalyticScene(std::move(anchors), std::move(labels), settings);
}

const std::vector<int>& AnalyticScene::candidates(const Eigen::Vector3d& x) const {
  std::array<int, 3> c{};
  for (int a = 0; a < 3; ++a) {
    const double f = std::floor((x[a] - grid_origin_[a]) / cell_);
    if (!(f >= 0.0) || f >= cells_[a]) return none_;
    c[a] = static_cast<int>(f);
  }
  return cell_anchors_[(static_cast<std::size_t>(c[0]) * cells_[1] + c[1]) * cells_[2] + c[2]];
}

double AnalyticScene::density(const Eigen::Vector3d& x) const {
  const double inv = 1.0 / (2.0 * settings_.blob_scale * settings_.blob_scale);
  const double reach2 = reach_ * reach_;
  double total = 0.0;
  for (int v : candidates(x)) {
    const double d2 = (anchors_.row(v).transpose() - x).squaredNorm();
    if (d2 <= reach2) total += std::exp(-d2 * inv);
  }
  return settings_.amplitude * total;
}

Rgb AnalyticScene::color(const Eigen::Vector3d& x) const {
  if (settings_.blend_colors) {
    const double inv = 1.0 / (2.0 * settings_.blob_scale * settings_.blob_scale);
    const double reach2 = reach_ * reach_;
    double total = 0.0;
    Rgb mix{0.0, 0.0, 0.0};
    for (int v : candidates(x)) {
      const double d2 = (anchors_.row(v).transpose() - x).squaredNorm();
      if (d2 > reach2) continue;
      const double g = std::exp(-d2 * inv);
      const Rgb c = semantic_color(labels_[static_cast<std::size_t>(v)]);
      for (int ch = 0; ch < 3; ++ch) mix[static_cast<std::size_t>(ch)] += g * c[static_cast<std::size_t>(ch)];
      total += g;
    }
    if (total > 0.0) {
      for (double& c : mix) c /= total;
      return mix;
    }
  }
  double best = std::numeric_limits<double>::infinity();
  int label = -1;
  for (int v : candidates(x)) {
    const double d2 = (anchors_.row(v).transpose() - x).squaredNorm();
    if (d2 < best) {
      best = d2;
      label = labels_[static_cast<std::size_t>(v)];
    }
  }
  // Colors only matter where density is positive, which always has a candidate.
  return label < 0 ? settings_.background : semantic_color(label);
}

void AnalyticScene::evaluate(std::span<const double> xyz, std::span<double> sigma, std::span<double> rgb) const {
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    const Eigen::Vector3d x(xyz[3 * i], xyz[3 * i + 1], xyz[3 * i + 2]);
    sigma[i] = density(x);
    const Rgb c = color(x);
    for (int ch = 0; ch < 3; ++ch) rgb[3 * i + ch] = c[static_cast<std::size_t>(ch)];
  }
}

AnalyticField AnalyticScene::field() const {
  return [this](std::span<const double> xyz, std::span<const double>, std::span<double> sigma,
                std::span<double> rgb) { evaluate(xyz, sigma, rgb); };
}

std::vector<int> select_anchor_vertices(const Points& points, int count) {
  const auto n = static_cast<int>(points.rows());
  if (count < 1 || count > n) throw ContractViolation("anchor count must be in [1, vertex count]");
  std::vector<int> chosen{0};
  std::vector<double> dist(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  while (static_cast<int>(chosen.size()) < count) {
    const Eigen::RowVector3d last = points.row(chosen.back());
    int far = 0;
    for (int v = 0; v < n; ++v) {
      dist[static_cast<std::size_t>(v)] = std::min(dist[static_cast<std::size_t>(v)], (points.row(v) - last).squaredNorm());
      if (dist[static_cast<std::size_t>(v)] > dist[static_cast<std::size_t>(far)]) far = v;
    }
    chosen.push_back(far);
  }
  return chosen;
}

void GeneratorSettings::validate() const {
  if (n_train < 8 || n_train > 200) throw ContractViolation("n_train must be in [8, 200]");
  if (n_test_seen < 0 || n_test_unseen < 0) throw ContractViolation("test counts must be non-negative");
  if (width < 1 || height < 1) throw ContractViolation("image size must be positive");
  if (quadrature_samples < 2) throw ContractViolation("quadrature needs at least 2 samples");
  if (!(train_psi >= 0.0 && train_psi < unseen_psi_min && unseen_psi_min <= unseen_psi_max && unseen_psi_max <= 1.0)) {
    throw ContractViolation("need 0 <= train_psi < unseen_psi_min <= unseen_psi_max <= 1");
  }
  if (!(camera_distance > 0.0) || !(fov_x_degrees > 0.0 && fov_x_degrees < 180.0)) {
    throw ContractViolation("camera distance and field of view must be positive");
  }
  if (scene.anchors < 1) throw ContractViolation("need at least one anchor");
}

std::vector<const Frame*> SceneManifest::frames_in(Split split) const {
  std::vector<const Frame*> out;
  for (const auto& f : frames) {
    if (f.split == split) out.push_back(&f);
  }
  return out;
}

Points SceneManifest::canonical_vertices() const {
  return vertices(head, beta, ExpressionParams::neutral(head.expression_dim()));
}

double scene_bound_radius(const HeadModel& head, const IdentityParams& beta, const SceneSettings& scene,
                          double scale) {
  const Points v = vertices(head, beta, ExpressionParams::neutral(head.expression_dim()));
  return scale * (v.rowwise().norm().maxCoeff() + scene.truncation * scene.blob_scale);
}

SceneManifest make_manifest(const GeneratorSettings& settings) {
  settings.validate();
  SceneManifest m;
  m.generator = settings;
  m.head = generate_synthetic_head(settings.seed, settings.head);
  auto beta_rng = stream(settings.seed, 1);
  std::normal_distribution<double> gauss(0.0, settings.identity_scale);
  m.beta = IdentityParams::zero(m.head.identity_dim());
  for (Eigen::Index i = 0; i < m.beta.size(); ++i) m.beta.values[i] = gauss(beta_rng);
  m.anchor_ids = select_anchor_vertices(m.canonical_vertices(), settings.scene.anchors);
  m.bound_radius = scene_bound_radius(m.head, m.beta, settings.scene, settings.bound_scale);

  const Camera camera =
      Camera::orbit(settings.width, settings.height, settings.camera_distance, deg(settings.fov_x_degrees));
  const int de = m.head.expression_dim();
  auto pose_rng = stream(settings.seed, 2);
  auto psi_rng = stream(settings.seed, 3);
  std::uniform_real_distribution<double> train_coord(-settings.train_psi, settings.train_psi);
  std::uniform_real_distribution<double> far_coord(settings.unseen_psi_min, settings.unseen_psi_max);
  std::uniform_int_distribution<int> pick_coord(0, de - 1);
  std::bernoulli_distribution sign(0.5);

  auto add_frame = [&](Split split, ExpressionParams psi) {
    Frame f;
    f.index = static_cast<int>(m.frames.size());
    f.split = split;
    f.camera = camera;
    f.head_pose = random_pose(settings, pose_rng);
    f.psi = std::move(psi);
    f.image = fmt::format("frame_{:04d}.png", f.index);
    if (settings.write_raw) f.raw = fmt::format("frame_{:04d}.bin", f.index);
    m.frames.push_back(std::move(f));
  };
  auto in_range_psi = [&] {
    ExpressionParams psi = ExpressionParams::neutral(de);
    for (int j = 0; j < de; ++j) psi.values[j] = train_coord(psi_rng);
    return psi;
  };
  for (int i = 0; i < settings.n_train; ++i) add_frame(Split::kTrain, in_range_psi());
  for (int i = 0; i < settings.n_test_seen; ++i) {
    add_frame(Split::kTestSeen, m.frames[static_cast<std::size_t>(i % settings.n_train)].psi);
  }
  Eigen::VectorXd train_lo = Eigen::VectorXd::Constant(de, std::numeric_limits<double>::infinity());
  Eigen::VectorXd train_hi = -train_lo;
  for (const auto* f : m.frames_in(Split::kTrain)) {
    train_lo = train_lo.cwiseMin(f->psi.values);
    train_hi = train_hi.cwiseMax(f->psi.values);
  }
  for (int i = 0; i < settings.n_test_unseen; ++i) {
    ExpressionParams psi = in_range_psi();
    const int c = pick_coord(psi_rng);
    psi.values[c] = (sign(psi_rng) ? 1.0 : -1.0) * far_coord(psi_rng);
    if (!(psi.values[c] > train_hi[c] || psi.values[c] < train_lo[c])) {
      throw std::logic_error("unseen expression landed inside the training range");
    }
    add_frame(Split::kTestUnseen, std::move(psi));
  }
  return m;
}

Image render_ground_truth(const SceneManifest& manifest, const Frame& frame, int threads) {
  const AnalyticScene scene =
      AnalyticScene::from_head(manifest.head, manifest.beta, frame.psi, manifest.anchor_ids, manifest.generator.scene);
  QuadratureSettings q;
  q.samples = manifest.generator.quadrature_samples;
  q.bound_radius = manifest.bound_radius;
  q.background = manifest.generator.scene.background;
  q.threads = threads;
  return render_analytic(frame.camera, frame.head_pose, scene.field(), q);
}

SceneManifest generate_dataset(const GeneratorSettings& settings, const std::filesystem::path& out_dir) {
  SceneManifest m = make_manifest(settings);
  std::filesystem::create_directories(out_dir);
  m.root = out_dir;
  for (const Frame& f : m.frames) {
    const Image img = render_ground_truth(m, f, settings.threads);
    write_png(out_dir / f.image, img);
    if (!f.raw.empty()) write_raw_image(out_dir / f.raw, img);
  }
  save_manifest(m, out_dir);
  return m;
}

void save_manifest(const SceneManifest& m, const std::filesystem::path& root) {
  std::filesystem::create_directories(root);
  write_checkpoint(root / "head.bin", head_arrays(m.head));
  json frames = json::array();
  for (const Frame& f : m.frames) {
    frames.push_back({{"index", f.index},
                      {"split", split_name(f.split)},
                      {"image", f.image},
                      {"raw", f.raw},
                      {"camera", camera_json(f.camera)},
                      {"head_pose", pose_json(f.head_pose)},
                      {"psi", vector_json(f.psi.values)}});
  }
  json doc = {{"format", "headrf-scene"},
              {"version", m.version},
              {"generator", generator_json(m.generator)},
              {"head", {{"file", "head.bin"}, {"beta", vector_json(m.beta.values)}, {"anchor_ids", m.anchor_ids}}},
              {"bound_radius", m.bound_radius},
              {"frames", frames}};
  const auto path = root / "manifest.json";
  const auto tmp = root / "manifest.json.tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << doc.dump(2) << '\n';
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

SceneManifest load_manifest(const std::filesystem::path& root) {
  const auto path = root / "manifest.json";
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed manifest " + path.string() + ": " + e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != "headrf-scene") throw std::runtime_error("not a headrf scene manifest");
    SceneManifest m;
    m.version = doc.at("version").get<int>();
    if (m.version != kManifestVersion) {
      throw std::runtime_error("unsupported manifest version " + std::to_string(m.version));
    }
    m.root = root;
    m.generator = generator_from(doc.at("generator"));
    const json& head = doc.at("head");
    m.head = head_from(read_checkpoint(root / head.at("file").get<std::string>()));
    m.beta.values = vector_from(head.at("beta"));
    m.anchor_ids = head.at("anchor_ids").get<std::vector<int>>();
    m.bound_radius = doc.at("bound_radius").get<double>();
    for (const json& jf : doc.at("frames")) {
      Frame f;
      f.index = jf.at("index").get<int>();
      f.split = parse_split(jf.at("split").get<std::string>());
      f.image = jf.at("image").get<std::string>();
      f.raw = jf.value("raw", std::string{});
      f.camera = camera_from(jf.at("camera"));
      f.head_pose = pose_from(jf.at("head_pose"));
      f.psi.values = vector_from(jf.at("psi"));
      if (f.index != static_cast<int>(m.frames.size())) throw std::runtime_error("frame indices must be dense from 0");
      if (f.psi.size() != m.head.expression_dim()) throw std::runtime_error("frame psi has the wrong length");
      m.frames.push_back(std::move(f));
    }
    if (m.beta.size() != m.head.identity_dim()) throw std::runtime_error("beta has the wrong length");
    return m;
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed manifest " + path.string() + ": " + e.what());
  }
}

Image load_frame_image(const SceneManifest& manifest, const Frame& frame, bool prefer_raw) {
  if (prefer_raw && !frame.raw.empty() && std::filesystem::exists(manifest.root / frame.raw)) {
    return read_raw_image(manifest.root / frame.raw);
  }
  return read_png(manifest.root / frame.image);
}

}  // namespace headrf
