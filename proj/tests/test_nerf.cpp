// Copyright 2026 The stylenerf Authors
// SPDX-License-Identifier: Apache-2.0

// Volume renderer driver and the coarse/fine radiance networks.

#include <doctest.h>

#include <cmath>
#include <cstring>

#include "stylenerf/error.hpp"
#include "stylenerf/nerf.hpp"
#include "stylenerf/synthetic.hpp"

using namespace stylenerf;

namespace {

// sigma and color constant everywhere.
class ConstantField : public RadianceField {
 public:
  ConstantField(float sigma, std::array<float, 3> rgb) : sigma_(sigma), rgb_(rgb) {}
  FieldOutput query(const SampleBatch& b) const override {
    FieldOutput out{Matrix::Constant(1, b.size(), sigma_), Matrix(3, b.size())};
    for (int c = 0; c < 3; ++c) out.rgb.row(c).setConstant(rgb_[c]);
    return out;
  }
  FieldOutput query_train(const SampleBatch& b, std::unique_ptr<FieldTrace>& trace) const override {
    trace = std::make_unique<FieldTrace>();
    return query(b);
  }
  void backward(const FieldTrace&, const Matrix&, const Matrix&) override {}

 private:
  float sigma_;
  std::array<float, 3> rgb_;
};

NerfArchitecture tiny_arch() {
  NerfArchitecture a;
  a.depth = 4;
  a.width = 16;
  a.skip = 2;
  a.position_levels = 3;
  a.direction_levels = 2;
  return a;
}

SceneDataset tiny_scene(int size = 8, int train = 4, int val = 1) {
  CubeSceneConfig cfg;
  cfg.size = size;
  cfg.train_views = train;
  cfg.val_views = val;
  return make_cube_scene(cfg);
}

RayBatch view_rays(const SceneDataset& s, int view) {
  return RayBatch::from_rays(generate_rays(s.poses[view], s.near, s.far));
}

Matrix view_target(const SceneDataset& s, int view) {
  const Image& img = s.images[view];
  Matrix t(3, static_cast<Eigen::Index>(img.pixels()));
  for (std::size_t p = 0; p < img.pixels(); ++p)
    for (int c = 0; c < 3; ++c) t(c, static_cast<Eigen::Index>(p)) = img.rgb[3 * p + c];
  return t;
}

bool close(double analytic, double numeric, double rel, double abs_tol) {
  return std::abs(analytic - numeric) <= std::max(abs_tol, rel * std::max(std::abs(analytic), std::abs(numeric)));
}

NerfTrainConfig tiny_config() {
  NerfTrainConfig c;
  c.arch = tiny_arch();
  c.n_coarse = 8;
  c.n_fine = 8;
  c.batch_rays = 64;
  c.learning_rate = 5e-3f;
  c.steps = 6;
  c.seed = 3;
  return c;
}

}  // namespace

TEST_CASE("constant medium renders the closed form") {
  const SceneDataset s = tiny_scene();
  const RayBatch rays = view_rays(s, 0);
  const ConstantField field(0.4f, {0.2f, 0.5f, 0.9f});
  RenderOptions o;
  o.n_coarse = 16;
  o.n_fine = 0;
  o.background = {1.0f, 0.0f, 0.25f};
  const RenderResult r = render_rays(field, nullptr, rays, o);
  // Midpoint samples: the optical path runs from the first sample to far.
  const double bin = (s.far - s.near) / o.n_coarse;
  const double acc = 1.0 - std::exp(-0.4 * (s.far - s.near - bin / 2));
  for (int i = 0; i < rays.size(); ++i) {
    CHECK(r.opacity_coarse[i] == doctest::Approx(acc).epsilon(1e-5));
    CHECK(r.rgb_coarse(0, i) == doctest::Approx(0.2 * acc + 1.0 * (1 - acc)).epsilon(1e-5));
    CHECK(r.rgb_coarse(2, i) == doctest::Approx(0.9 * acc + 0.25 * (1 - acc)).epsilon(1e-5));
  }
  CHECK(r.rgb_fine == r.rgb_coarse);
  CHECK(r.opacity_fine == r.opacity_coarse);
  CHECK(r.samples_coarse == 16);
}

TEST_CASE("fine pass merges samples and keeps the constant-medium identity") {
  const SceneDataset s = tiny_scene();
  const RayBatch rays = view_rays(s, 1);
  const ConstantField field(2.0f, {0.3f, 0.3f, 0.3f});
  RenderOptions o;
  o.n_coarse = 8;
  o.n_fine = 12;
  const RenderResult r = render_rays(field, &field, rays, o);
  CHECK(r.samples_fine == 20);
  for (int i = 0; i < rays.size(); ++i) {
    // rgb = c * acc over a black background, whatever the sample placement.
    CHECK(r.rgb_fine(1, i) == doctest::Approx(0.3 * r.opacity_fine[i]).epsilon(1e-5));
    CHECK(r.depth_fine[i] >= s.near);
    CHECK(r.depth_fine[i] <= s.far);
  }
}

TEST_CASE("chunking does not change results") {
  const SceneDataset s = tiny_scene();
  const RayBatch rays = view_rays(s, 2);
  const NerfNetwork coarse(tiny_arch(), 1), fine(tiny_arch(), 2);
  RenderOptions a, b;
  a.n_coarse = b.n_coarse = 8;
  a.n_fine = b.n_fine = 8;
  a.chunk = 512;
  b.chunk = 7;
  const RenderResult ra = render_rays(coarse, &fine, rays, a);
  const RenderResult rb = render_rays(coarse, &fine, rays, b);
  CHECK((ra.rgb_fine - rb.rgb_fine).cwiseAbs().maxCoeff() < 1e-6f);
  const ConstantField field(1.0f, {0.1f, 0.2f, 0.3f});
  CHECK(render_rays(field, &field, rays, a).rgb_fine == render_rays(field, &field, rays, b).rgb_fine);
}

TEST_CASE("perturbed rendering depends only on the seed") {
  const SceneDataset s = tiny_scene();
  const RayBatch rays = view_rays(s, 0);
  const NerfNetwork coarse(tiny_arch(), 1), fine(tiny_arch(), 2);
  RenderOptions o;
  o.n_coarse = 8;
  o.n_fine = 8;
  o.perturb = true;
  Rng r1(9), r2(9), r3(10);
  const Matrix a = render_rays(coarse, &fine, rays, o, &r1).rgb_fine;
  CHECK(a == render_rays(coarse, &fine, rays, o, &r2).rgb_fine);
  CHECK(a != render_rays(coarse, &fine, rays, o, &r3).rgb_fine);
}

TEST_CASE("render_image shape, range and opacity") {
  const SceneDataset s = tiny_scene();
  const NerfNetwork coarse(tiny_arch(), 1), fine(tiny_arch(), 2);
  RenderOptions o;
  o.n_coarse = 8;
  o.n_fine = 8;
  o.background = {1.0f, 1.0f, 1.0f};
  std::vector<float> opacity;
  const Image img = render_image(coarse, &fine, s.poses[0].resized(5, 7), s.near, s.far, o, nullptr, &opacity);
  CHECK(img.width == 7);
  CHECK(img.height == 5);
  CHECK(opacity.size() == 35);
  for (float v : img.rgb) CHECK((v >= 0.0f && v <= 1.0f));
  for (float v : opacity) CHECK((v >= 0.0f && v <= 1.0f + 1e-6f));
}

TEST_CASE("ray batch validation") {
  RayBatch b = RayBatch::from_rays(generate_rays(tiny_scene().poses[0], 2.0, 6.0));
  CHECK_NOTHROW(b.validate());
  CHECK(b.slice(3, 10).size() == 7);
  b.far = 1.0;
  CHECK_THROWS_AS(b.validate(), ValidationError);
  RenderOptions o;
  o.n_coarse = 0;
  CHECK_THROWS_AS(o.validate(), ValidationError);
}

TEST_CASE("network output ranges and direction validation") {
  const NerfNetwork net(tiny_arch(), 4);
  Rng rng(1);
  SampleBatch b;
  b.positions = Matrix::Random(3, 50) * 2.0f;
  b.directions = Matrix::Random(3, 50);
  b.directions.colwise().normalize();
  const FieldOutput out = net.query(b);
  CHECK(out.sigma.rows() == 1);
  CHECK(out.sigma.minCoeff() >= 0.0f);
  CHECK(out.rgb.minCoeff() >= 0.0f);
  CHECK(out.rgb.maxCoeff() <= 1.0f);
  b.directions(0, 3) += 0.1f;
  CHECK_THROWS_AS(net.query(b), ValidationError);
}

TEST_CASE("density does not depend on the view direction") {
  const NerfNetwork net(tiny_arch(), 5);
  SampleBatch a;
  a.positions = Matrix::Random(3, 20);
  a.directions = Matrix::Random(3, 20);
  a.directions.colwise().normalize();
  SampleBatch b = a;
  b.directions = -a.directions;
  const FieldOutput oa = net.query(a), ob = net.query(b);
  CHECK(oa.sigma == ob.sigma);
  CHECK(oa.rgb != ob.rgb);
}

// Fine sample placement follows the coarse weights but is treated as a
// constant, so the coarse network is checked on a coarse-only render and the
// fine network on the full hierarchy.
int gradient_check(NerfNetwork& coarse, NerfNetwork* fine, NerfNetwork& checked_net, int n_fine,
                   int& checked) {
  const SceneDataset s = tiny_scene();
  const RayBatch rays = view_rays(s, 0);
  const Matrix target = view_target(s, 0);
  RenderOptions o;
  o.n_coarse = 8;
  o.n_fine = n_fine;
  o.background = {1.0f, 1.0f, 1.0f};
  ParameterList all;
  coarse.append_parameters(all, "coarse");
  if (fine) fine->append_parameters(all, "fine");
  zero_grad(all);
  train_rays(coarse, fine, rays, target, o, nullptr);
  ParameterList p = checked_net.parameters("net");
  std::vector<std::vector<float>> grads;
  for (const Parameter& q : p) grads.emplace_back(q.grad, q.grad + q.size);
  Rng rng(3);
  int ok = 0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    for (int t = 0; t < 4; ++t) {
      const std::size_t i = rng.below(p[k].size);
      const float v0 = p[k].value[i], h = 1e-3f;
      p[k].value[i] = v0 + h;
      const double lp = train_rays(coarse, fine, rays, target, o, nullptr).loss;
      p[k].value[i] = v0 - h;
      const double lm = train_rays(coarse, fine, rays, target, o, nullptr).loss;
      p[k].value[i] = v0;
      ++checked;
      const bool good = close(grads[k][i], (lp - lm) / (2 * h), 3e-2, 2e-5);
      if (!good) MESSAGE(p[k].name << " fd " << (lp - lm) / (2 * h) << " an " << grads[k][i]);
      ok += good;
    }
  }
  return ok;
}

TEST_CASE("network gradients match central differences") {
  NerfNetwork coarse(tiny_arch(), 1), fine(tiny_arch(), 2);
  int checked = 0;
  int ok = gradient_check(coarse, nullptr, coarse, 0, checked);
  ok += gradient_check(coarse, &fine, fine, 8, checked);
  // ReLU kinks can spoil a rare finite difference; allow at most one.
  CHECK(checked == 2 * 4 * static_cast<int>(coarse.parameters("c").size()));
  CHECK(ok >= checked - 1);
}

TEST_CASE("trunk digest covers exactly the first k layers") {
  NerfNetwork net(tiny_arch(), 6);
  const std::string t2 = net.trunk_digest(2), t4 = net.trunk_digest(4), all = net.digest();
  ParameterList p = net.parameters("n");
  auto bump = [&](const std::string& name) {
    for (Parameter& q : p)
      if (q.name == name) q.value[0] += 1.0f;
  };
  bump("n.density.bias");
  CHECK(net.trunk_digest(4) == t4);
  CHECK(net.digest() != all);
  bump("n.trunk.3.weight");
  CHECK(net.trunk_digest(2) == t2);
  CHECK(net.trunk_digest(4) != t4);
}

TEST_CASE("config json round trip and validation") {
  NerfTrainConfig c = tiny_config();
  c.precrop_steps = 17;
  const NerfTrainConfig back = nlohmann::json(c).get<NerfTrainConfig>();
  CHECK(nlohmann::json(back) == nlohmann::json(c));
  NerfTrainConfig bad = c;
  bad.batch_rays = 0;
  CHECK_THROWS_AS(validate(bad), ValidationError);
  bad = c;
  bad.arch.skip = 9;
  CHECK_THROWS_AS(validate(bad), ValidationError);
  bad = c;
  bad.learning_rate = -1.0f;
  CHECK_THROWS_AS(validate(bad), ValidationError);
}

TEST_CASE("training lowers the loss") {
  const SceneDataset s = tiny_scene(16, 6, 1);
  NerfTrainConfig c = tiny_config();
  c.steps = 80;
  c.arch.width = 32;
  c.batch_rays = 128;
  NerfTrainer trainer(s, c);
  double first = 0.0, last = 0.0;
  while (trainer.steps_done() < c.steps) {
    const NerfStepLog log = trainer.step();
    if (log.step < 10) first += log.loss;
    if (log.step >= c.steps - 10) last += log.loss;
  }
  CHECK(last < 0.7 * first);
}

TEST_CASE("checkpoint round trip and exact resumption") {
  const SceneDataset s = tiny_scene();
  const NerfTrainConfig c = tiny_config();
  NerfTrainer straight(s, c);
  for (int i = 0; i < 6; ++i) straight.step();

  NerfTrainer first(s, c);
  for (int i = 0; i < 3; ++i) first.step();
  const auto bytes = serialize_checkpoint(first.checkpoint());
  NerfTrainer second(s, c);
  second.resume(deserialize_checkpoint(bytes, Stage::kNerf));
  CHECK(second.steps_done() == 3);
  for (int i = 0; i < 3; ++i) second.step();
  CHECK(second.model().digest() == straight.model().digest());

  const ModelCheckpoint ckpt = straight.checkpoint();
  const NerfModel loaded = nerf_from_model(deserialize_checkpoint(serialize_checkpoint(ckpt)));
  CHECK(loaded.digest() == straight.model().digest());
  CHECK(ckpt.digests.at("trunk.coarse") == straight.model().coarse.trunk_digest(c.arch.depth));
  CHECK(ckpt.metadata.at("steps_done") == 6);
  const RenderOptions o = c.render_options(false, s.background);
  const Image a = render_image(straight.model().coarse, &straight.model().fine, s.poses[1], s.near, s.far, o);
  const Image b = render_image(loaded.coarse, &loaded.fine, s.poses[1], s.near, s.far, o);
  CHECK(a.rgb == b.rgb);
  ModelCheckpoint wrong = ckpt;
  wrong.stage = Stage::kAdain;
  CHECK_THROWS_AS(nerf_from_model(wrong), StageTagError);
}

TEST_CASE("evaluate_psnr agrees with a direct computation") {
  const SceneDataset s = tiny_scene();
  NerfModel m(tiny_config(), s.near, s.far, s.background);
  const SceneDataset val = s.subset("val");
  const RenderOptions o = m.config.render_options(false, m.background);
  const Image img = render_image(m.coarse, &m.fine, val.poses[0], m.near, m.far, o);
  double se = 0.0;
  for (std::size_t i = 0; i < img.rgb.size(); ++i) se += std::pow(img.rgb[i] - val.images[0].rgb[i], 2);
  CHECK(evaluate_psnr(m, val) == doctest::Approx(10.0 * std::log10(img.rgb.size() / se)).epsilon(1e-4));
}
