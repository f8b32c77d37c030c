// Copyright 2026 The stylenerf Authors
// SPDX-License-Identifier: Apache-2.0

// Style interpolation, the style registry, the stylized dataset and the
// style-conditioned field over a frozen trunk.

#include <doctest.h>

#include <filesystem>

#include "fixtures.hpp"
#include "stylenerf/error.hpp"
#include "stylenerf/multistyle.hpp"
#include "stylenerf/synthetic.hpp"

using namespace stylenerf;
namespace fs = std::filesystem;

namespace {

StyleStatistics random_stats(Rng& rng, std::vector<int> channels = {2, 3}) {
  StyleStatistics s;
  for (int c : channels) {
    std::vector<float> m(c), d(c);
    for (int i = 0; i < c; ++i) {
      m[i] = static_cast<float>(rng.uniform(-2.0, 2.0));
      d[i] = static_cast<float>(rng.uniform(0.0, 3.0));
    }
    s.means.push_back(m);
    s.stds.push_back(d);
  }
  return s;
}

SampleBatch random_samples(Rng& rng, int n) {
  SampleBatch b;
  b.positions = Matrix(3, n);
  b.directions = Matrix(3, n);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k) {
      b.positions(k, i) = static_cast<float>(rng.uniform(-1.5, 1.5));
      b.directions(k, i) = static_cast<float>(rng.normal());
    }
  }
  b.directions.colwise().normalize();
  return b;
}

Matrix random_table(Rng& rng, int dim, int count) {
  Matrix t(dim, count);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = static_cast<float>(rng.uniform(0.0, 2.0));
  return t;
}

bool close(double a, double b, double rel, double abs_tol) {
  return std::abs(a - b) <= std::max(abs_tol, rel * std::max(std::abs(a), std::abs(b)));
}

using fixtures::small_heads;
using fixtures::trunk_config;
using Fixture = fixtures::StylizedScene;

Fixture& fixture() {
  static Fixture f("multistyle");
  return f;
}

MultistyleTrainConfig tiny_ms(int split = 4, bool density_aware = false) {
  return fixtures::tiny_multistyle(split, density_aware);
}

}  // namespace

TEST_CASE("interpolation endpoints and self-interpolation are exact") {
  Rng rng(1);
  const StyleStatistics a = random_stats(rng), b = random_stats(rng);
  CHECK(interpolate_styles(a, b, 0.0).flatten() == a.flatten());
  CHECK(interpolate_styles(a, b, 1.0).flatten() == b.flatten());
  for (int i = 0; i <= 10; ++i) CHECK(interpolate_styles(a, a, i / 10.0).flatten() == a.flatten());
  const auto mid = interpolate_styles(a, b, 0.5).flatten();
  const auto fa = a.flatten(), fb = b.flatten();
  for (std::size_t i = 0; i < mid.size(); ++i) CHECK(mid[i] == doctest::Approx(0.5 * (fa[i] + fb[i])));
  CHECK_THROWS_AS(interpolate_styles(a, b, -0.01), ValidationError);
  CHECK_THROWS_AS(interpolate_styles(a, b, 1.01), ValidationError);
  CHECK_THROWS_AS(interpolate_styles(a, random_stats(rng, {2, 4}), 0.5), ValidationError);
  CHECK(set_intensity(a, b, 1.0).flatten() == a.flatten());
  CHECK(set_intensity(a, b, 0.0).flatten() == b.flatten());
}

TEST_CASE("interpolated stds stay non-negative") {
  Rng rng(2);
  for (int t = 0; t < 50; ++t) {
    const StyleStatistics s = interpolate_styles(random_stats(rng), random_stats(rng), rng.uniform());
    for (const auto& layer : s.stds)
      for (float v : layer) CHECK(v >= 0.0f);
  }
}

TEST_CASE("registry rules, order and persistence") {
  Rng rng(3);
  StyleRegistry r;
  r.add({"zeta", "Zeta", "z.png", "style", random_stats(rng)});
  r.add({"alpha", "Alpha", "a.png", "style", random_stats(rng)});
  CHECK_THROWS_AS(r.add({"zeta", "again", "", "style", random_stats(rng)}), ValidationError);
  CHECK_THROWS_AS(r.add({"x", "x", "", "painting", random_stats(rng)}), ValidationError);
  CHECK_THROWS_AS(r.add({"y", "y", "", "style", random_stats(rng, {4})}), ValidationError);
  CHECK(r.content() == nullptr);
  r.add({"content", "content", "", "content", random_stats(rng)});
  REQUIRE(r.content() != nullptr);
  CHECK(r.find("alpha") == 1);
  CHECK(r.find("missing") == -1);
  CHECK_THROWS_AS(r.at("missing"), ValidationError);
  const Matrix t = r.table();
  CHECK(t.rows() == 10);
  CHECK(t.cols() == 3);
  const auto flat = r.at("alpha").statistics.flatten();
  for (int i = 0; i < 10; ++i) CHECK(t(i, 1) == flat[i]);

  const fs::path p = fs::temp_directory_path() / "stylenerf_test_registry.json";
  r.save(p);
  const StyleRegistry back = StyleRegistry::load(p);
  CHECK(back.digest() == r.digest());
  CHECK(back.entries()[0].id == "zeta");
  CHECK(back.table() == t);
  CHECK(StyleRegistry::from_json(r.to_json()).digest() == r.digest());
  fs::remove(p);
  CHECK_THROWS_AS(StyleRegistry::load(p), IoError);
}

TEST_CASE("stylized dataset layout and reload") {
  const Fixture& f = fixture();
  const StyleRegistry& reg = f.data.registry;
  REQUIRE(reg.size() == 3);
  CHECK(reg.entries()[0].id == "style_00");
  CHECK(reg.entries()[0].name == "pattern0");
  CHECK(reg.entries()[2].kind == "content");
  CHECK(reg.entries()[0].statistics.flattened_dim() == kStyleDim);
  CHECK(f.data.scene.size() == 3);
  for (const std::string& id : {"style_00", "style_01", "content"})
    for (const std::string& frame : f.data.scene.frame_ids)
      CHECK(fs::exists(f.dir / "stylized" / id / (frame + ".png")));
  CHECK(fs::exists(f.dir / "registry.json"));

  // The content row reproduces the original frames.
  for (std::size_t n = 0; n < f.data.scene.size(); ++n) CHECK(f.data.images[2][n].rgb == f.data.scene.images[n].rgb);
  // Stylized frames keep the background wherever the scene is transparent.
  const Image& frame = f.data.scene.images[0];
  const Image& styl = f.data.images[0][0];
  int background = 0;
  for (std::size_t p = 0; p < frame.pixels(); ++p) {
    if (frame.alpha[p] != 0.0f) continue;
    ++background;
    for (int c = 0; c < 3; ++c) CHECK(styl.rgb[3 * p + c] == f.scene.background[c]);
  }
  CHECK(background > 0);

  const StylizedDataset back = load_stylized_dataset(f.scene, f.dir);
  CHECK(back.registry.digest() == reg.digest());
  for (std::size_t m = 0; m < 3; ++m)
    for (std::size_t n = 0; n < 3; ++n) CHECK(back.images[m][n].rgb == f.data.images[m][n].rgb);
}

TEST_CASE("geometry ignores the style unless density aware") {
  auto trunk = std::make_shared<NerfNetwork>(trunk_config().arch, 7);
  Rng rng(4);
  SampleBatch b = random_samples(rng, 40);
  const Matrix table = random_table(rng, 6, 3);
  b.table = &table;
  b.conditions.assign(40, 0);
  SampleBatch b2 = b;
  b2.conditions.assign(40, 2);

  const MultiStyleField base(trunk, small_heads(4, false), 6, 1);
  const FieldOutput o1 = base.query(b), o2 = base.query(b2);
  CHECK(o1.sigma == o2.sigma);
  CHECK(o1.rgb != o2.rgb);
  // Whole trunk kept: density starts as the stage-2 density.
  const FieldOutput ref = trunk->query(b);
  CHECK((o1.sigma - ref.sigma).cwiseAbs().maxCoeff() < 1e-5f);

  // Style columns of a copied density head start at zero.
  const MultiStyleField copied(trunk, small_heads(4, true), 6, 1);
  CHECK(copied.query(b).sigma == copied.query(b2).sigma);
  const MultiStyleField aware(trunk, small_heads(3, true), 6, 1);
  CHECK(aware.query(b).sigma != aware.query(b2).sigma);

  const MultiStyleField partial(trunk, small_heads(2, false), 6, 1);
  CHECK(partial.query(b).sigma == partial.query(b2).sigma);
  CHECK_THROWS_AS(MultiStyleField(trunk, small_heads(5, false), 6, 1), ValidationError);
}

TEST_CASE("mixed-style batches equal per-style evaluation") {
  auto trunk = std::make_shared<NerfNetwork>(trunk_config().arch, 7);
  Rng rng(5);
  const Matrix table = random_table(rng, 6, 3);
  const MultiStyleField field(trunk, small_heads(3, true), 6, 9);
  SampleBatch mixed = random_samples(rng, 30);
  mixed.table = &table;
  for (int i = 0; i < 30; ++i) mixed.conditions.push_back(i % 3);
  const FieldOutput all = field.query(mixed);
  for (int i = 0; i < 30; ++i) {
    SampleBatch one;
    one.positions = mixed.positions.col(i);
    one.directions = mixed.directions.col(i);
    one.table = &table;
    one.conditions = {i % 3};
    const FieldOutput o = field.query(one);
    CHECK(std::abs(o.sigma(0, 0) - all.sigma(0, i)) < 1e-5f);
    CHECK((o.rgb.col(0) - all.rgb.col(i)).cwiseAbs().maxCoeff() < 1e-5f);
  }
}

TEST_CASE("head gradients match central differences and the trunk gets none") {
  for (const bool aware : {false, true}) {
    auto trunk = std::make_shared<NerfNetwork>(trunk_config().arch, 7);
    const std::string trunk_before = trunk->digest();
    MultiStyleField coarse(trunk, small_heads(3, aware), 6, 11);
    const Fixture& f = fixture();
    Rng rng(6);
    const Matrix table = random_table(rng, 6, 3);
    RayBatch rays = RayBatch::from_rays(generate_rays(f.scene.poses[0].resized(6, 6), 2.0, 6.0));
    rays.table = &table;
    for (int i = 0; i < rays.size(); ++i) rays.conditions.push_back(i % 3);
    Matrix target(3, rays.size());
    for (Eigen::Index i = 0; i < target.size(); ++i) target.data()[i] = static_cast<float>(rng.uniform());
    RenderOptions o;
    o.n_coarse = 12;
    o.n_fine = 0;
    o.background = {1.0f, 1.0f, 1.0f};
    ParameterList p;
    coarse.append_parameters(p, "heads");
    zero_grad(p);
    train_rays(coarse, nullptr, rays, target, o, nullptr);
    std::vector<std::vector<float>> grads;
    for (const Parameter& q : p) grads.emplace_back(q.grad, q.grad + q.size);
    int checked = 0, ok = 0;
    for (std::size_t k = 0; k < p.size(); ++k) {
      for (int t = 0; t < 4; ++t) {
        const std::size_t i = rng.below(p[k].size);
        const float v0 = p[k].value[i], h = 1e-3f;
        p[k].value[i] = v0 + h;
        const double lp = train_rays(coarse, nullptr, rays, target, o, nullptr).loss;
        p[k].value[i] = v0 - h;
        const double lm = train_rays(coarse, nullptr, rays, target, o, nullptr).loss;
        p[k].value[i] = v0;
        ++checked;
        const bool good = close(grads[k][i], (lp - lm) / (2 * h), 3e-2, 2e-5);
        if (!good) MESSAGE(p[k].name << " fd " << (lp - lm) / (2 * h) << " an " << grads[k][i]);
        ok += good;
      }
    }
    CHECK(checked == 4 * static_cast<int>(p.size()));
    CHECK(ok >= checked - 1);
    CHECK(trunk->digest() == trunk_before);
  }
}

TEST_CASE("training moves only the heads and resumes exactly") {
  const Fixture& f = fixture();
  const MultistyleTrainConfig c = tiny_ms();
  MultistyleTrainer straight(f.data, f.stage2, c);
  const std::string trunk = straight.model().trunk_digest();
  for (int i = 0; i < 4; ++i) {
    const MultistyleStepLog log = straight.step();
    CHECK(log.step == i);
    CHECK(!log.style_loss.empty());
  }
  CHECK(straight.model().trunk_digest() == trunk);
  CHECK_NOTHROW(straight.model().check_trunk(f.stage2));

  MultistyleTrainer first(f.data, f.stage2, c);
  first.step();
  first.step();
  const auto bytes = serialize_checkpoint(first.checkpoint());
  MultistyleTrainer second(f.data, f.stage2, c);
  second.resume(deserialize_checkpoint(bytes, Stage::kMultistyle));
  second.step();
  second.step();
  CHECK(second.steps_done() == 4);
  const ModelCheckpoint a = straight.checkpoint(), b = second.checkpoint();
  CHECK(serialize_checkpoint(a) == serialize_checkpoint(b));

  NerfModel other(trunk_config(), f.scene.near, f.scene.far, f.scene.background);
  other.coarse = NerfNetwork(trunk_config().arch, 99);
  CHECK_THROWS_AS(straight.model().check_trunk(other), DigestMismatchError);
  MultistyleTrainer mismatched(f.data, other, c);
  CHECK_THROWS_AS(mismatched.resume(a), DigestMismatchError);
}

TEST_CASE("checkpoint round trip renders identically") {
  const Fixture& f = fixture();
  ModelCheckpoint ckpt = train_multistyle(f.data, f.stage2, tiny_ms(3, true));
  const auto bytes = serialize_checkpoint(ckpt);
  const MultiStyleModel m1 = MultiStyleModel::from_checkpoint(ckpt);
  const MultiStyleModel m2 = MultiStyleModel::from_checkpoint(deserialize_checkpoint(bytes));
  CHECK(m1.registry().digest() == f.data.registry.digest());
  CHECK(m1.steps_done == 4);
  CHECK(m1.poses.size() == 3);
  CHECK(m1.frame_ids == f.data.scene.frame_ids);
  const StyleStatistics& s = m1.registry().at("style_01").statistics;
  Rng rng_local(1);
  std::vector<float> opacity;
  const Image a = render_view(m1.poses[1], s, m1, 16, nullptr, &opacity);
  const Image b = render_view(m2.poses[1], s, m2, 16);
  CHECK(a.width == 16);
  CHECK(opacity.size() == 256);
  CHECK(encode_png(a) == encode_png(b));
  CHECK_THROWS_AS(render_view(m1.poses[1], s, m1, 0), ValidationError);
  CHECK_THROWS_AS(render_view(m1.poses[1], random_stats(rng_local), m1, 8), ValidationError);
  ckpt.stage = Stage::kNerf;
  CHECK_THROWS_AS(MultiStyleModel::from_checkpoint(ckpt), StageTagError);
}

TEST_CASE("an untrained model refuses to render") {
  const Fixture& f = fixture();
  const MultiStyleModel m(f.stage2, tiny_ms(), f.data.registry);
  CHECK_THROWS_AS(render_view(f.scene.poses[0], f.data.registry.at("style_00").statistics, m, 8), StateError);
}

TEST_CASE("multistyle config json and validation") {
  MultistyleTrainConfig c = tiny_ms(2, true);
  const MultistyleTrainConfig back = nlohmann::json(c).get<MultistyleTrainConfig>();
  CHECK(nlohmann::json(back) == nlohmann::json(c));
  c.batch_rays = 0;
  CHECK_THROWS_AS(validate(c), ValidationError);
}
