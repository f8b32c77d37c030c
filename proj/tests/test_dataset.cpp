// Copyright 2026 The stylenerf Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "stylenerf/dataset.hpp"
#include "stylenerf/error.hpp"
#include "stylenerf/synthetic.hpp"

using namespace stylenerf;
namespace fs = std::filesystem;

namespace {

fs::path write_scene(const char* name, int train = 4, int val = 2) {
  const fs::path dir = fs::temp_directory_path() / ("stylenerf_test_scene_" + std::string(name));
  fs::remove_all(dir);
  CubeSceneConfig cfg;
  cfg.train_views = train;
  cfg.val_views = val;
  cfg.size = 16;
  save_scene(make_cube_scene(cfg), dir);
  return dir;
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

void write_json(const fs::path& p, const nlohmann::json& j) { std::ofstream(p) << j.dump(2); }

template <class E>
std::string error_text(const fs::path& dir) {
  try {
    load_scene(dir);
  } catch (const E& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("well-formed scene loads with every invariant") {
  const fs::path dir = write_scene("ok");
  const SceneDataset original = make_cube_scene({4, 2, 16});
  const SceneDataset s = load_scene(dir);
  CHECK(s.size() == 6);
  CHECK(s.indices("train").size() == 4);
  CHECK(s.indices("val").size() == 2);
  CHECK(s.subset("val").frame_ids == std::vector<std::string>{"r_004", "r_005"});
  CHECK(s.near == 2.0);
  CHECK(s.far == 6.0);
  CHECK(s.has_alpha());
  CHECK(s.background == std::array<float, 3>{1.0f, 1.0f, 1.0f});
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(s.images[i].rgb == original.images[i].rgb);
    CHECK((s.poses[i].matrix() - original.poses[i].matrix()).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(s.poses[i].focal == doctest::Approx(original.poses[i].focal));
  }
}

TEST_CASE("near and far overrides win over the file") {
  const fs::path dir = write_scene("override");
  SceneOptions o;
  o.near = 1.5;
  o.far = 7.0;
  const SceneDataset s = load_scene(dir, o);
  CHECK(s.near == 1.5);
  CHECK(s.far == 7.0);
}

TEST_CASE("missing image names the frame") {
  const fs::path dir = write_scene("missing");
  fs::remove(dir / "images" / "r_003.png");
  const std::string what = error_text<IoError>(dir);
  CHECK(what.find("r_003") != std::string::npos);
}

TEST_CASE("reflected rotation names the frame") {
  const fs::path dir = write_scene("reflect");
  auto j = read_json(dir / "transforms.json");
  for (int c = 0; c < 3; ++c) j["frames"][2]["transform_matrix"][c][0] = -j["frames"][2]["transform_matrix"][c][0].get<double>();
  write_json(dir / "transforms.json", j);
  const std::string what = error_text<ValidationError>(dir);
  CHECK(what.find("r_002") != std::string::npos);
}

TEST_CASE("malformed transforms are rejected") {
  const fs::path dir = write_scene("malformed");
  auto j = read_json(dir / "transforms.json");
  j.erase("camera_angle_x");
  write_json(dir / "transforms.json", j);
  CHECK_THROWS_AS(load_scene(dir), ValidationError);
  j = read_json(dir / "transforms.json");
  j["camera_angle_x"] = 0.7;
  j["frames"][1]["transform_matrix"] = {{1, 0, 0}, {0, 1, 0}};
  write_json(dir / "transforms.json", j);
  CHECK(error_text<ValidationError>(dir).find("r_001") != std::string::npos);
  CHECK_THROWS_AS(load_scene(dir / "absent"), IoError);
}

TEST_CASE("per-split transform files are merged") {
  const fs::path dir = write_scene("splits");
  auto j = read_json(dir / "transforms.json");
  nlohmann::json train = j, val = j;
  train["frames"] = nlohmann::json::array();
  val["frames"] = nlohmann::json::array();
  for (auto& f : j["frames"]) {
    const std::string split = f["split"];
    f.erase("split");
    (split == "train" ? train : val)["frames"].push_back(f);
  }
  fs::remove(dir / "transforms.json");
  write_json(dir / "transforms_train.json", train);
  write_json(dir / "transforms_val.json", val);
  const SceneDataset s = load_scene(dir);
  CHECK(s.size() == 6);
  CHECK(s.indices("val").size() == 2);
}
