// Copyright 2026 The stylenerf Authors
// SPDX-License-Identifier: Apache-2.0

#include "stylenerf/dataset.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "stylenerf/checkpoint.hpp"
#include "stylenerf/error.hpp"

namespace stylenerf {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<int> SceneDataset::indices(const std::string& split) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < splits.size(); ++i)
    if (splits[i] == split) out.push_back(static_cast<int>(i));
  return out;
}

SceneDataset SceneDataset::subset(const std::string& split) const {
  SceneDataset out;
  out.near = near;
  out.far = far;
  out.background = background;
  for (int i : indices(split)) {
    out.frame_ids.push_back(frame_ids[i]);
    out.splits.push_back(splits[i]);
    out.poses.push_back(poses[i]);
    out.images.push_back(images[i]);
  }
  return out;
}

void SceneDataset::validate() const {
  require(images.size() == poses.size() && images.size() == frame_ids.size() && images.size() == splits.size(),
          "scene: images, poses, ids and splits must have the same length");
  require(near >= 0.0 && far > near, "scene: need 0 <= near < far");
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::string frame = "frame '" + frame_ids[i] + "'";
    require(images[i].width == width() && images[i].height == height(),
            frame + ": image is " + std::to_string(images[i].width) + "x" + std::to_string(images[i].height) +
                ", expected " + std::to_string(width()) + "x" + std::to_string(height()));
    require(poses[i].width == images[i].width && poses[i].height == images[i].height,
            frame + ": pose intrinsics do not match the image size");
    try {
      poses[i].validate();
    } catch (const ValidationError& e) {
      throw ValidationError(frame + ": " + e.what());
    }
  }
}

namespace {

std::vector<json> read_frames(const fs::path& dir, json& meta) {
  auto read_json = [](const fs::path& p) {
    std::ifstream f(p);
    if (!f) throw IoError("cannot read " + p.string());
    try {
      return json::parse(f);
    } catch (const json::exception& e) {
      throw ValidationError(p.string() + ": malformed JSON: " + e.what());
    }
  };
  std::vector<json> frames;
  if (fs::exists(dir / "transforms.json")) {
    meta = read_json(dir / "transforms.json");
    if (!meta.contains("frames") || !meta["frames"].is_array())
      throw ValidationError("transforms.json: missing 'frames' array");
    for (auto& f : meta["frames"]) frames.push_back(f);
    return frames;
  }
  bool any = false;
  for (const std::string split : {"train", "val", "test"}) {
    const fs::path p = dir / ("transforms_" + split + ".json");
    if (!fs::exists(p)) continue;
    json m = read_json(p);
    if (!any) meta = m;
    any = true;
    for (auto f : m.value("frames", json::array())) {
      if (!f.contains("split")) f["split"] = split;
      frames.push_back(f);
    }
  }
  if (!any) throw IoError("scene directory " + dir.string() + " has no transforms.json");
  return frames;
}

fs::path resolve_image(const fs::path& dir, const std::string& file_path) {
  const fs::path base = dir / file_path;
  if (base.has_extension() && fs::exists(base)) return base;
  for (const char* ext : {".png", ".jpg", ".jpeg", ".PNG", ".JPG"}) {
    fs::path p = base;
    p += ext;
    if (fs::exists(p)) return p;
  }
  return {};
}

}  // namespace

SceneDataset load_scene(const fs::path& dir, const SceneOptions& options) {
  if (!fs::is_directory(dir)) throw IoError("scene directory not found: " + dir.string());
  json meta;
  const std::vector<json> frames = read_frames(dir, meta);
  require(!frames.empty(), "transforms.json lists no frames");
  require(meta.contains("camera_angle_x") && meta["camera_angle_x"].is_number(),
          "transforms.json: missing numeric 'camera_angle_x'");
  const double fov = meta["camera_angle_x"].get<double>();
  require(fov > 0.0 && fov < M_PI, "transforms.json: camera_angle_x must lie in (0, pi)");

  SceneDataset scene;
  scene.near = options.near.value_or(meta.value("near", options.default_near));
  scene.far = options.far.value_or(meta.value("far", options.default_far));

  for (std::size_t i = 0; i < frames.size(); ++i) {
    const json& f = frames[i];
    const std::string file = f.value("file_path", std::string());
    const std::string id = file.empty() ? "#" + std::to_string(i) : fs::path(file).stem().string();
    const std::string frame = "frame '" + id + "'";
    require(!file.empty(), frame + ": missing file_path");
    const fs::path image_path = resolve_image(dir, file);
    if (image_path.empty()) throw IoError(frame + ": image " + (dir / file).string() + "[.png|.jpg] not found");

    require(f.contains("transform_matrix") && f["transform_matrix"].is_array() && f["transform_matrix"].size() == 4,
            frame + ": transform_matrix must be 4x4");
    Mat4 m;
    for (int r = 0; r < 4; ++r) {
      const json& row = f["transform_matrix"][r];
      require(row.is_array() && row.size() == 4, frame + ": transform_matrix must be 4x4");
      for (int c = 0; c < 4; ++c) {
        require(row[c].is_number(), frame + ": transform_matrix has a non-numeric entry");
        m(r, c) = row[c].get<double>();
      }
    }
    Image img;
    try {
      img = load_image(image_path);
    } catch (const std::exception& e) {
      throw IoError(frame + ": " + e.what());
    }
    const CameraPose pose = CameraPose::from_matrix(m, focal_from_fov(fov, img.width), img.height, img.width);
    try {
      pose.validate();
    } catch (const ValidationError& e) {
      throw ValidationError(frame + ": " + e.what());
    }
    scene.frame_ids.push_back(id);
    scene.splits.push_back(f.value("split", std::string("train")));
    scene.poses.push_back(pose);
    scene.images.push_back(std::move(img));
  }

  if (scene.has_alpha()) scene.background = {1.0f, 1.0f, 1.0f};
  for (std::size_t i = 0; i < scene.images.size(); ++i) {
    Image& img = scene.images[i];
    require(img.has_alpha() == scene.has_alpha(), "frame '" + scene.frame_ids[i] + "': alpha channel presence differs from the first frame");
    std::vector<float> alpha = std::move(img.alpha);
    img = composite_over(Image{img}, scene.background);
    img.alpha = std::move(alpha);
  }
  scene.validate();
  return scene;
}

void save_scene(const SceneDataset& scene, const fs::path& dir) {
  scene.validate();
  require(!scene.images.empty(), "save_scene: empty scene");
  const CameraPose& p0 = scene.poses.front();
  json meta;
  meta["camera_angle_x"] = 2.0 * std::atan(0.5 * p0.width / p0.focal);
  meta["near"] = scene.near;
  meta["far"] = scene.far;
  meta["frames"] = json::array();
  for (std::size_t i = 0; i < scene.size(); ++i) {
    const Mat4 m = scene.poses[i].matrix();
    json rows = json::array();
    for (int r = 0; r < 4; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2), m(r, 3)});
    meta["frames"].push_back(
        {{"file_path", "images/" + scene.frame_ids[i]}, {"split", scene.splits[i]}, {"transform_matrix", rows}});
    save_png(scene.images[i], dir / "images" / (scene.frame_ids[i] + ".png"));
  }
  write_file_atomic(dir / "transforms.json", meta.dump(2) + "\n");
}

}  // namespace stylenerf
