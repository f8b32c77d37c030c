// Copyright 2026 The stylenerf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Posed image collections on disk:
//
//   scene/
//     images/<frame>.png
//     transforms.json   {"camera_angle_x": rad, "near": 2, "far": 6,
//                        "frames": [{"file_path": "images/<frame>", "split": "train",
//                                    "transform_matrix": [[4x4 camera-to-world]]}, ...]}
//
// Blender-style per-split files (transforms_train.json, transforms_val.json,
// transforms_test.json) are accepted when transforms.json is absent.

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "stylenerf/geometry.hpp"
#include "stylenerf/image.hpp"

namespace stylenerf {

struct SceneDataset {
  std::vector<std::string> frame_ids;
  std::vector<std::string> splits;  // "train", "val" or "test"
  std::vector<CameraPose> poses;
  // Composited onto `background`; alpha (if any) kept alongside.
  std::vector<Image> images;
  double near = 2.0;
  double far = 6.0;
  std::array<float, 3> background{0.0f, 0.0f, 0.0f};

  std::size_t size() const { return images.size(); }
  int width() const { return images.empty() ? 0 : images.front().width; }
  int height() const { return images.empty() ? 0 : images.front().height; }
  bool has_alpha() const { return !images.empty() && images.front().has_alpha(); }
  std::vector<int> indices(const std::string& split) const;
  SceneDataset subset(const std::string& split) const;
  // Throws ValidationError naming the offending frame.
  void validate() const;
};

struct SceneOptions {
  std::optional<double> near;  // override transforms.json / defaults
  std::optional<double> far;
  double default_near = 2.0;
  double default_far = 6.0;
};

SceneDataset load_scene(const std::filesystem::path& dir, const SceneOptions& options = {});

// Writes images/<id>.png (RGBA when alpha is present) and transforms.json.
void save_scene(const SceneDataset& scene, const std::filesystem::path& dir);

}  // namespace stylenerf
