// Copyright 2026 The stylenerf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Procedural data for tests, benchmarks and desk-scale runs: a colored cube
// seen from an orbit, and small style/content images.

#include <cstdint>
#include <vector>

#include "stylenerf/dataset.hpp"
#include "stylenerf/image.hpp"

namespace stylenerf {

struct CubeSceneConfig {
  int train_views = 20;
  int val_views = 5;
  int size = 64;
  double half_extent = 0.8;
  double radius = 4.0;
  double fov_x = 0.6911112070083618;  // radians
  double min_elevation = 10.0;        // degrees
  double max_elevation = 50.0;
  std::uint64_t seed = 0;
};

// Exactly rendered (one ray per pixel center) RGBA views, composited onto
// white; frame ids r_000, r_001, ... with "train" frames first.
SceneDataset make_cube_scene(const CubeSceneConfig& config = {});

// The cube's color along one ray, or nothing on a miss.
bool cube_hit(const Ray& ray, double half_extent, float rgb[3]);

// Stripes, checkers and rings with distinct palettes; index selects the pattern.
Image make_style_image(int index, int size, std::uint64_t seed);
std::vector<Image> make_style_images(int count, int size, std::uint64_t seed);
// Smooth random blobs, a stand-in for photographs.
std::vector<Image> make_content_images(int count, int size, std::uint64_t seed);

}  // namespace stylenerf
