// Copyright 2026 The stylenerf Authors
// SPDX-License-Identifier: Apache-2.0

#include "stylenerf/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "stylenerf/error.hpp"
#include "stylenerf/rng.hpp"

namespace stylenerf {

namespace {

// +x, -x, +y, -y, +z, -z; 8-bit values so saved scenes reload exactly.
constexpr float kFaceColors[6][3] = {
    {217 / 255.0f, 38 / 255.0f, 38 / 255.0f},  {26 / 255.0f, 179 / 255.0f, 191 / 255.0f},
    {51 / 255.0f, 191 / 255.0f, 64 / 255.0f},  {191 / 255.0f, 51 / 255.0f, 179 / 255.0f},
    {242 / 255.0f, 204 / 255.0f, 38 / 255.0f}, {51 / 255.0f, 64 / 255.0f, 204 / 255.0f},
};

// Rounds to 8-bit levels so a PNG round trip is exact.
Image quantize8(Image img) {
  for (float& v : img.rgb) v = std::round(std::clamp(v, 0.0f, 1.0f) * 255.0f) / 255.0f;
  return img;
}

std::string frame_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "r_%03d", i);
  return buf;
}

}  // namespace

bool cube_hit(const Ray& ray, double h, float rgb[3]) {
  double t_in = -1e30, t_out = 1e30;
  int face = -1;
  for (int a = 0; a < 3; ++a) {
    const double o = ray.origin[a], d = ray.direction[a];
    if (std::abs(d) < 1e-12) {
      if (o < -h || o > h) return false;
      continue;
    }
    double t0 = (-h - o) / d, t1 = (h - o) / d;
    int f0 = 2 * a + 1, f1 = 2 * a;  // entering through -a face when d > 0
    if (t0 > t1) {
      std::swap(t0, t1);
      std::swap(f0, f1);
    }
    if (t0 > t_in) {
      t_in = t0;
      face = f0;
    }
    t_out = std::min(t_out, t1);
  }
  if (t_in > t_out || t_in < ray.near || t_in > ray.far || face < 0) return false;
  for (int c = 0; c < 3; ++c) rgb[c] = kFaceColors[face][c];
  return true;
}

SceneDataset make_cube_scene(const CubeSceneConfig& cfg) {
  require(cfg.train_views >= 1 && cfg.val_views >= 0, "cube scene: need at least one training view");
  require(cfg.size >= 8, "cube scene: size must be >= 8");
  require(cfg.radius > std::sqrt(3.0) * cfg.half_extent, "cube scene: camera inside the cube");
  Rng rng(cfg.seed);
  SceneDataset scene;
  scene.near = 2.0;
  scene.far = 6.0;
  scene.background = {1.0f, 1.0f, 1.0f};
  const double focal = focal_from_fov(cfg.fov_x, cfg.size);
  const int total = cfg.train_views + cfg.val_views;
  for (int i = 0; i < total; ++i) {
    const bool train = i < cfg.train_views;
    const int k = train ? i : i - cfg.train_views;
    const int n = train ? cfg.train_views : cfg.val_views;
    const double azimuth = 360.0 * (k + (train ? 0.0 : 0.5)) / n + rng.uniform(-5.0, 5.0);
    const double elevation = rng.uniform(cfg.min_elevation, cfg.max_elevation);
    const CameraPose pose = orbit_pose(azimuth, elevation, cfg.radius, focal, cfg.size, cfg.size);
    Image img(cfg.size, cfg.size);
    img.alpha.assign(img.pixels(), 0.0f);
    const auto rays = generate_rays(pose, scene.near, scene.far);
    for (std::size_t p = 0; p < rays.size(); ++p) {
      float rgb[3];
      if (cube_hit(rays[p], cfg.half_extent, rgb)) {
        for (int c = 0; c < 3; ++c) img.rgb[3 * p + c] = rgb[c];
        img.alpha[p] = 1.0f;
      } else {
        for (int c = 0; c < 3; ++c) img.rgb[3 * p + c] = scene.background[c];
      }
    }
    scene.frame_ids.push_back(frame_name(i));
    scene.splits.push_back(train ? "train" : "val");
    scene.poses.push_back(pose);
    scene.images.push_back(std::move(img));
  }
  scene.validate();
  return scene;
}

Image make_style_image(int index, int size, std::uint64_t seed) {
  require(size >= 8, "style image: size must be >= 8");
  Rng rng(seed * 7919 + static_cast<std::uint64_t>(index));
  static const float palettes[4][2][3] = {
      {{0.95f, 0.55f, 0.10f}, {0.10f, 0.20f, 0.60f}},
      {{0.55f, 0.10f, 0.65f}, {0.95f, 0.90f, 0.30f}},
      {{0.10f, 0.55f, 0.25f}, {0.85f, 0.15f, 0.20f}},
      {{0.15f, 0.15f, 0.15f}, {0.90f, 0.90f, 0.85f}},
  };
  const auto& pal = palettes[index % 4];
  const double period = 4.0 + 4.0 * rng.uniform();
  Image img(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      double t = 0.0;
      switch (index % 4) {
        case 0: t = 0.5 + 0.5 * std::sin(2.0 * M_PI * (x + y) / period); break;
        case 1: t = ((x / static_cast<int>(period)) + (y / static_cast<int>(period))) % 2; break;
        case 2: {
          const double r = std::hypot(x - size / 2.0, y - size / 2.0);
          t = 0.5 + 0.5 * std::cos(2.0 * M_PI * r / period);
          break;
        }
        default: t = rng.uniform() < 0.5 ? 0.0 : 1.0; break;
      }
      const double noise = 0.08 * (rng.uniform() - 0.5);
      for (int c = 0; c < 3; ++c) {
        const double v = (1.0 - t) * pal[0][c] + t * pal[1][c] + noise;
        img.at(x, y, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return quantize8(std::move(img));
}

std::vector<Image> make_style_images(int count, int size, std::uint64_t seed) {
  std::vector<Image> out;
  for (int i = 0; i < count; ++i) out.push_back(make_style_image(i, size, seed));
  return out;
}

std::vector<Image> make_content_images(int count, int size, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Image> out;
  for (int i = 0; i < count; ++i) {
    Image img(size, size);
    float base[3];
    for (float& b : base) b = rng.uniform_f();
    for (std::size_t p = 0; p < img.pixels(); ++p)
      for (int c = 0; c < 3; ++c) img.rgb[3 * p + c] = base[c];
    const int blobs = 3 + static_cast<int>(rng.below(5));
    for (int b = 0; b < blobs; ++b) {
      const double cx = rng.uniform(0, size), cy = rng.uniform(0, size);
      const double radius = rng.uniform(0.1, 0.4) * size;
      float col[3];
      for (float& c : col) c = rng.uniform_f();
      for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
          const double d2 = ((x - cx) * (x - cx) + (y - cy) * (y - cy)) / (radius * radius);
          const float w = static_cast<float>(std::exp(-d2));
          for (int c = 0; c < 3; ++c) img.at(x, y, c) = (1 - w) * img.at(x, y, c) + w * col[c];
        }
      }
    }
    out.push_back(quantize8(std::move(img)));
  }
  return out;
}

}  // namespace stylenerf
