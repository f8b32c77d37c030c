// Copyright 2026 The stylenerf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "stylenerf/conv.hpp"

namespace stylenerf {

// RGB in [0, 1], interleaved row-major (HWC). `alpha` is empty or one value per pixel.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<float> rgb;
  std::vector<float> alpha;

  Image() = default;
  Image(int w, int h, float fill = 0.0f)
      : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, fill) {}

  std::size_t pixels() const { return static_cast<std::size_t>(width) * height; }
  bool has_alpha() const { return !alpha.empty(); }
  float& at(int x, int y, int c) { return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  float at(int x, int y, int c) const { return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
};

// PNG or JPEG by content. 8-bit values map to [0, 1] by /255 with no gamma
// transform. Throws IoError naming the file on failure.
Image load_image(const std::filesystem::path& path);

// 8-bit RGB PNG, RGBA when the image has alpha. Output bytes depend only on the pixels.
std::vector<std::uint8_t> encode_png(const Image& image);
Image decode_png(const std::vector<std::uint8_t>& bytes);
void save_png(const Image& image, const std::filesystem::path& path);

// Blends onto a solid background using alpha and drops the alpha channel.
Image composite_over(const Image& image, const std::array<float, 3>& background);

Image resize_bilinear(const Image& image, int width, int height);
Image resize_shorter_side(const Image& image, int shorter);
Image crop(const Image& image, int x0, int y0, int width, int height);
Image mirror_horizontal(const Image& image);
Image clamp01(Image image);

FeatureMap to_feature_map(const Image& image);
Image from_feature_map(const FeatureMap& map);  // values clamped to [0, 1]

double mean_absolute_error(const Image& a, const Image& b);
double mean_squared_error(const Image& a, const Image& b);
double psnr_from_mse(double mse);

}  // namespace stylenerf
