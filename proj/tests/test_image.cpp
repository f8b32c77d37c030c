// Copyright 2026 The stylenerf Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "stylenerf/error.hpp"
#include "stylenerf/image.hpp"
#include "stylenerf/rng.hpp"

using namespace stylenerf;
namespace fs = std::filesystem;

namespace {

Image quantized_image(int w, int h, std::uint64_t seed, bool alpha) {
  Rng rng(seed);
  Image img(w, h);
  for (float& v : img.rgb) v = static_cast<float>(rng.below(256)) / 255.0f;
  if (alpha) {
    img.alpha.resize(img.pixels());
    for (float& a : img.alpha) a = static_cast<float>(rng.below(256)) / 255.0f;
  }
  return img;
}

fs::path temp_dir(const char* name) {
  const fs::path p = fs::temp_directory_path() / ("stylenerf_test_image_" + std::string(name));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("png round trip is exact for 8-bit values") {
  for (bool alpha : {false, true}) {
    const Image img = quantized_image(13, 7, 1, alpha);
    const Image back = decode_png(encode_png(img));
    CHECK(back.width == 13);
    CHECK(back.height == 7);
    CHECK(back.rgb == img.rgb);
    CHECK(back.alpha == img.alpha);
  }
}

TEST_CASE("png bytes depend only on pixels") {
  const Image img = quantized_image(8, 8, 2, false);
  CHECK(encode_png(img) == encode_png(img));
}

TEST_CASE("save and load through the filesystem") {
  const fs::path dir = temp_dir("save");
  const Image img = quantized_image(9, 5, 3, true);
  save_png(img, dir / "a.png");
  const Image back = load_image(dir / "a.png");
  CHECK(back.rgb == img.rgb);
  CHECK(back.alpha == img.alpha);
  CHECK_THROWS_AS(load_image(dir / "missing.png"), IoError);
  std::ofstream(dir / "junk.png") << "not an image";
  try {
    load_image(dir / "junk.png");
    FAIL("expected an error");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("junk.png") != std::string::npos);
  }
}

TEST_CASE("composite over a background") {
  Image img(1, 1);
  img.rgb = {1.0f, 0.0f, 0.5f};
  img.alpha = {0.25f};
  const Image out = composite_over(img, {0.0f, 1.0f, 1.0f});
  CHECK_FALSE(out.has_alpha());
  CHECK(out.rgb[0] == doctest::Approx(0.25));
  CHECK(out.rgb[1] == doctest::Approx(0.75));
  CHECK(out.rgb[2] == doctest::Approx(0.875));
}

TEST_CASE("resize, crop and mirror") {
  const Image img = quantized_image(6, 4, 4, false);
  const Image same = resize_bilinear(img, 6, 4);
  for (std::size_t i = 0; i < img.rgb.size(); ++i) CHECK(same.rgb[i] == doctest::Approx(img.rgb[i]));
  Image flat(5, 5, 0.3f);
  const Image big = resize_bilinear(flat, 17, 11);
  for (float v : big.rgb) CHECK(v == doctest::Approx(0.3f));
  const Image shorter = resize_shorter_side(img, 8);
  CHECK(shorter.height == 8);
  CHECK(shorter.width == 12);
  const Image c = crop(img, 1, 2, 3, 2);
  CHECK(c.width == 3);
  CHECK(c.at(0, 0, 1) == img.at(1, 2, 1));
  CHECK(c.at(2, 1, 2) == img.at(3, 3, 2));
  const Image m = mirror_horizontal(img);
  CHECK(m.at(0, 1, 0) == img.at(5, 1, 0));
  CHECK(mirror_horizontal(m).rgb == img.rgb);
}

TEST_CASE("error metrics") {
  Image a(2, 1, 0.0f), b(2, 1, 0.0f);
  b.rgb = {0.1f, 0.1f, 0.1f, 0.3f, 0.3f, 0.3f};
  CHECK(mean_absolute_error(a, b) == doctest::Approx(0.2));
  CHECK(mean_squared_error(a, b) == doctest::Approx((0.01 + 0.09) / 2));
  CHECK(psnr_from_mse(0.01) == doctest::Approx(20.0));
  CHECK(psnr_from_mse(1e-4) == doctest::Approx(40.0));
}
