// Copyright 2026 The stylenerf Authors
// SPDX-License-Identifier: Apache-2.0

#include "stylenerf/image.hpp"

#include <png.h>
// jpeglib.h needs FILE and size_t declared first.
#include <cstdio>
#include <jpeglib.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <iterator>

#include "stylenerf/error.hpp"

namespace stylenerf {

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint8_t to_byte(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

struct PngReader {
  const std::vector<std::uint8_t>* bytes;
  std::size_t offset = 0;
};

void png_read_cb(png_structp png, png_bytep out, png_size_t len) {
  auto* r = static_cast<PngReader*>(png_get_io_ptr(png));
  if (r->offset + len > r->bytes->size()) png_error(png, "truncated PNG data");
  std::memcpy(out, r->bytes->data() + r->offset, len);
  r->offset += len;
}

void png_write_cb(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + len);
}

void png_flush_cb(png_structp) {}

Image decode_jpeg(const std::vector<std::uint8_t>& bytes, const std::string& name) {
  struct ErrorMgr {
    jpeg_error_mgr base;
    std::jmp_buf jump;
  };
  jpeg_decompress_struct cinfo{};
  ErrorMgr err{};
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = [](j_common_ptr c) { std::longjmp(reinterpret_cast<ErrorMgr*>(c->err)->jump, 1); };
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw IoError("corrupt JPEG '" + name + "'");
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  Image img(static_cast<int>(cinfo.output_width), static_cast<int>(cinfo.output_height));
  std::vector<std::uint8_t> row(static_cast<std::size_t>(img.width) * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    const int y = static_cast<int>(cinfo.output_scanline);
    JSAMPROW rows[1] = {row.data()};
    jpeg_read_scanlines(&cinfo, rows, 1);
    for (int i = 0; i < img.width * 3; ++i) img.rgb[static_cast<std::size_t>(y) * img.width * 3 + i] = row[i] / 255.0f;
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return img;
}

Image decode_png_named(const std::vector<std::uint8_t>& bytes, const std::string& name) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw IoError("not a PNG file '" + name + "'");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (png == nullptr || info == nullptr) throw IoError("libpng allocation failed");
  std::vector<png_bytep> rows;
  std::vector<std::uint8_t> buffer;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("corrupt PNG '" + name + "'");
  }
  PngReader reader{&bytes, 0};
  png_set_read_fn(png, &reader, png_read_cb);
  png_read_info(png, info);
  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int channels = png_get_channels(png, info);
  buffer.resize(static_cast<std::size_t>(w) * h * channels);
  rows.resize(h);
  for (int y = 0; y < h; ++y) rows[y] = buffer.data() + static_cast<std::size_t>(y) * w * channels;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  Image img(w, h);
  if (channels == 4) img.alpha.resize(img.pixels());
  for (std::size_t p = 0; p < img.pixels(); ++p) {
    for (int c = 0; c < 3; ++c) img.rgb[3 * p + c] = buffer[p * channels + c] / 255.0f;
    if (channels == 4) img.alpha[p] = buffer[p * channels + 3] / 255.0f;
  }
  return img;
}

}  // namespace

Image load_image(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF) {
    return decode_jpeg(bytes, path.string());
  }
  return decode_png_named(bytes, path.string());
}

Image decode_png(const std::vector<std::uint8_t>& bytes) { return decode_png_named(bytes, "<memory>"); }

std::vector<std::uint8_t> encode_png(const Image& image) {
  require(image.width > 0 && image.height > 0, "encode_png: empty image");
  std::vector<std::uint8_t> out;
  const int channels = image.has_alpha() ? 4 : 3;
  std::vector<std::uint8_t> row(static_cast<std::size_t>(image.width) * channels);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (png == nullptr || info == nullptr) throw IoError("libpng allocation failed");
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG encoding failed");
  }
  png_set_write_fn(png, &out, png_write_cb, png_flush_cb);
  png_set_IHDR(png, info, image.width, image.height, 8,
               channels == 4 ? PNG_COLOR_TYPE_RGB_ALPHA : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 6);
  png_write_info(png, info);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * image.width + x;
      for (int c = 0; c < 3; ++c) row[x * channels + c] = to_byte(image.rgb[3 * p + c]);
      if (channels == 4) row[x * channels + 3] = to_byte(image.alpha[p]);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

void save_png(const Image& image, const std::filesystem::path& path) {
  const auto bytes = encode_png(image);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to '" + path.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

Image composite_over(const Image& image, const std::array<float, 3>& background) {
  Image out(image.width, image.height);
  for (std::size_t p = 0; p < image.pixels(); ++p) {
    const float a = image.has_alpha() ? image.alpha[p] : 1.0f;
    for (int c = 0; c < 3; ++c) out.rgb[3 * p + c] = a * image.rgb[3 * p + c] + (1.0f - a) * background[c];
  }
  return out;
}

Image resize_bilinear(const Image& image, int width, int height) {
  require(width > 0 && height > 0, "resize: target size must be positive");
  Image out(width, height);
  if (image.has_alpha()) out.alpha.resize(out.pixels());
  const double sx = static_cast<double>(image.width) / width;
  const double sy = static_cast<double>(image.height) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, image.height - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, image.height - 1);
    const float ty = static_cast<float>(fy - y0);
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, image.width - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, image.width - 1);
      const float tx = static_cast<float>(fx - x0);
      auto lerp2 = [&](auto get) {
        const float top = get(x0, y0) * (1 - tx) + get(x1, y0) * tx;
        const float bottom = get(x0, y1) * (1 - tx) + get(x1, y1) * tx;
        return top * (1 - ty) + bottom * ty;
      };
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = lerp2([&](int px, int py) { return image.at(px, py, c); });
      if (image.has_alpha()) {
        out.alpha[static_cast<std::size_t>(y) * width + x] =
            lerp2([&](int px, int py) { return image.alpha[static_cast<std::size_t>(py) * image.width + px]; });
      }
    }
  }
  return out;
}

Image resize_shorter_side(const Image& image, int shorter) {
  if (image.width <= image.height) {
    const int h = static_cast<int>(std::lround(static_cast<double>(image.height) * shorter / image.width));
    return resize_bilinear(image, shorter, h);
  }
  const int w = static_cast<int>(std::lround(static_cast<double>(image.width) * shorter / image.height));
  return resize_bilinear(image, w, shorter);
}

Image crop(const Image& image, int x0, int y0, int width, int height) {
  require(x0 >= 0 && y0 >= 0 && x0 + width <= image.width && y0 + height <= image.height,
          "crop: window outside the image");
  Image out(width, height);
  if (image.has_alpha()) out.alpha.resize(out.pixels());
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = image.at(x0 + x, y0 + y, c);
      if (image.has_alpha()) {
        out.alpha[static_cast<std::size_t>(y) * width + x] =
            image.alpha[static_cast<std::size_t>(y0 + y) * image.width + x0 + x];
      }
    }
  }
  return out;
}

Image mirror_horizontal(const Image& image) {
  Image out = image;
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = image.at(image.width - 1 - x, y, c);
  if (image.has_alpha()) {
    for (int y = 0; y < image.height; ++y)
      for (int x = 0; x < image.width; ++x)
        out.alpha[static_cast<std::size_t>(y) * image.width + x] =
            image.alpha[static_cast<std::size_t>(y) * image.width + image.width - 1 - x];
  }
  return out;
}

Image clamp01(Image image) {
  for (float& v : image.rgb) v = std::clamp(v, 0.0f, 1.0f);
  return image;
}

FeatureMap to_feature_map(const Image& image) {
  FeatureMap m(3, image.height, image.width);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < 3; ++c) m.at(c, y, x) = image.at(x, y, c);
  return m;
}

Image from_feature_map(const FeatureMap& map) {
  require(map.channels == 3, "from_feature_map: need 3 channels");
  Image img(map.width, map.height);
  for (int y = 0; y < map.height; ++y)
    for (int x = 0; x < map.width; ++x)
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = std::clamp(map.at(c, y, x), 0.0f, 1.0f);
  return img;
}

double mean_absolute_error(const Image& a, const Image& b) {
  require(a.width == b.width && a.height == b.height, "mae: image sizes differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.rgb.size(); ++i) s += std::abs(static_cast<double>(a.rgb[i]) - b.rgb[i]);
  return s / static_cast<double>(a.rgb.size());
}

double mean_squared_error(const Image& a, const Image& b) {
  require(a.width == b.width && a.height == b.height, "mse: image sizes differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.rgb.size(); ++i) {
    const double d = static_cast<double>(a.rgb[i]) - b.rgb[i];
    s += d * d;
  }
  return s / static_cast<double>(a.rgb.size());
}

double psnr_from_mse(double mse) { return -10.0 * std::log10(std::max(mse, 1e-12)); }

}  // namespace stylenerf
