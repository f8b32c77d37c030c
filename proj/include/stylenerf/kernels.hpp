// Copyright 2026 The stylenerf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Data-parallel inner loops. Every kernel exists twice: `serial` is a plain
// reference written straight from the formula and is what the tests trust;
// `parallel` is the OpenMP version the library calls. Tests compare the two
// and tools/bench_kernels.cpp times them.
//
// Layout conventions: per-ray arrays are ray-major (ray * num_samples + i);
// colors hold 3 consecutive channels per sample; feature maps are CHW.

#include <concepts>
#include <span>

namespace stylenerf::kernels {

struct ConvShape {
  int channels = 0;
  int height = 0;
  int width = 0;
  int kernel = 3;  // odd; padding is kernel / 2, reflected
};

namespace serial {

template <std::floating_point T>
void composite_forward(int num_rays, int num_samples, std::span<const T> sigmas,
                       std::span<const T> deltas, std::span<const T> colors, std::span<T> weights,
                       std::span<T> transmittance, std::span<T> rgb, std::span<T> opacity);

template <std::floating_point T>
void composite_backward(int num_rays, int num_samples, std::span<const T> sigmas,
                        std::span<const T> deltas, std::span<const T> colors,
                        std::span<const T> grad_rgb, std::span<const T> grad_opacity,
                        std::span<T> grad_sigmas, std::span<T> grad_colors);

// input: dims x count column-major; output: (2 * levels * dims) x count.
void positional_encode(int dims, int count, int levels, std::span<const float> input,
                       std::span<float> output);

// columns: (channels * kernel^2) x (height * width), row-major.
void im2col_reflect(const ConvShape& shape, std::span<const float> image, std::span<float> columns);
// Adjoint of im2col_reflect; accumulates into image.
void col2im_reflect(const ConvShape& shape, std::span<const float> columns, std::span<float> image);

// Per-channel mean and population standard deviation.
void channel_moments(int channels, int pixels, std::span<const float> values,
                     std::span<float> mean, std::span<float> stddev);

}  // namespace serial

namespace parallel {

template <std::floating_point T>
void composite_forward(int num_rays, int num_samples, std::span<const T> sigmas,
                       std::span<const T> deltas, std::span<const T> colors, std::span<T> weights,
                       std::span<T> transmittance, std::span<T> rgb, std::span<T> opacity);

template <std::floating_point T>
void composite_backward(int num_rays, int num_samples, std::span<const T> sigmas,
                        std::span<const T> deltas, std::span<const T> colors,
                        std::span<const T> grad_rgb, std::span<const T> grad_opacity,
                        std::span<T> grad_sigmas, std::span<T> grad_colors);

// input: dims x count column-major; output: (2 * levels * dims) x count.
void positional_encode(int dims, int count, int levels, std::span<const float> input,
                       std::span<float> output);

// columns: (channels * kernel^2) x (height * width), row-major.
void im2col_reflect(const ConvShape& shape, std::span<const float> image, std::span<float> columns);
// Adjoint of im2col_reflect; accumulates into image.
void col2im_reflect(const ConvShape& shape, std::span<const float> columns, std::span<float> image);

// Per-channel mean and population standard deviation.
void channel_moments(int channels, int pixels, std::span<const float> values,
                     std::span<float> mean, std::span<float> stddev);

}  // namespace parallel

// Reflect-101 index (no edge repeat), valid for |overhang| < n.
constexpr int reflect_index(int i, int n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * n - 2 - i;
  return i;
}

}  // namespace stylenerf::kernels
