// Copyright 2026 The stylenerf Authors
// SPDX-License-Identifier: Apache-2.0

#include "stylenerf/kernels.hpp"

#include <cmath>
#include <cstddef>
#include <vector>

namespace stylenerf::kernels {

namespace serial {

// T_i = exp(-sum_{j<i} sigma_j delta_j), w_i = T_i (1 - exp(-sigma_i delta_i)).
template <std::floating_point T>
void composite_forward(int num_rays, int num_samples, std::span<const T> sigmas,
                       std::span<const T> deltas, std::span<const T> colors, std::span<T> weights,
                       std::span<T> transmittance, std::span<T> rgb, std::span<T> opacity) {
  for (int r = 0; r < num_rays; ++r) {
    const std::size_t base = static_cast<std::size_t>(r) * num_samples;
    T c[3] = {0, 0, 0};
    T acc = 0;
    for (int i = 0; i < num_samples; ++i) {
      T depth = 0;
      for (int j = 0; j < i; ++j) depth += sigmas[base + j] * deltas[base + j];
      const T trans = std::exp(-depth);
      const T w = trans * (T(1) - std::exp(-sigmas[base + i] * deltas[base + i]));
      transmittance[base + i] = trans;
      weights[base + i] = w;
      for (int k = 0; k < 3; ++k) c[k] += w * colors[3 * (base + i) + k];
      acc += w;
    }
    for (int k = 0; k < 3; ++k) rgb[3 * r + k] = c[k];
    opacity[r] = acc;
  }
}

// d rgb / d sigma_k = delta_k (T_{k+1} c_k - sum_{i>k} w_i c_i)
// d acc / d sigma_k = delta_k T_{N+1}
template <std::floating_point T>
void composite_backward(int num_rays, int num_samples, std::span<const T> sigmas,
                        std::span<const T> deltas, std::span<const T> colors,
                        std::span<const T> grad_rgb, std::span<const T> grad_opacity,
                        std::span<T> grad_sigmas, std::span<T> grad_colors) {
  const std::size_t n = static_cast<std::size_t>(num_rays) * num_samples;
  std::vector<T> w(n), trans(n), rgb(3 * static_cast<std::size_t>(num_rays)), acc(num_rays);
  composite_forward<T>(num_rays, num_samples, sigmas, deltas, colors, w, trans, rgb, acc);
  for (int r = 0; r < num_rays; ++r) {
    const std::size_t base = static_cast<std::size_t>(r) * num_samples;
    T total_depth = 0;
    for (int j = 0; j < num_samples; ++j) total_depth += sigmas[base + j] * deltas[base + j];
    const T t_end = std::exp(-total_depth);
    for (int k = 0; k < num_samples; ++k) {
      const T t_next = trans[base + k] * std::exp(-sigmas[base + k] * deltas[base + k]);
      T g = 0;
      for (int ch = 0; ch < 3; ++ch) {
        T tail = 0;
        for (int i = k + 1; i < num_samples; ++i) tail += w[base + i] * colors[3 * (base + i) + ch];
        g += grad_rgb[3 * r + ch] * (t_next * colors[3 * (base + k) + ch] - tail);
        grad_colors[3 * (base + k) + ch] = grad_rgb[3 * r + ch] * w[base + k];
      }
      g += grad_opacity[r] * t_end;
      grad_sigmas[base + k] = deltas[base + k] * g;
    }
  }
}

void positional_encode(int dims, int count, int levels, std::span<const float> input,
                       std::span<float> output) {
  const int out_dim = 2 * levels * dims;
  for (int col = 0; col < count; ++col) {
    for (int l = 0; l < levels; ++l) {
      const double freq = std::ldexp(1.0, l);
      for (int d = 0; d < dims; ++d) {
        const double x = freq * static_cast<double>(input[static_cast<std::size_t>(col) * dims + d]);
        const std::size_t o = static_cast<std::size_t>(col) * out_dim + 2 * l * dims;
        output[o + d] = static_cast<float>(std::sin(x));
        output[o + dims + d] = static_cast<float>(std::cos(x));
      }
    }
  }
}

void im2col_reflect(const ConvShape& s, std::span<const float> image, std::span<float> columns) {
  const int pad = s.kernel / 2;
  const std::size_t hw = static_cast<std::size_t>(s.height) * s.width;
  for (int c = 0; c < s.channels; ++c) {
    for (int ky = 0; ky < s.kernel; ++ky) {
      for (int kx = 0; kx < s.kernel; ++kx) {
        const std::size_t row = (static_cast<std::size_t>(c) * s.kernel + ky) * s.kernel + kx;
        for (int y = 0; y < s.height; ++y) {
          for (int x = 0; x < s.width; ++x) {
            const int sy = reflect_index(y + ky - pad, s.height);
            const int sx = reflect_index(x + kx - pad, s.width);
            columns[row * hw + static_cast<std::size_t>(y) * s.width + x] =
                image[c * hw + static_cast<std::size_t>(sy) * s.width + sx];
          }
        }
      }
    }
  }
}

void col2im_reflect(const ConvShape& s, std::span<const float> columns, std::span<float> image) {
  const int pad = s.kernel / 2;
  const std::size_t hw = static_cast<std::size_t>(s.height) * s.width;
  for (int c = 0; c < s.channels; ++c) {
    for (int ky = 0; ky < s.kernel; ++ky) {
      for (int kx = 0; kx < s.kernel; ++kx) {
        const std::size_t row = (static_cast<std::size_t>(c) * s.kernel + ky) * s.kernel + kx;
        for (int y = 0; y < s.height; ++y) {
          for (int x = 0; x < s.width; ++x) {
            const int sy = reflect_index(y + ky - pad, s.height);
            const int sx = reflect_index(x + kx - pad, s.width);
            image[c * hw + static_cast<std::size_t>(sy) * s.width + sx] +=
                columns[row * hw + static_cast<std::size_t>(y) * s.width + x];
          }
        }
      }
    }
  }
}

void channel_moments(int channels, int pixels, std::span<const float> values,
                     std::span<float> mean, std::span<float> stddev) {
  for (int c = 0; c < channels; ++c) {
    const float* v = values.data() + static_cast<std::size_t>(c) * pixels;
    double sum = 0.0;
    for (int i = 0; i < pixels; ++i) sum += v[i];
    const double mu = sum / pixels;
    double sq = 0.0;
    for (int i = 0; i < pixels; ++i) sq += (v[i] - mu) * (v[i] - mu);
    mean[c] = static_cast<float>(mu);
    stddev[c] = static_cast<float>(std::sqrt(sq / pixels));
  }
}

template void composite_forward<float>(int, int, std::span<const float>, std::span<const float>,
                                       std::span<const float>, std::span<float>, std::span<float>,
                                       std::span<float>, std::span<float>);
template void composite_forward<double>(int, int, std::span<const double>, std::span<const double>,
                                        std::span<const double>, std::span<double>,
                                        std::span<double>, std::span<double>, std::span<double>);
template void composite_backward<float>(int, int, std::span<const float>, std::span<const float>,
                                        std::span<const float>, std::span<const float>,
                                        std::span<const float>, std::span<float>, std::span<float>);
template void composite_backward<double>(int, int, std::span<const double>,
                                         std::span<const double>, std::span<const double>,
                                         std::span<const double>, std::span<const double>,
                                         std::span<double>, std::span<double>);

}  // namespace serial

namespace parallel {

template <std::floating_point T>
void composite_forward(int num_rays, int num_samples, std::span<const T> sigmas,
                       std::span<const T> deltas, std::span<const T> colors, std::span<T> weights,
                       std::span<T> transmittance, std::span<T> rgb, std::span<T> opacity) {
#pragma omp parallel for schedule(static)
  for (int r = 0; r < num_rays; ++r) {
    const std::size_t base = static_cast<std::size_t>(r) * num_samples;
    T depth = 0;
    T c0 = 0, c1 = 0, c2 = 0, acc = 0;
    for (int i = 0; i < num_samples; ++i) {
      const std::size_t s = base + i;
      const T trans = std::exp(-depth);
      const T optical = sigmas[s] * deltas[s];
      const T w = -trans * std::expm1(-optical);
      transmittance[s] = trans;
      weights[s] = w;
      c0 += w * colors[3 * s];
      c1 += w * colors[3 * s + 1];
      c2 += w * colors[3 * s + 2];
      acc += w;
      depth += optical;
    }
    rgb[3 * r] = c0;
    rgb[3 * r + 1] = c1;
    rgb[3 * r + 2] = c2;
    opacity[r] = acc;
  }
}

template <std::floating_point T>
void composite_backward(int num_rays, int num_samples, std::span<const T> sigmas,
                        std::span<const T> deltas, std::span<const T> colors,
                        std::span<const T> grad_rgb, std::span<const T> grad_opacity,
                        std::span<T> grad_sigmas, std::span<T> grad_colors) {
#pragma omp parallel
  {
    std::vector<T> w(num_samples), depth_after(num_samples);
#pragma omp for schedule(static)
    for (int r = 0; r < num_rays; ++r) {
      const std::size_t base = static_cast<std::size_t>(r) * num_samples;
      T depth = 0;
      for (int i = 0; i < num_samples; ++i) {
        const T optical = sigmas[base + i] * deltas[base + i];
        w[i] = -std::exp(-depth) * std::expm1(-optical);
        depth += optical;
        depth_after[i] = depth;
      }
      const T g0 = grad_rgb[3 * r], g1 = grad_rgb[3 * r + 1], g2 = grad_rgb[3 * r + 2];
      const T g_acc_term = grad_opacity[r] * std::exp(-depth);
      // Suffix sum of g . (w_i c_i) over i > k, accumulated back to front.
      T tail = 0;
      for (int k = num_samples - 1; k >= 0; --k) {
        const std::size_t s = base + k;
        const T gc = g0 * colors[3 * s] + g1 * colors[3 * s + 1] + g2 * colors[3 * s + 2];
        grad_sigmas[s] = deltas[s] * (std::exp(-depth_after[k]) * gc - tail + g_acc_term);
        grad_colors[3 * s] = g0 * w[k];
        grad_colors[3 * s + 1] = g1 * w[k];
        grad_colors[3 * s + 2] = g2 * w[k];
        tail += w[k] * gc;
      }
    }
  }
}

void positional_encode(int dims, int count, int levels, std::span<const float> input,
                       std::span<float> output) {
  const int out_dim = 2 * levels * dims;
#pragma omp parallel for schedule(static)
  for (int col = 0; col < count; ++col) {
    const float* in = input.data() + static_cast<std::size_t>(col) * dims;
    float* out = output.data() + static_cast<std::size_t>(col) * out_dim;
    for (int d = 0; d < dims; ++d) {
      // Double-angle recurrence in double; drift after 16 doublings stays
      // below 1e-11, far under float resolution.
      double s = std::sin(static_cast<double>(in[d]));
      double c = std::cos(static_cast<double>(in[d]));
      for (int l = 0; l < levels; ++l) {
        out[2 * l * dims + d] = static_cast<float>(s);
        out[2 * l * dims + dims + d] = static_cast<float>(c);
        const double s2 = 2.0 * s * c;
        c = (c - s) * (c + s);
        s = s2;
      }
    }
  }
}

void im2col_reflect(const ConvShape& s, std::span<const float> image, std::span<float> columns) {
  const int pad = s.kernel / 2;
  const int taps = s.kernel * s.kernel;
  const std::size_t hw = static_cast<std::size_t>(s.height) * s.width;
  std::vector<int> src_x(static_cast<std::size_t>(s.kernel) * s.width);
  for (int kx = 0; kx < s.kernel; ++kx)
    for (int x = 0; x < s.width; ++x) src_x[kx * s.width + x] = reflect_index(x + kx - pad, s.width);
#pragma omp parallel for schedule(static)
  for (int row = 0; row < s.channels * taps; ++row) {
    const int c = row / taps;
    const int ky = (row % taps) / s.kernel;
    const int kx = row % s.kernel;
    const float* src = image.data() + c * hw;
    float* dst = columns.data() + static_cast<std::size_t>(row) * hw;
    const int* sx = src_x.data() + kx * s.width;
    for (int y = 0; y < s.height; ++y) {
      const float* src_row = src + static_cast<std::size_t>(reflect_index(y + ky - pad, s.height)) * s.width;
      float* dst_row = dst + static_cast<std::size_t>(y) * s.width;
      for (int x = 0; x < s.width; ++x) dst_row[x] = src_row[sx[x]];
    }
  }
}

void col2im_reflect(const ConvShape& s, std::span<const float> columns, std::span<float> image) {
  const int pad = s.kernel / 2;
  const int taps = s.kernel * s.kernel;
  const std::size_t hw = static_cast<std::size_t>(s.height) * s.width;
  std::vector<int> src_x(static_cast<std::size_t>(s.kernel) * s.width);
  for (int kx = 0; kx < s.kernel; ++kx)
    for (int x = 0; x < s.width; ++x) src_x[kx * s.width + x] = reflect_index(x + kx - pad, s.width);
  // Channels are independent; taps within a channel scatter into the same plane.
#pragma omp parallel for schedule(static)
  for (int c = 0; c < s.channels; ++c) {
    float* dst = image.data() + c * hw;
    for (int t = 0; t < taps; ++t) {
      const int ky = t / s.kernel;
      const int kx = t % s.kernel;
      const float* src = columns.data() + (static_cast<std::size_t>(c) * taps + t) * hw;
      const int* sx = src_x.data() + kx * s.width;
      for (int y = 0; y < s.height; ++y) {
        float* dst_row = dst + static_cast<std::size_t>(reflect_index(y + ky - pad, s.height)) * s.width;
        const float* src_row = src + static_cast<std::size_t>(y) * s.width;
        for (int x = 0; x < s.width; ++x) dst_row[sx[x]] += src_row[x];
      }
    }
  }
}

void channel_moments(int channels, int pixels, std::span<const float> values,
                     std::span<float> mean, std::span<float> stddev) {
#pragma omp parallel for schedule(static)
  for (int c = 0; c < channels; ++c) {
    const float* v = values.data() + static_cast<std::size_t>(c) * pixels;
    double sum = 0.0;
    for (int i = 0; i < pixels; ++i) sum += v[i];
    const double mu = sum / pixels;
    double sq = 0.0;
    for (int i = 0; i < pixels; ++i) {
      const double d = v[i] - mu;
      sq += d * d;
    }
    mean[c] = static_cast<float>(mu);
    stddev[c] = static_cast<float>(std::sqrt(sq / pixels));
  }
}

template void composite_forward<float>(int, int, std::span<const float>, std::span<const float>,
                                       std::span<const float>, std::span<float>, std::span<float>,
                                       std::span<float>, std::span<float>);
template void composite_forward<double>(int, int, std::span<const double>, std::span<const double>,
                                        std::span<const double>, std::span<double>,
                                        std::span<double>, std::span<double>, std::span<double>);
template void composite_backward<float>(int, int, std::span<const float>, std::span<const float>,
                                        std::span<const float>, std::span<const float>,
                                        std::span<const float>, std::span<float>, std::span<float>);
template void composite_backward<double>(int, int, std::span<const double>,
                                         std::span<const double>, std::span<const double>,
                                         std::span<const double>, std::span<const double>,
                                         std::span<double>, std::span<double>);

}  // namespace parallel

}  // namespace stylenerf::kernels
