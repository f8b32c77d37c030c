// Copyright 2026 The stylenerf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <vector>

#include "stylenerf/error.hpp"
#include "stylenerf/kernels.hpp"

namespace stylenerf {

/// Samples along a batch of rays, ray-major. Each of `num_rays` rays carries
/// `num_samples` depths with their interval lengths, densities and colors
/// (3 channels per sample).
template <std::floating_point T>
struct QuadratureBatch {
  int num_rays = 0;
  int num_samples = 0;
  std::vector<T> t_values;
  std::vector<T> deltas;
  std::vector<T> sigmas;
  std::vector<T> colors;

  std::size_t size() const { return static_cast<std::size_t>(num_rays) * num_samples; }

  // Sizes, finiteness, sigma >= 0, delta >= 0 and nondecreasing depths. Equal
  // neighbouring depths (from merging coarse and fine samples) are accepted and
  // simply give delta = 0.
  void validate() const {
    require(num_rays >= 0 && num_samples >= 1, "quadrature: need at least one sample per ray");
    require(deltas.size() == size() && sigmas.size() == size() && colors.size() == 3 * size(),
            "quadrature: deltas, sigmas and colors must all have one entry per sample");
    require(t_values.empty() || t_values.size() == size(),
            "quadrature: t_values must be empty or have one entry per sample");
    for (std::size_t i = 0; i < size(); ++i) {
      require(std::isfinite(sigmas[i]) && sigmas[i] >= T(0), "quadrature: sigma must be finite and >= 0");
      require(std::isfinite(deltas[i]) && deltas[i] >= T(0), "quadrature: delta must be finite and >= 0");
    }
    for (T c : colors) require(std::isfinite(c), "quadrature: non-finite color");
    if (!t_values.empty()) {
      for (int r = 0; r < num_rays; ++r) {
        for (int i = 1; i < num_samples; ++i) {
          const std::size_t s = static_cast<std::size_t>(r) * num_samples + i;
          require(t_values[s] >= t_values[s - 1], "quadrature: t_values must be sorted per ray");
        }
      }
    }
  }
};

template <std::floating_point T>
struct CompositeResult {
  std::vector<T> rgb;            // 3 per ray
  std::vector<T> weights;        // w_i per sample
  std::vector<T> transmittance;  // T_i per sample
  std::vector<T> opacity;        // sum of w_i per ray
};

template <std::floating_point T>
struct CompositeGradient {
  std::vector<T> sigmas;
  std::vector<T> colors;
};

/// pixel = sum_i T_i (1 - exp(-sigma_i delta_i)) c_i with
/// T_i = exp(-sum_{j<i} sigma_j delta_j).
template <std::floating_point T>
CompositeResult<T> composite(const QuadratureBatch<T>& batch) {
  batch.validate();
  CompositeResult<T> out;
  out.rgb.resize(3 * static_cast<std::size_t>(batch.num_rays));
  out.weights.resize(batch.size());
  out.transmittance.resize(batch.size());
  out.opacity.resize(batch.num_rays);
  kernels::parallel::composite_forward<T>(batch.num_rays, batch.num_samples, batch.sigmas,
                                          batch.deltas, batch.colors, out.weights,
                                          out.transmittance, out.rgb, out.opacity);
  return out;
}

// Vector-Jacobian product of composite() for upstream gradients on the pixel
// colors (3 per ray) and the accumulated opacity (1 per ray).
template <std::floating_point T>
CompositeGradient<T> composite_backward(const QuadratureBatch<T>& batch,
                                        std::span<const T> grad_rgb,
                                        std::span<const T> grad_opacity) {
  batch.validate();
  require(grad_rgb.size() == 3 * static_cast<std::size_t>(batch.num_rays) &&
              grad_opacity.size() == static_cast<std::size_t>(batch.num_rays),
          "composite_backward: gradient sizes do not match the batch");
  CompositeGradient<T> g;
  g.sigmas.resize(batch.size());
  g.colors.resize(3 * batch.size());
  kernels::parallel::composite_backward<T>(batch.num_rays, batch.num_samples, batch.sigmas,
                                           batch.deltas, batch.colors, grad_rgb, grad_opacity,
                                           g.sigmas, g.colors);
  return g;
}

// delta_i = t_{i+1} - t_i, and far - t_N for the last sample of each ray.
template <std::floating_point T>
std::vector<T> deltas_from_depths(int num_rays, int num_samples, std::span<const T> t_values,
                                  std::span<const T> far) {
  std::vector<T> deltas(t_values.size());
  for (int r = 0; r < num_rays; ++r) {
    const std::size_t base = static_cast<std::size_t>(r) * num_samples;
    for (int i = 0; i + 1 < num_samples; ++i) deltas[base + i] = t_values[base + i + 1] - t_values[base + i];
    const T last = far[r] - t_values[base + num_samples - 1];
    deltas[base + num_samples - 1] = last > T(0) ? last : T(0);
  }
  return deltas;
}

}  // namespace stylenerf
