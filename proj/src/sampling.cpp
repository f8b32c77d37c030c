// Copyright 2026 The stylenerf Authors
// SPDX-License-Identifier: Apache-2.0

#include "stylenerf/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "stylenerf/error.hpp"

namespace stylenerf {

std::vector<double> stratified_sample(double near, double far, std::span<const double> jitter) {
  require(std::isfinite(near) && std::isfinite(far) && near < far,
          "stratified_sample: require near < far");
  require(!jitter.empty(), "stratified_sample: n_samples must be >= 1");
  const double n = static_cast<double>(jitter.size());
  const double width = (far - near) / n;
  std::vector<double> t(jitter.size());
  for (std::size_t j = 0; j < jitter.size(); ++j) {
    require(jitter[j] >= 0.0 && jitter[j] <= 1.0, "stratified_sample: jitter outside [0, 1]");
    // The last bin edge is pinned to `far` so jitter 1 does not round past it.
    t[j] = (j + 1 == jitter.size() && jitter[j] == 1.0) ? far : near + (j + jitter[j]) * width;
  }
  return t;
}

std::vector<double> stratified_sample(double near, double far, int n_samples, Rng& rng) {
  require(n_samples >= 1, "stratified_sample: n_samples must be >= 1");
  std::vector<double> jitter(n_samples);
  for (double& u : jitter) u = rng.uniform();
  return stratified_sample(near, far, jitter);
}

std::vector<double> stratified_midpoints(double near, double far, int n_samples) {
  require(n_samples >= 1, "stratified_midpoints: n_samples must be >= 1");
  std::vector<double> jitter(n_samples, 0.5);
  return stratified_sample(near, far, jitter);
}

std::vector<double> hierarchical_sample(std::span<const double> edges,
                                        std::span<const double> weights,
                                        std::span<const double> uniforms) {
  require(edges.size() >= 2, "hierarchical_sample: need at least two edges");
  require(weights.size() + 1 == edges.size(),
          "hierarchical_sample: weights must have one entry per interval");
  for (std::size_t i = 1; i < edges.size(); ++i) {
    require(edges[i] >= edges[i - 1], "hierarchical_sample: edges must be sorted");
  }
  double total = 0.0;
  for (double w : weights) {
    require(std::isfinite(w) && w >= 0.0, "hierarchical_sample: weights must be finite and >= 0");
    total += w;
  }
  const double floor = total <= kWeightFloor ? kWeightFloor : 0.0;
  const std::size_t n = weights.size();
  total += floor * static_cast<double>(n);

  std::vector<double> cdf(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) cdf[i + 1] = cdf[i] + (weights[i] + floor) / total;
  cdf[n] = 1.0;

  std::vector<double> out;
  out.reserve(uniforms.size());
  for (double u : uniforms) {
    require(u >= 0.0 && u <= 1.0, "hierarchical_sample: uniform outside [0, 1]");
    // First interval whose upper CDF value exceeds u; zero-mass intervals are skipped.
    auto it = std::upper_bound(cdf.begin() + 1, cdf.end(), u);
    std::size_t idx = it == cdf.end() ? n - 1 : static_cast<std::size_t>(it - cdf.begin()) - 1;
    if (it == cdf.end()) {
      // u == 1: take the last interval that carries mass.
      while (idx > 0 && cdf[idx + 1] - cdf[idx] <= 0.0) --idx;
    }
    const double mass = cdf[idx + 1] - cdf[idx];
    const double frac = mass > 0.0 ? std::clamp((u - cdf[idx]) / mass, 0.0, 1.0) : 0.5;
    out.push_back(edges[idx] + frac * (edges[idx + 1] - edges[idx]));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<double> hierarchical_sample(std::span<const double> edges,
                                        std::span<const double> weights, int n_fine, Rng& rng,
                                        bool deterministic) {
  require(n_fine >= 1, "hierarchical_sample: n_fine must be >= 1");
  std::vector<double> u(n_fine);
  for (int k = 0; k < n_fine; ++k) u[k] = deterministic ? (k + 0.5) / n_fine : rng.uniform();
  return hierarchical_sample(edges, weights, u);
}

}  // namespace stylenerf
