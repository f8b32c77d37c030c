// Copyright 2026 The stylenerf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "stylenerf/rng.hpp"

namespace stylenerf {

// Added to every interval mass when a PDF has (numerically) no mass at all.
constexpr double kWeightFloor = 1e-5;

// One depth per equal-width bin of [near, far]: bin j yields
// near + (j + jitter[j]) * (far - near) / n. jitter values lie in [0, 1].
std::vector<double> stratified_sample(double near, double far, std::span<const double> jitter);
std::vector<double> stratified_sample(double near, double far, int n_samples, Rng& rng);

// Bin midpoints, the jitter-free variant used at inference.
std::vector<double> stratified_midpoints(double near, double far, int n_samples);

/// Inverse-CDF sampling of the piecewise-constant density over the intervals
/// [edges[i], edges[i+1]] with masses `weights[i]` (weights.size() ==
/// edges.size() - 1). One depth per entry of `uniforms` (each in [0, 1]);
/// the result is sorted ascending and stays within [edges.front(), edges.back()].
///
/// Rays whose total mass is at most kWeightFloor get kWeightFloor added to
/// every interval, which turns an empty ray into uniform sampling.
std::vector<double> hierarchical_sample(std::span<const double> edges,
                                        std::span<const double> weights,
                                        std::span<const double> uniforms);

// `deterministic` replaces random uniforms by the evenly spaced stream
// (k + 0.5) / n_fine.
std::vector<double> hierarchical_sample(std::span<const double> edges,
                                        std::span<const double> weights, int n_fine, Rng& rng,
                                        bool deterministic = false);

}  // namespace stylenerf
