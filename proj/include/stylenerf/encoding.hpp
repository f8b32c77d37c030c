// Copyright 2026 The stylenerf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace stylenerf {

constexpr int kPositionLevels = 10;
constexpr int kDirectionLevels = 4;

constexpr int encoded_dim(int dims, int levels) { return 2 * levels * dims; }

/// Fourier features of `v` with frequencies 1, 2, ..., 2^(levels-1).
///
/// Layout, frequencies ascending: for frequency f the block
/// sin(f*v_0) .. sin(f*v_{k-1}) is followed by cos(f*v_0) .. cos(f*v_{k-1}).
/// The raw input is not included, so the length is 2 * levels * k.
/// Checkpoints depend on this order.
std::vector<double> positional_encode(std::span<const double> v, int levels);

// Column-wise encoding of a dims x count matrix. Arguments are evaluated in
// double precision before rounding to float.
Eigen::MatrixXf encode_columns(const Eigen::MatrixXf& input, int levels);

}  // namespace stylenerf
