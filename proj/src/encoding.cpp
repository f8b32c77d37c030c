// Copyright 2026 The stylenerf Authors
// SPDX-License-Identifier: Apache-2.0

#include "stylenerf/encoding.hpp"

#include <cmath>

#include "stylenerf/error.hpp"
#include "stylenerf/kernels.hpp"

namespace stylenerf {

std::vector<double> positional_encode(std::span<const double> v, int levels) {
  require(levels >= 1, "positional_encode: levels must be >= 1");
  for (double x : v) require(std::isfinite(x), "positional_encode: non-finite input");
  const std::size_t k = v.size();
  std::vector<double> out(2 * static_cast<std::size_t>(levels) * k);
  for (int l = 0; l < levels; ++l) {
    const double freq = std::ldexp(1.0, l);
    for (std::size_t d = 0; d < k; ++d) {
      out[2 * l * k + d] = std::sin(freq * v[d]);
      out[2 * l * k + k + d] = std::cos(freq * v[d]);
    }
  }
  return out;
}

Eigen::MatrixXf encode_columns(const Eigen::MatrixXf& input, int levels) {
  require(levels >= 1, "encode_columns: levels must be >= 1");
  require(input.allFinite(), "encode_columns: non-finite input");
  const int dims = static_cast<int>(input.rows());
  const int count = static_cast<int>(input.cols());
  Eigen::MatrixXf out(encoded_dim(dims, levels), count);
  kernels::parallel::positional_encode(dims, count, levels, {input.data(), static_cast<std::size_t>(input.size())},
                                       {out.data(), static_cast<std::size_t>(out.size())});
  return out;
}

}  // namespace stylenerf
