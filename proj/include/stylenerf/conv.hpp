// Copyright 2026 The stylenerf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

#include "stylenerf/nn.hpp"
#include "stylenerf/rng.hpp"

namespace stylenerf {

// C x H x W tensor, row-major within each channel plane.
struct FeatureMap {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> values;

  FeatureMap() = default;
  FeatureMap(int c, int h, int w, float fill = 0.0f)
      : channels(c), height(h), width(w), values(static_cast<std::size_t>(c) * h * w, fill) {}

  std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
  float& at(int c, int y, int x) { return values[c * pixels() + static_cast<std::size_t>(y) * width + x]; }
  float at(int c, int y, int x) const { return values[c * pixels() + static_cast<std::size_t>(y) * width + x]; }
  bool same_shape(const FeatureMap& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }
};

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class ConvInit {
  kHeNormal,      // N(0, 2 / fan_in), zero bias
  kUniformFanIn,  // U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weight and bias
};

// Same-size convolution with reflection padding.
struct Conv2d {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 3;
  Matrix weight;  // out x (in * kernel * kernel)
  Vector bias;
  Matrix grad_weight;
  Vector grad_bias;

  Conv2d() = default;
  Conv2d(int in, int out, int kernel, Rng& rng, ConvInit init);

  FeatureMap forward(const FeatureMap& x) const;
  // dL/dx for the input shape of `x`.
  FeatureMap backward_input(const FeatureMap& x, const FeatureMap& grad_out) const;
  void accumulate_grads(const FeatureMap& x, const FeatureMap& grad_out);

  void zero_grad();
  void append_parameters(ParameterList& out, const std::string& prefix);
  void hash_into(Sha256& h) const;
};

void relu_inplace(FeatureMap& x);
// Masks grad by (output > 0).
void relu_backward(const FeatureMap& output, FeatureMap& grad);

// 2x2 max pooling with stride 2; `argmax` records the winning input index per output.
FeatureMap max_pool2(const FeatureMap& x, std::vector<int>* argmax = nullptr);
FeatureMap max_pool2_backward(const FeatureMap& input_shape, const std::vector<int>& argmax,
                              const FeatureMap& grad_out);

FeatureMap upsample_nearest2(const FeatureMap& x);
FeatureMap upsample_nearest2_backward(const FeatureMap& grad_out);

// A straight chain of conv / relu / pool / upsample ops. Any op output can be
// tapped: forward() reports it and backward() accepts a gradient for it.
class ConvNet {
 public:
  enum class OpKind { kConv, kRelu, kMaxPool, kUpsample };
  struct Op {
    OpKind kind;
    int conv = -1;  // index into convs() for kConv
  };

  struct Trace {
    std::vector<FeatureMap> inputs;  // input of every op
    std::vector<std::vector<int>> argmax;
    FeatureMap output;
  };

  void add_conv(Conv2d conv);
  void add_relu();
  void add_max_pool();
  void add_upsample();

  std::size_t num_ops() const { return ops_.size(); }
  const std::vector<Op>& ops() const { return ops_; }
  std::vector<Conv2d>& convs() { return convs_; }
  const std::vector<Conv2d>& convs() const { return convs_; }

  // `taps` are op indices whose outputs are copied to `tapped` in order. The
  // trace is filled when non-null and is required for backward.
  FeatureMap forward(const FeatureMap& x, Trace* trace = nullptr, const std::vector<int>& taps = {},
                     std::vector<FeatureMap>* tapped = nullptr) const;

  // dL/d(input). `grad_output` (may be empty) is the gradient at the final
  // output; tap_grads[k] (empty entries allowed) is the gradient at taps[k].
  FeatureMap backward_input(const Trace& trace, const FeatureMap& grad_output,
                            const std::vector<int>& taps = {},
                            const std::vector<FeatureMap>& tap_grads = {}) const;
  // Same, accumulating conv parameter gradients on the way.
  FeatureMap backward(const Trace& trace, const FeatureMap& grad_output, bool need_input_grad);

  void zero_grad();
  void append_parameters(ParameterList& out, const std::string& prefix);
  std::string digest() const;

 private:
  template <bool kParams, typename Self>
  static FeatureMap backward_impl(Self& self, const Trace& trace, const FeatureMap& grad_output,
                                  const std::vector<int>& taps,
                                  const std::vector<FeatureMap>& tap_grads, bool need_input_grad);

  std::vector<Op> ops_;
  std::vector<Conv2d> convs_;
};

}  // namespace stylenerf
