// Copyright 2026 The stylenerf Authors
// SPDX-License-Identifier: Apache-2.0

#include "stylenerf/conv.hpp"

#include <cmath>
#include <limits>

#include "stylenerf/error.hpp"
#include "stylenerf/kernels.hpp"

namespace stylenerf {

Conv2d::Conv2d(int in, int out, int k, Rng& rng, ConvInit init)
    : in_channels(in),
      out_channels(out),
      kernel(k),
      weight(out, in * k * k),
      bias(out),
      grad_weight(Matrix::Zero(out, in * k * k)),
      grad_bias(Vector::Zero(out)) {
  require(k % 2 == 1, "conv: kernel size must be odd");
  const double fan_in = static_cast<double>(in) * k * k;
  if (init == ConvInit::kHeNormal) {
    const double std = std::sqrt(2.0 / fan_in);
    for (int i = 0; i < weight.size(); ++i) weight.data()[i] = static_cast<float>(std * rng.normal());
    bias.setZero();
  } else {
    const double bound = 1.0 / std::sqrt(fan_in);
    for (int i = 0; i < weight.size(); ++i) weight.data()[i] = static_cast<float>(rng.uniform(-bound, bound));
    for (int i = 0; i < bias.size(); ++i) bias[i] = static_cast<float>(rng.uniform(-bound, bound));
  }
}

FeatureMap Conv2d::forward(const FeatureMap& x) const {
  require(x.channels == in_channels, "conv: input has " + std::to_string(x.channels) +
                                         " channels, expected " + std::to_string(in_channels));
  require(x.height > kernel / 2 && x.width > kernel / 2, "conv: input smaller than the kernel padding");
  const kernels::ConvShape shape{x.channels, x.height, x.width, kernel};
  const auto hw = static_cast<Eigen::Index>(x.pixels());
  const Eigen::Index rows = static_cast<Eigen::Index>(in_channels) * kernel * kernel;
  std::vector<float> cols(static_cast<std::size_t>(rows * hw));
  kernels::parallel::im2col_reflect(shape, x.values, cols);

  FeatureMap y(out_channels, x.height, x.width);
  Eigen::Map<const RowMatrix> col_mat(cols.data(), rows, hw);
  Eigen::Map<RowMatrix> out(y.values.data(), out_channels, hw);
  out.noalias() = weight * col_mat;
  out.colwise() += bias;
  return y;
}

FeatureMap Conv2d::backward_input(const FeatureMap& x, const FeatureMap& grad_out) const {
  require(grad_out.channels == out_channels && grad_out.height == x.height && grad_out.width == x.width,
          "conv backward: gradient shape mismatch");
  const kernels::ConvShape shape{x.channels, x.height, x.width, kernel};
  const auto hw = static_cast<Eigen::Index>(x.pixels());
  const Eigen::Index rows = static_cast<Eigen::Index>(in_channels) * kernel * kernel;
  Eigen::Map<const RowMatrix> g(grad_out.values.data(), out_channels, hw);
  std::vector<float> dcols(static_cast<std::size_t>(rows * hw));
  Eigen::Map<RowMatrix> dcol_mat(dcols.data(), rows, hw);
  dcol_mat.noalias() = weight.transpose() * g;
  FeatureMap dx(x.channels, x.height, x.width);
  kernels::parallel::col2im_reflect(shape, dcols, dx.values);
  return dx;
}

void Conv2d::accumulate_grads(const FeatureMap& x, const FeatureMap& grad_out) {
  require(grad_out.channels == out_channels && grad_out.height == x.height && grad_out.width == x.width,
          "conv backward: gradient shape mismatch");
  if (grad_weight.size() != weight.size()) zero_grad();
  const kernels::ConvShape shape{x.channels, x.height, x.width, kernel};
  const auto hw = static_cast<Eigen::Index>(x.pixels());
  const Eigen::Index rows = static_cast<Eigen::Index>(in_channels) * kernel * kernel;
  Eigen::Map<const RowMatrix> g(grad_out.values.data(), out_channels, hw);
  std::vector<float> cols(static_cast<std::size_t>(rows * hw));
  kernels::parallel::im2col_reflect(shape, x.values, cols);
  Eigen::Map<const RowMatrix> col_mat(cols.data(), rows, hw);
  grad_weight.noalias() += g * col_mat.transpose();
  add_row_sums(g, grad_bias);
}

void Conv2d::zero_grad() {
  grad_weight.setZero(weight.rows(), weight.cols());
  grad_bias.setZero(bias.size());
}

void Conv2d::append_parameters(ParameterList& out, const std::string& prefix) {
  if (grad_weight.size() != weight.size()) zero_grad();
  out.push_back({prefix + ".weight", {out_channels, in_channels, kernel, kernel}, weight.data(),
                 grad_weight.data(), static_cast<std::size_t>(weight.size())});
  out.push_back({prefix + ".bias", {out_channels}, bias.data(), grad_bias.data(),
                 static_cast<std::size_t>(bias.size())});
}

void Conv2d::hash_into(Sha256& h) const {
  h.update_values(std::span<const float>(weight.data(), weight.size()));
  h.update_values(std::span<const float>(bias.data(), bias.size()));
}

void relu_inplace(FeatureMap& x) {
  for (float& v : x.values) v = v > 0.0f ? v : 0.0f;
}

void relu_backward(const FeatureMap& output, FeatureMap& grad) {
  for (std::size_t i = 0; i < grad.values.size(); ++i) {
    if (!(output.values[i] > 0.0f)) grad.values[i] = 0.0f;
  }
}

FeatureMap max_pool2(const FeatureMap& x, std::vector<int>* argmax) {
  require(x.height % 2 == 0 && x.width % 2 == 0, "max_pool2: spatial size must be even");
  FeatureMap y(x.channels, x.height / 2, x.width / 2);
  if (argmax) argmax->assign(y.values.size(), 0);
  for (int c = 0; c < x.channels; ++c) {
    for (int oy = 0; oy < y.height; ++oy) {
      for (int ox = 0; ox < y.width; ++ox) {
        float best = -std::numeric_limits<float>::infinity();
        int best_idx = 0;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const int idx = c * static_cast<int>(x.pixels()) + (2 * oy + dy) * x.width + 2 * ox + dx;
            if (x.values[idx] > best) {
              best = x.values[idx];
              best_idx = idx;
            }
          }
        }
        const std::size_t o = c * y.pixels() + static_cast<std::size_t>(oy) * y.width + ox;
        y.values[o] = best;
        if (argmax) (*argmax)[o] = best_idx;
      }
    }
  }
  return y;
}

FeatureMap max_pool2_backward(const FeatureMap& input_shape, const std::vector<int>& argmax,
                              const FeatureMap& grad_out) {
  FeatureMap dx(input_shape.channels, input_shape.height, input_shape.width);
  for (std::size_t o = 0; o < grad_out.values.size(); ++o) dx.values[argmax[o]] += grad_out.values[o];
  return dx;
}

FeatureMap upsample_nearest2(const FeatureMap& x) {
  FeatureMap y(x.channels, 2 * x.height, 2 * x.width);
  for (int c = 0; c < y.channels; ++c)
    for (int yy = 0; yy < y.height; ++yy)
      for (int xx = 0; xx < y.width; ++xx) y.at(c, yy, xx) = x.at(c, yy / 2, xx / 2);
  return y;
}

FeatureMap upsample_nearest2_backward(const FeatureMap& grad_out) {
  FeatureMap dx(grad_out.channels, grad_out.height / 2, grad_out.width / 2);
  for (int c = 0; c < grad_out.channels; ++c)
    for (int yy = 0; yy < grad_out.height; ++yy)
      for (int xx = 0; xx < grad_out.width; ++xx) dx.at(c, yy / 2, xx / 2) += grad_out.at(c, yy, xx);
  return dx;
}

void ConvNet::add_conv(Conv2d conv) {
  ops_.push_back({OpKind::kConv, static_cast<int>(convs_.size())});
  convs_.push_back(std::move(conv));
}
void ConvNet::add_relu() { ops_.push_back({OpKind::kRelu}); }
void ConvNet::add_max_pool() { ops_.push_back({OpKind::kMaxPool}); }
void ConvNet::add_upsample() { ops_.push_back({OpKind::kUpsample}); }

FeatureMap ConvNet::forward(const FeatureMap& x, Trace* trace, const std::vector<int>& taps,
                            std::vector<FeatureMap>* tapped) const {
  if (trace) {
    trace->inputs.assign(ops_.size(), {});
    trace->argmax.assign(ops_.size(), {});
  }
  if (tapped) tapped->assign(taps.size(), {});
  FeatureMap h = x;
  for (std::size_t k = 0; k < ops_.size(); ++k) {
    const Op& op = ops_[k];
    if (trace) trace->inputs[k] = h;
    switch (op.kind) {
      case OpKind::kConv:
        h = convs_[op.conv].forward(h);
        break;
      case OpKind::kRelu:
        relu_inplace(h);
        break;
      case OpKind::kMaxPool:
        h = max_pool2(h, trace ? &trace->argmax[k] : nullptr);
        break;
      case OpKind::kUpsample:
        h = upsample_nearest2(h);
        break;
    }
    if (tapped) {
      for (std::size_t t = 0; t < taps.size(); ++t) {
        if (taps[t] == static_cast<int>(k)) (*tapped)[t] = h;
      }
    }
  }
  if (trace) trace->output = h;
  return h;
}

template <bool kParams, typename Self>
FeatureMap ConvNet::backward_impl(Self& self, const Trace& trace, const FeatureMap& grad_output,
                                  const std::vector<int>& taps,
                                  const std::vector<FeatureMap>& tap_grads, bool need_input_grad) {
  require(trace.inputs.size() == self.ops_.size(), "convnet backward: trace does not match network");
  FeatureMap grad = grad_output;
  if (grad.values.empty()) {
    grad = FeatureMap(trace.output.channels, trace.output.height, trace.output.width);
  }
  for (std::size_t k = self.ops_.size(); k-- > 0;) {
    for (std::size_t t = 0; t < taps.size() && t < tap_grads.size(); ++t) {
      if (taps[t] == static_cast<int>(k) && !tap_grads[t].values.empty()) {
        require(tap_grads[t].values.size() == grad.values.size(), "convnet backward: tap gradient shape");
        for (std::size_t i = 0; i < grad.values.size(); ++i) grad.values[i] += tap_grads[t].values[i];
      }
    }
    const Op& op = self.ops_[k];
    const FeatureMap& in = trace.inputs[k];
    switch (op.kind) {
      case OpKind::kConv: {
        if constexpr (kParams) self.convs_[op.conv].accumulate_grads(in, grad);
        if (k == 0 && !need_input_grad) return {};
        grad = self.convs_[op.conv].backward_input(in, grad);
        break;
      }
      case OpKind::kRelu:
        relu_backward(in, grad);
        break;
      case OpKind::kMaxPool:
        grad = max_pool2_backward(in, trace.argmax[k], grad);
        break;
      case OpKind::kUpsample:
        grad = upsample_nearest2_backward(grad);
        break;
    }
  }
  return grad;
}

FeatureMap ConvNet::backward_input(const Trace& trace, const FeatureMap& grad_output,
                                   const std::vector<int>& taps,
                                   const std::vector<FeatureMap>& tap_grads) const {
  return backward_impl<false>(*this, trace, grad_output, taps, tap_grads, true);
}

FeatureMap ConvNet::backward(const Trace& trace, const FeatureMap& grad_output, bool need_input_grad) {
  return backward_impl<true>(*this, trace, grad_output, {}, {}, need_input_grad);
}

void ConvNet::zero_grad() {
  for (Conv2d& c : convs_) c.zero_grad();
}

void ConvNet::append_parameters(ParameterList& out, const std::string& prefix) {
  for (std::size_t i = 0; i < convs_.size(); ++i) convs_[i].append_parameters(out, prefix + "." + std::to_string(i));
}

std::string ConvNet::digest() const {
  Sha256 h;
  for (const Conv2d& c : convs_) c.hash_into(h);
  return h.hex();
}

}  // namespace stylenerf
