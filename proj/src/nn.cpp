// Copyright 2026 The stylenerf Authors
// SPDX-License-Identifier: Apache-2.0

#include "stylenerf/nn.hpp"

#include <cmath>
#include <map>

#include "stylenerf/error.hpp"

namespace stylenerf {

void apply_activation(Matrix& x, Activation act) {
  switch (act) {
    case Activation::kNone:
      break;
    case Activation::kRelu:
      for (float* v = x.data(), *end = v + x.size(); v != end; ++v) *v = *v > 0.0f ? *v : 0.0f;
      break;
    case Activation::kSigmoid:
      x.array() = (1.0f + (-x.array()).exp()).inverse();
      break;
  }
}

void add_row_sums(const Matrix& m, Vector& acc) {
  const Eigen::Index rows = m.rows();
  float* out = acc.data();
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    const float* col = m.data() + c * rows;
    for (Eigen::Index r = 0; r < rows; ++r) out[r] += col[r];
  }
}

void activation_backward(const Matrix& post, Matrix& grad, Activation act) {
  switch (act) {
    case Activation::kNone:
      break;
    case Activation::kRelu:
      for (Eigen::Index i = 0; i < grad.size(); ++i) grad.data()[i] = post.data()[i] > 0.0f ? grad.data()[i] : 0.0f;
      break;
    case Activation::kSigmoid:
      grad.array() *= post.array() * (1.0f - post.array());
      break;
  }
}

Linear::Linear(int in, int out, Rng& rng)
    : weight(out, in), bias(out), grad_weight(Matrix::Zero(out, in)), grad_bias(Vector::Zero(out)) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  for (int i = 0; i < weight.size(); ++i) weight.data()[i] = static_cast<float>(rng.uniform(-bound, bound));
  for (int i = 0; i < bias.size(); ++i) bias[i] = static_cast<float>(rng.uniform(-bound, bound));
}

Matrix Linear::forward(const Matrix& x, Activation act) const {
  Matrix y(weight.rows(), x.cols());
  y.noalias() = weight * x;
  y.colwise() += bias;
  apply_activation(y, act);
  return y;
}

Matrix Linear::backward(const Matrix& x, const Matrix& y, Matrix& grad, Activation act,
                        bool need_input_grad) {
  activation_backward(y, grad, act);
  grad_weight.noalias() += grad * x.transpose();
  add_row_sums(grad, grad_bias);
  if (!need_input_grad) return {};
  Matrix gx(weight.cols(), grad.cols());
  gx.noalias() = weight.transpose() * grad;
  return gx;
}

void Linear::zero_grad() {
  grad_weight.setZero(weight.rows(), weight.cols());
  grad_bias.setZero(bias.size());
}

void Linear::append_parameters(ParameterList& out, const std::string& prefix) {
  if (grad_weight.rows() != weight.rows() || grad_weight.cols() != weight.cols()) zero_grad();
  out.push_back({prefix + ".weight", {weight.rows(), weight.cols()}, weight.data(),
                 grad_weight.data(), static_cast<std::size_t>(weight.size())});
  out.push_back({prefix + ".bias", {bias.size()}, bias.data(), grad_bias.data(),
                 static_cast<std::size_t>(bias.size())});
}

void Linear::hash_into(Sha256& h) const {
  h.update_values(std::span<const float>(weight.data(), weight.size()));
  h.update_values(std::span<const float>(bias.data(), bias.size()));
}

Mlp::Mlp(const std::vector<int>& dims, const std::vector<Activation>& activations, Rng& rng)
    : activations_(activations) {
  require(dims.size() >= 2 && activations.size() + 1 == dims.size(),
          "mlp: need one activation per layer");
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) layers_.emplace_back(dims[i], dims[i + 1], rng);
}

Matrix Mlp::forward(const Matrix& x) const {
  Matrix h = layers_[0].forward(x, activations_[0]);
  for (std::size_t i = 1; i < layers_.size(); ++i) h = layers_[i].forward(h, activations_[i]);
  return h;
}

Matrix Mlp::forward(const Matrix& x, MlpTrace& trace) const {
  trace.inputs.clear();
  trace.inputs.push_back(x);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Matrix h = layers_[i].forward(trace.inputs.back(), activations_[i]);
    if (i + 1 < layers_.size()) {
      trace.inputs.push_back(std::move(h));
    } else {
      trace.output = std::move(h);
    }
  }
  return trace.output;
}

Matrix Mlp::backward(const MlpTrace& trace, Matrix grad_out, bool need_input_grad) {
  Matrix grad = std::move(grad_out);
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const Matrix& y = k + 1 < layers_.size() ? trace.inputs[k + 1] : trace.output;
    const bool want = k > 0 || need_input_grad;
    grad = layers_[k].backward(trace.inputs[k], y, grad, activations_[k], want);
  }
  return grad;
}

void Mlp::zero_grad() {
  for (Linear& l : layers_) l.zero_grad();
}

void Mlp::append_parameters(ParameterList& out, const std::string& prefix) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].append_parameters(out, prefix + "." + std::to_string(i));
  }
}

void Mlp::hash_into(Sha256& h) const {
  for (const Linear& l : layers_) l.hash_into(h);
}

void zero_grad(ParameterList& params) {
  for (Parameter& p : params) std::fill(p.grad, p.grad + p.size, 0.0f);
}

std::vector<NamedTensor> export_tensors(const ParameterList& params) {
  std::vector<NamedTensor> out;
  out.reserve(params.size());
  for (const Parameter& p : params) out.push_back({p.name, p.shape, {p.value, p.value + p.size}});
  return out;
}

void import_tensors(ParameterList& params, const std::vector<NamedTensor>& tensors,
                    const std::string& prefix) {
  std::map<std::string, const NamedTensor*> by_name;
  for (const NamedTensor& t : tensors) by_name[t.name] = &t;
  for (Parameter& p : params) {
    auto it = by_name.find(prefix + p.name);
    if (it == by_name.end()) throw ValidationError("missing tensor '" + prefix + p.name + "'");
    if (it->second->shape != p.shape || it->second->values.size() != p.size) {
      throw ValidationError("tensor '" + prefix + p.name + "' has mismatched shape");
    }
    std::copy(it->second->values.begin(), it->second->values.end(), p.value);
  }
}

std::string parameter_digest(const ParameterList& params) {
  Sha256 h;
  for (const Parameter& p : params) {
    h.update(p.name);
    h.update_values(std::span<const std::int64_t>(p.shape));
    h.update_values(std::span<const float>(p.value, p.size));
  }
  return h.hex();
}

void Adam::step(ParameterList& params) {
  if (m_.size() != params.size()) {
    m_.assign(params.size(), {});
    v_.assign(params.size(), {});
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i].assign(params[i].size, 0.0f);
      v_[i].assign(params[i].size, 0.0f);
    }
  }
  ++step_;
  const double bc1 = 1.0 - std::pow(static_cast<double>(config_.beta1), static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(static_cast<double>(config_.beta2), static_cast<double>(step_));
  const float step_size = static_cast<float>(config_.learning_rate / bc1);
  const float inv_sqrt_bc2 = static_cast<float>(1.0 / std::sqrt(bc2));
  const float b1 = config_.beta1, b2 = config_.beta2, eps = config_.epsilon;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    float* m = m_[i].data();
    float* v = v_[i].data();
    for (std::size_t k = 0; k < p.size; ++k) {
      const float g = p.grad[k];
      m[k] = b1 * m[k] + (1.0f - b1) * g;
      v[k] = b2 * v[k] + (1.0f - b2) * g * g;
      p.value[k] -= step_size * m[k] / (std::sqrt(v[k]) * inv_sqrt_bc2 + eps);
    }
  }
}

std::vector<NamedTensor> Adam::export_state(const ParameterList& params) const {
  std::vector<NamedTensor> out;
  out.push_back({"adam.step", {1}, {static_cast<float>(step_)}});
  if (m_.size() != params.size()) return out;
  for (std::size_t i = 0; i < params.size(); ++i) {
    out.push_back({"adam.m." + params[i].name, params[i].shape, m_[i]});
    out.push_back({"adam.v." + params[i].name, params[i].shape, v_[i]});
  }
  return out;
}

void Adam::import_state(const ParameterList& params, const std::vector<NamedTensor>& tensors) {
  std::map<std::string, const NamedTensor*> by_name;
  for (const NamedTensor& t : tensors) by_name[t.name] = &t;
  auto step_it = by_name.find("adam.step");
  if (step_it == by_name.end()) throw ValidationError("optimizer state missing 'adam.step'");
  step_ = static_cast<std::int64_t>(step_it->second->values.at(0));
  m_.clear();
  v_.clear();
  if (step_ == 0) return;
  for (const Parameter& p : params) {
    auto m = by_name.find("adam.m." + p.name);
    auto v = by_name.find("adam.v." + p.name);
    if (m == by_name.end() || v == by_name.end() || m->second->values.size() != p.size ||
        v->second->values.size() != p.size) {
      throw ValidationError("optimizer state does not match parameter '" + p.name + "'");
    }
    m_.push_back(m->second->values);
    v_.push_back(v->second->values);
  }
}

}  // namespace stylenerf
