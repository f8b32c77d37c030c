// Copyright 2026 The stylenerf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Dense layers with hand-written backward passes. Activations are stored
// feature-major: one column per sample.

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "stylenerf/digest.hpp"
#include "stylenerf/rng.hpp"

namespace stylenerf {

using Matrix = Eigen::MatrixXf;
using Vector = Eigen::VectorXf;

enum class Activation { kNone, kRelu, kSigmoid };

void apply_activation(Matrix& x, Activation act);
// acc += per-row sums of m, accumulated column by column so the result does
// not depend on the buffer's alignment.
void add_row_sums(const Matrix& m, Vector& acc);
// Turns dL/d(post-activation) into dL/d(pre-activation), given the
// post-activation values.
void activation_backward(const Matrix& post, Matrix& grad, Activation act);

// A view of one trainable tensor. Pointers stay valid as long as the owning
// layer is alive and not resized.
struct Parameter {
  std::string name;
  std::vector<std::int64_t> shape;
  float* value = nullptr;
  float* grad = nullptr;
  std::size_t size = 0;
};
using ParameterList = std::vector<Parameter>;

struct NamedTensor {
  std::string name;
  std::vector<std::int64_t> shape;
  std::vector<float> values;
};

struct Linear {
  Matrix weight;  // out x in
  Vector bias;
  Matrix grad_weight;
  Vector grad_bias;

  Linear() = default;
  // Uniform(-1/sqrt(in), 1/sqrt(in)) for weight and bias.
  Linear(int in, int out, Rng& rng);

  int in_dim() const { return static_cast<int>(weight.cols()); }
  int out_dim() const { return static_cast<int>(weight.rows()); }

  Matrix forward(const Matrix& x, Activation act) const;

  // `grad` enters as dL/dy for y = forward(x, act) and is consumed. Parameter
  // gradients accumulate. Returns dL/dx when requested, else an empty matrix.
  Matrix backward(const Matrix& x, const Matrix& y, Matrix& grad, Activation act,
                  bool need_input_grad);

  void zero_grad();
  void append_parameters(ParameterList& out, const std::string& prefix);
  void hash_into(Sha256& h) const;
};

struct MlpTrace {
  std::vector<Matrix> inputs;  // input of each layer
  Matrix output;
};

class Mlp {
 public:
  Mlp() = default;
  // dims = {in, hidden..., out}; one activation per layer.
  Mlp(const std::vector<int>& dims, const std::vector<Activation>& activations, Rng& rng);

  Matrix forward(const Matrix& x) const;
  Matrix forward(const Matrix& x, MlpTrace& trace) const;
  Matrix backward(const MlpTrace& trace, Matrix grad_out, bool need_input_grad);

  int in_dim() const { return layers_.front().in_dim(); }
  int out_dim() const { return layers_.back().out_dim(); }
  std::vector<Linear>& layers() { return layers_; }
  const std::vector<Linear>& layers() const { return layers_; }
  const std::vector<Activation>& activations() const { return activations_; }

  void zero_grad();
  void append_parameters(ParameterList& out, const std::string& prefix);
  void hash_into(Sha256& h) const;

 private:
  std::vector<Linear> layers_;
  std::vector<Activation> activations_;
};

void zero_grad(ParameterList& params);

std::vector<NamedTensor> export_tensors(const ParameterList& params);
// Copies matching tensors by name; throws ValidationError on missing names or
// shape mismatch.
void import_tensors(ParameterList& params, const std::vector<NamedTensor>& tensors,
                    const std::string& prefix = "");

std::string parameter_digest(const ParameterList& params);

struct AdamConfig {
  float learning_rate = 5e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float epsilon = 1e-8f;
};

class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  void set_learning_rate(float lr) { config_.learning_rate = lr; }
  float learning_rate() const { return config_.learning_rate; }
  std::int64_t steps() const { return step_; }

  // One update from the gradients currently held by `params`. The list must
  // have the same layout on every call.
  void step(ParameterList& params);

  // Moment buffers and the step count, for exact resumption.
  std::vector<NamedTensor> export_state(const ParameterList& params) const;
  void import_state(const ParameterList& params, const std::vector<NamedTensor>& tensors);

 private:
  AdamConfig config_;
  std::int64_t step_ = 0;
  std::vector<std::vector<float>> m_;
  std::vector<std::vector<float>> v_;
};

}  // namespace stylenerf
