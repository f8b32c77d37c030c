// Copyright 2026 The stylenerf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Two-pass volume rendering over an abstract radiance field: stratified
// coarse samples, hierarchical fine samples from the coarse weights, and the
// quadrature composite, plus the matching photometric training pass.

#include <array>
#include <memory>
#include <span>
#include <vector>

#include "stylenerf/geometry.hpp"
#include "stylenerf/image.hpp"
#include "stylenerf/nn.hpp"
#include "stylenerf/rng.hpp"

namespace stylenerf {

// Per-sample field inputs. Columns are samples.
struct SampleBatch {
  Matrix positions;   // 3 x N
  Matrix directions;  // 3 x N, unit
  // Optional conditioning: column `conditions[i]` of `table` applies to
  // sample i. Unconditioned fields ignore both.
  const Matrix* table = nullptr;
  std::vector<int> conditions;

  int size() const { return static_cast<int>(positions.cols()); }
};

struct FieldOutput {
  Matrix sigma;  // 1 x N, >= 0
  Matrix rgb;    // 3 x N, in [0, 1]
};

class FieldTrace {
 public:
  virtual ~FieldTrace() = default;
};

class RadianceField {
 public:
  virtual ~RadianceField() = default;
  virtual FieldOutput query(const SampleBatch& batch) const = 0;
  // Same values as query(), keeping what backward() needs.
  virtual FieldOutput query_train(const SampleBatch& batch, std::unique_ptr<FieldTrace>& trace) const = 0;
  // Accumulates parameter gradients of the trainable part.
  virtual void backward(const FieldTrace& trace, const Matrix& grad_sigma, const Matrix& grad_rgb) = 0;
};

struct RayBatch {
  Matrix origins;     // 3 x R
  Matrix directions;  // 3 x R, unit
  double near = 2.0;
  double far = 6.0;
  const Matrix* table = nullptr;  // see SampleBatch
  std::vector<int> conditions;    // one per ray, or empty

  int size() const { return static_cast<int>(origins.cols()); }
  static RayBatch from_rays(std::span<const Ray> rays);
  // Rays [begin, end) with their conditions.
  RayBatch slice(int begin, int end) const;
  void validate() const;
};

struct RenderOptions {
  int n_coarse = 64;
  int n_fine = 128;
  // Jittered strata and random fine uniforms; otherwise bin midpoints and the
  // evenly spaced fine stream (fully deterministic).
  bool perturb = false;
  std::array<float, 3> background{0.0f, 0.0f, 0.0f};
  int chunk = 512;  // rays per field evaluation at inference

  void validate() const;
};

struct RenderResult {
  Matrix rgb_coarse;  // 3 x R, background blended
  Matrix rgb_fine;
  std::vector<float> opacity_coarse;
  std::vector<float> opacity_fine;
  std::vector<float> depth_fine;  // expected depth, sum w_i t_i
  int samples_coarse = 0;         // per ray
  int samples_fine = 0;           // per ray, coarse + fine
  // Coarse weights, R x n_coarse ray-major (diagnostics).
  std::vector<float> weights_coarse;
};

// `fine` may be null (the coarse field is re-queried for the fine pass);
// n_fine = 0 skips the fine pass and copies the coarse result. `rng` is only
// read when options.perturb is set.
RenderResult render_rays(const RadianceField& coarse, const RadianceField* fine, const RayBatch& rays,
                         const RenderOptions& options, Rng* rng = nullptr);

struct TrainRaysResult {
  double loss = 0.0;  // mse_coarse + mse_fine
  double mse_coarse = 0.0;
  double mse_fine = 0.0;
  std::vector<double> ray_error;  // fine-pass mean squared error per ray
};

// One forward/backward pass: squared error of coarse and fine pixels against
// `target` (3 x R), averaged over rays and channels. Parameter gradients are
// accumulated into the fields; the caller owns zeroing and the optimizer.
TrainRaysResult train_rays(RadianceField& coarse, RadianceField* fine, const RayBatch& rays, const Matrix& target,
                           const RenderOptions& options, Rng* rng);

// Renders every pixel of `pose`; the fine pass gives the image. `table` and
// `condition` condition every ray alike. `opacity` receives the fine
// accumulated opacity, row-major.
Image render_image(const RadianceField& coarse, const RadianceField* fine, const CameraPose& pose, double near,
                   double far, const RenderOptions& options, Rng* rng = nullptr,
                   std::vector<float>* opacity = nullptr, const Matrix* table = nullptr, int condition = -1);

}  // namespace stylenerf
