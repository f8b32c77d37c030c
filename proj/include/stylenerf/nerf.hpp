// Copyright 2026 The stylenerf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// The vanilla radiance field: an 8 x 256 ReLU trunk over gamma(x) with gamma(x)
// re-injected after layer 4, a rectified density head on the trunk, and a
// color head on a trunk feature concatenated with gamma(d).

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "stylenerf/checkpoint.hpp"
#include "stylenerf/dataset.hpp"
#include "stylenerf/image.hpp"
#include "stylenerf/nn.hpp"
#include "stylenerf/renderer.hpp"

namespace stylenerf {

struct NerfArchitecture {
  int depth = 8;
  int width = 256;
  int skip = 4;  // gamma(x) is concatenated to the output of this layer
  int position_levels = 10;
  int direction_levels = 4;

  int position_dim() const { return 6 * position_levels; }
  int direction_dim() const { return 6 * direction_levels; }
  void validate() const;
};

class NerfNetwork : public RadianceField {
 public:
  NerfNetwork(const NerfArchitecture& arch, std::uint64_t seed);

  FieldOutput query(const SampleBatch& batch) const override;
  FieldOutput query_train(const SampleBatch& batch, std::unique_ptr<FieldTrace>& trace) const override;
  void backward(const FieldTrace& trace, const Matrix& grad_sigma, const Matrix& grad_rgb) override;

  // Output of the first `layers` trunk layers (post-ReLU) for encoded positions.
  Matrix trunk(const Matrix& encoded_positions, int layers) const;
  std::string trunk_digest(int layers) const;
  const Linear& density_head() const { return density_; }
  const NerfArchitecture& architecture() const { return arch_; }

  // "<prefix>.trunk.<i>", "<prefix>.density", "<prefix>.feature", "<prefix>.color.<i>"
  void append_parameters(ParameterList& out, const std::string& prefix);
  ParameterList parameters(const std::string& prefix);
  void zero_grad();
  std::string digest() const;

 private:
  struct Trace;
  Matrix trunk_impl(const Matrix& enc, int layers, std::vector<Matrix>* inputs) const;

  NerfArchitecture arch_;
  std::vector<Linear> trunk_;
  Linear density_;
  Linear feature_;
  Linear color_hidden_;
  Linear color_out_;
};

// Encodes unit directions, validating them (1e-4).
Matrix encode_directions(const Matrix& directions, int levels);

struct NerfTrainConfig {
  NerfArchitecture arch;
  int n_coarse = 64;
  int n_fine = 128;
  int batch_rays = 1024;
  float learning_rate = 5e-4f;
  double lr_decay_rate = 0.1;    // lr * rate^(step / lr_decay_steps)
  int lr_decay_steps = 250000;
  int steps = 5000;
  std::uint64_t seed = 0;
  int precrop_steps = 0;         // sample only the central crop for this many steps
  double precrop_fraction = 0.5;
  bool perturb = true;
  int log_every = 100;

  RenderOptions render_options(bool training, const std::array<float, 3>& background) const;
};

void to_json(nlohmann::json& j, const NerfArchitecture& a);
void from_json(const nlohmann::json& j, NerfArchitecture& a);
void to_json(nlohmann::json& j, const NerfTrainConfig& c);
void from_json(const nlohmann::json& j, NerfTrainConfig& c);
void validate(const NerfTrainConfig& c);

// Coarse and fine networks with the scene bounds they were trained for.
struct NerfModel {
  NerfModel(const NerfTrainConfig& config, double near, double far, const std::array<float, 3>& background);

  NerfTrainConfig config;
  NerfNetwork coarse;
  NerfNetwork fine;
  double near;
  double far;
  std::array<float, 3> background;

  ParameterList parameters();
  std::string digest() const;
};

struct NerfStepLog {
  int step = 0;
  double loss = 0.0;
  double psnr = 0.0;  // of the fine pass on the batch
  double learning_rate = 0.0;
};

class NerfTrainer {
 public:
  NerfTrainer(const SceneDataset& scene, const NerfTrainConfig& config);

  NerfStepLog step();
  int steps_done() const { return steps_done_; }
  const NerfModel& model() const { return model_; }
  ModelCheckpoint checkpoint();
  void resume(const ModelCheckpoint& ckpt);

 private:
  NerfTrainConfig config_;
  NerfModel model_;
  Adam optimizer_;
  RayBatch all_rays_;
  Matrix all_targets_;
  std::vector<int> center_rays_;
  int steps_done_ = 0;
};

ModelCheckpoint train_nerf(const SceneDataset& scene, const NerfTrainConfig& config,
                           const std::function<void(const NerfStepLog&)>& log = {});

ModelCheckpoint to_model_checkpoint(NerfModel& model, int steps_done);
NerfModel nerf_from_model(const ModelCheckpoint& ckpt);

// Mean PSNR of the fine renders over `views` (e.g. the validation split).
double evaluate_psnr(const NerfModel& model, const SceneDataset& views);

}  // namespace stylenerf
