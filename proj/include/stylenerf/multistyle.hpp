// Copyright 2026 The stylenerf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Style-conditioned radiance field over a frozen stage-2 trunk:
//
//   h     = trunk_k(gamma(x))                       frozen, first k layers
//   sigma = relu(mlp_alpha(h))                      (base)
//         = relu(mlp_alpha(h ++ mlp_style_density(s)))   (density aware)
//   c     = mlp_rgb(mlp_style(s) ++ mlp_view(h ++ gamma(d)))
//
// where s is a flattened StyleStatistics vector. Style embeddings are computed
// once per distinct style in a batch.

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "stylenerf/adain.hpp"
#include "stylenerf/checkpoint.hpp"
#include "stylenerf/dataset.hpp"
#include "stylenerf/nerf.hpp"
#include "stylenerf/renderer.hpp"

namespace stylenerf {

// ---------------------------------------------------------------- styles

// (1 - lambda) * a + lambda * b over means and stds, with both endpoints and
// interpolate(a, a, lambda) == a exact. lambda outside [0, 1] is rejected.
StyleStatistics interpolate_styles(const StyleStatistics& a, const StyleStatistics& b, double lambda);
// interpolate_styles(content, style, intensity)
StyleStatistics set_intensity(const StyleStatistics& style, const StyleStatistics& content, double intensity);

struct StyleEntry {
  std::string id;     // "style_00", ..., or "content"
  std::string name;   // display name
  std::string image;  // source image path ("" when built in memory)
  std::string kind;   // "style" or "content"
  StyleStatistics statistics;
};

class StyleRegistry {
 public:
  void add(StyleEntry entry);
  const std::vector<StyleEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  // Index of `id` or -1.
  int find(const std::string& id) const;
  // Throws ValidationError (unknown style) when absent.
  const StyleEntry& at(const std::string& id) const;
  const StyleEntry* content() const;
  // Flattened statistics as columns, in entry order.
  Matrix table() const;

  nlohmann::ordered_json to_json() const;
  static StyleRegistry from_json(const nlohmann::ordered_json& j);
  std::string digest() const;  // of the canonical JSON text
  void save(const std::filesystem::path& path) const;
  static StyleRegistry load(const std::filesystem::path& path);

 private:
  std::vector<StyleEntry> entries_;
};

// ---------------------------------------------------------------- dataset

struct StyleSource {
  std::string name;
  std::string path;  // may be empty when `image` is given
  Image image;
};

// The N x M grid of stylized training frames. images[m][n] belongs to style m
// (registry order) and frame n of `scene`.
struct StylizedDataset {
  SceneDataset scene;  // training frames only
  StyleRegistry registry;
  std::vector<std::vector<Image>> images;

  void validate() const;
};

struct StylizeOptions {
  bool include_content_as_style = true;
};

// Stylizes every training frame with every style and writes
// `<out_dir>/stylized/<style_id>/<frame_id>.png` and `<out_dir>/registry.json`.
// Frames with alpha are stylized on their composited background and masked
// back onto it. Sources with an empty image are read from `path` (IoError
// naming the file on failure). The optional "content" entry uses each
// original frame as its own target and the frame-averaged statistics.
StylizedDataset build_stylized_dataset(const SceneDataset& scene, const std::vector<StyleSource>& styles,
                                       const Stylizer& stylizer, const StylizeOptions& options,
                                       const std::filesystem::path& out_dir);

// Reads back what build_stylized_dataset wrote.
StylizedDataset load_stylized_dataset(const SceneDataset& scene, const std::filesystem::path& run_dir);

// Style images are resized (bilinear) to the nearest encoder-valid size.
Image encoder_sized(const Image& image);

// ---------------------------------------------------------------- network

struct MultistyleArchitecture {
  int trunk_split = 8;  // frozen stage-2 trunk layers
  bool density_aware = false;
  int style_hidden = 256;
  int style_embed = 128;
  int view_embed = 128;
  int rgb_hidden = 128;
  int density_hidden = 128;
  int density_embed = 64;

  void validate(const NerfArchitecture& trunk) const;
};

class MultiStyleField : public RadianceField {
 public:
  // Heads are freshly initialized; mlp_alpha starts as a copy of the stage-2
  // density head when the split keeps the whole trunk (style columns zero).
  MultiStyleField(std::shared_ptr<const NerfNetwork> trunk, const MultistyleArchitecture& arch, int style_dim,
                  std::uint64_t seed);

  FieldOutput query(const SampleBatch& batch) const override;
  FieldOutput query_train(const SampleBatch& batch, std::unique_ptr<FieldTrace>& trace) const override;
  void backward(const FieldTrace& trace, const Matrix& grad_sigma, const Matrix& grad_rgb) override;

  // "<prefix>.mlp_style", "<prefix>.mlp_view", "<prefix>.mlp_rgb", "<prefix>.mlp_alpha",
  // "<prefix>.mlp_style_density"
  void append_parameters(ParameterList& out, const std::string& prefix);
  std::string trunk_digest() const;
  std::string heads_digest() const;
  const MultistyleArchitecture& architecture() const { return arch_; }
  Mlp& mlp_rgb() { return mlp_rgb_; }

 private:
  struct Trace;
  FieldOutput forward(const SampleBatch& batch, Trace* trace) const;

  std::shared_ptr<const NerfNetwork> trunk_;
  MultistyleArchitecture arch_;
  int style_dim_;
  Mlp mlp_style_;          // style_dim -> style_hidden -> style_embed
  Linear mlp_view_;        // trunk ++ gamma(d) -> view_embed
  Mlp mlp_rgb_;            // style_embed ++ view_embed -> rgb_hidden -> 3
  Linear mlp_alpha_;       // trunk (++ density_embed) -> 1
  Mlp mlp_style_density_;  // style_dim -> density_hidden -> density_embed (density aware only)
};

struct MultistyleTrainConfig {
  MultistyleArchitecture arch;
  int batch_rays = 1024;
  float learning_rate = 5e-4f;
  double lr_decay_rate = 0.1;
  int lr_decay_steps = 250000;
  int steps = 10000;
  std::uint64_t seed = 0;
  bool perturb = true;
  int log_every = 100;
};

void to_json(nlohmann::json& j, const MultistyleArchitecture& a);
void from_json(const nlohmann::json& j, MultistyleArchitecture& a);
void to_json(nlohmann::json& j, const MultistyleTrainConfig& c);
void from_json(const nlohmann::json& j, MultistyleTrainConfig& c);
void validate(const MultistyleTrainConfig& c);

// Frozen stage-2 networks, coarse/fine head sets, the registry and the
// training poses. Immutable once trained; render_view may be called
// concurrently.
class MultiStyleModel {
 public:
  MultiStyleModel(const NerfModel& stage2, const MultistyleTrainConfig& config, StyleRegistry registry);

  static MultiStyleModel from_checkpoint(const ModelCheckpoint& ckpt);
  // Throws DigestMismatchError when `stage2` is not the trunk this was trained on.
  void check_trunk(const NerfModel& stage2) const;

  MultiStyleField& coarse() { return *coarse_; }
  MultiStyleField& fine() { return *fine_; }
  const MultiStyleField& coarse() const { return *coarse_; }
  const MultiStyleField& fine() const { return *fine_; }
  const StyleRegistry& registry() const { return registry_; }
  const MultistyleTrainConfig& config() const { return config_; }
  const NerfTrainConfig& stage2_config() const { return stage2_config_; }
  double near() const { return near_; }
  double far() const { return far_; }
  const std::array<float, 3>& background() const { return background_; }
  RenderOptions render_options(bool training) const;

  std::vector<std::string> frame_ids;
  std::vector<CameraPose> poses;  // training poses, pose_index order
  int steps_done = 0;

  ParameterList head_parameters();
  std::string trunk_digest() const;  // coarse and fine trunks together
  ModelCheckpoint checkpoint();

 private:
  MultistyleTrainConfig config_;
  NerfTrainConfig stage2_config_;
  std::shared_ptr<NerfNetwork> stage2_coarse_;
  std::shared_ptr<NerfNetwork> stage2_fine_;
  std::unique_ptr<MultiStyleField> coarse_;
  std::unique_ptr<MultiStyleField> fine_;
  StyleRegistry registry_;
  double near_ = 2.0;
  double far_ = 6.0;
  std::array<float, 3> background_{1.0f, 1.0f, 1.0f};
};

struct MultistyleStepLog {
  int step = 0;
  double loss = 0.0;
  double psnr = 0.0;
  std::map<std::string, double> style_loss;  // fine mse of this step's rays, per style id
};

class MultistyleTrainer {
 public:
  MultistyleTrainer(const StylizedDataset& data, const NerfModel& stage2, const MultistyleTrainConfig& config);

  MultistyleStepLog step();
  int steps_done() const { return model_.steps_done; }
  MultiStyleModel& model() { return model_; }
  ModelCheckpoint checkpoint();
  // Throws DigestMismatchError when ckpt was trained on a different trunk or registry.
  void resume(const ModelCheckpoint& ckpt);

 private:
  MultistyleTrainConfig config_;
  MultiStyleModel model_;
  Adam optimizer_;
  Matrix table_;
  RayBatch frame_rays_;  // every training pixel, frame-major
  std::vector<Matrix> targets_;  // per style, 3 x (frames * pixels)
};

ModelCheckpoint train_multistyle(const StylizedDataset& data, const NerfModel& stage2,
                                 const MultistyleTrainConfig& config,
                                 const std::function<void(const MultistyleStepLog&)>& log = {});

// Coarse + fine render at resolution x resolution with deterministic sampling
// (`rng` is only used if the model's options perturb). Throws StateError for
// an untrained model.
Image render_view(const CameraPose& pose, const StyleStatistics& style, const MultiStyleModel& model,
                  int resolution, Rng* rng = nullptr, std::vector<float>* opacity = nullptr);

}  // namespace stylenerf
