// Copyright 2026 The stylenerf Authors
// SPDX-License-Identifier: Apache-2.0

#include "stylenerf/nerf.hpp"

#include <cmath>

#include "stylenerf/digest.hpp"
#include "stylenerf/encoding.hpp"
#include "stylenerf/error.hpp"

namespace stylenerf {

void NerfArchitecture::validate() const {
  require(depth >= 1 && depth <= 64, "nerf.arch.depth must lie in [1, 64]");
  require(width >= 4 && width <= 4096, "nerf.arch.width must lie in [4, 4096]");
  require(skip >= -1 && skip < depth, "nerf.arch.skip must be -1 (none) or a trunk layer index");
  require(position_levels >= 1 && position_levels <= 16, "nerf.arch.position_levels must lie in [1, 16]");
  require(direction_levels >= 1 && direction_levels <= 16, "nerf.arch.direction_levels must lie in [1, 16]");
}

Matrix encode_directions(const Matrix& directions, int levels) {
  require(directions.rows() == 3, "directions must be 3 x N");
  for (Eigen::Index i = 0; i < directions.cols(); ++i) {
    const float n = directions.col(i).norm();
    require(std::abs(n - 1.0f) < 1e-4f, "view direction is not unit length (norm " + std::to_string(n) + ")");
  }
  return encode_columns(directions, levels);
}

// ---------------------------------------------------------------- network

struct NerfNetwork::Trace : FieldTrace {
  Matrix enc_pos;
  Matrix enc_dir;
  std::vector<Matrix> trunk_out;
  Matrix sigma;
  Matrix feature;
  Matrix color_in;
  Matrix hidden;
  Matrix rgb;
};

NerfNetwork::NerfNetwork(const NerfArchitecture& arch, std::uint64_t seed) : arch_(arch) {
  arch.validate();
  Rng rng(seed);
  for (int i = 0; i < arch.depth; ++i) {
    int in = i == 0 ? arch.position_dim() : arch.width;
    if (i > 0 && i == arch.skip + 1) in += arch.position_dim();
    trunk_.emplace_back(in, arch.width, rng);
  }
  density_ = Linear(arch.width, 1, rng);
  feature_ = Linear(arch.width, arch.width, rng);
  color_hidden_ = Linear(arch.width + arch.direction_dim(), arch.width / 2, rng);
  color_out_ = Linear(arch.width / 2, 3, rng);
}

namespace {

Matrix stack(const Matrix& top, const Matrix& bottom) {
  Matrix out(top.rows() + bottom.rows(), top.cols());
  out.topRows(top.rows()) = top;
  out.bottomRows(bottom.rows()) = bottom;
  return out;
}

}  // namespace

Matrix NerfNetwork::trunk_impl(const Matrix& enc, int layers, std::vector<Matrix>* outputs) const {
  require(layers >= 1 && layers <= arch_.depth, "trunk: layer count out of range");
  require(enc.rows() == arch_.position_dim(), "trunk: encoded position has the wrong dimension");
  Matrix h;
  for (int i = 0; i < layers; ++i) {
    if (i == 0) {
      h = trunk_[0].forward(enc, Activation::kRelu);
    } else if (i == arch_.skip + 1) {
      h = trunk_[i].forward(stack(enc, h), Activation::kRelu);
    } else {
      h = trunk_[i].forward(h, Activation::kRelu);
    }
    if (outputs) outputs->push_back(h);
  }
  return h;
}

Matrix NerfNetwork::trunk(const Matrix& encoded_positions, int layers) const {
  return trunk_impl(encoded_positions, layers, nullptr);
}

FieldOutput NerfNetwork::query(const SampleBatch& batch) const {
  const Matrix enc_pos = encode_columns(batch.positions, arch_.position_levels);
  const Matrix enc_dir = encode_directions(batch.directions, arch_.direction_levels);
  const Matrix h = trunk_impl(enc_pos, arch_.depth, nullptr);
  FieldOutput out;
  out.sigma = density_.forward(h, Activation::kRelu);
  const Matrix hidden = color_hidden_.forward(stack(feature_.forward(h, Activation::kNone), enc_dir), Activation::kRelu);
  out.rgb = color_out_.forward(hidden, Activation::kSigmoid);
  return out;
}

FieldOutput NerfNetwork::query_train(const SampleBatch& batch, std::unique_ptr<FieldTrace>& trace) const {
  auto t = std::make_unique<Trace>();
  t->enc_pos = encode_columns(batch.positions, arch_.position_levels);
  t->enc_dir = encode_directions(batch.directions, arch_.direction_levels);
  trunk_impl(t->enc_pos, arch_.depth, &t->trunk_out);
  const Matrix& last = t->trunk_out.back();
  t->sigma = density_.forward(last, Activation::kRelu);
  t->feature = feature_.forward(last, Activation::kNone);
  t->color_in = stack(t->feature, t->enc_dir);
  t->hidden = color_hidden_.forward(t->color_in, Activation::kRelu);
  t->rgb = color_out_.forward(t->hidden, Activation::kSigmoid);
  FieldOutput out{t->sigma, t->rgb};
  trace = std::move(t);
  return out;
}

void NerfNetwork::backward(const FieldTrace& base, const Matrix& grad_sigma, const Matrix& grad_rgb) {
  const auto& t = static_cast<const Trace&>(base);
  const Matrix& last = t.trunk_out.back();
  Matrix g = grad_rgb;
  Matrix g_hidden = color_out_.backward(t.hidden, t.rgb, g, Activation::kSigmoid, true);
  Matrix g_in = color_hidden_.backward(t.color_in, t.hidden, g_hidden, Activation::kRelu, true);
  Matrix g_feature = g_in.topRows(arch_.width);
  Matrix g_h = feature_.backward(last, t.feature, g_feature, Activation::kNone, true);
  Matrix gs = grad_sigma;
  g_h += density_.backward(last, t.sigma, gs, Activation::kRelu, true);

  for (int i = arch_.depth - 1; i >= 0; --i) {
    const bool need = i > 0;
    if (i == 0) {
      trunk_[0].backward(t.enc_pos, t.trunk_out[0], g_h, Activation::kRelu, false);
    } else if (i == arch_.skip + 1) {
      Matrix gx = trunk_[i].backward(stack(t.enc_pos, t.trunk_out[i - 1]), t.trunk_out[i], g_h, Activation::kRelu, need);
      g_h = gx.bottomRows(arch_.width);
    } else {
      g_h = trunk_[i].backward(t.trunk_out[i - 1], t.trunk_out[i], g_h, Activation::kRelu, need);
    }
  }
}

void NerfNetwork::append_parameters(ParameterList& out, const std::string& prefix) {
  for (std::size_t i = 0; i < trunk_.size(); ++i) trunk_[i].append_parameters(out, prefix + ".trunk." + std::to_string(i));
  density_.append_parameters(out, prefix + ".density");
  feature_.append_parameters(out, prefix + ".feature");
  color_hidden_.append_parameters(out, prefix + ".color.0");
  color_out_.append_parameters(out, prefix + ".color.1");
}

ParameterList NerfNetwork::parameters(const std::string& prefix) {
  ParameterList p;
  append_parameters(p, prefix);
  return p;
}

void NerfNetwork::zero_grad() {
  for (Linear& l : trunk_) l.zero_grad();
  density_.zero_grad();
  feature_.zero_grad();
  color_hidden_.zero_grad();
  color_out_.zero_grad();
}

std::string NerfNetwork::trunk_digest(int layers) const {
  require(layers >= 1 && layers <= arch_.depth, "trunk_digest: layer count out of range");
  Sha256 h;
  h.update("trunk/" + std::to_string(layers));
  for (int i = 0; i < layers; ++i) trunk_[i].hash_into(h);
  return h.hex();
}

std::string NerfNetwork::digest() const {
  Sha256 h;
  for (const Linear& l : trunk_) l.hash_into(h);
  density_.hash_into(h);
  feature_.hash_into(h);
  color_hidden_.hash_into(h);
  color_out_.hash_into(h);
  return h.hex();
}

// ---------------------------------------------------------------- config

RenderOptions NerfTrainConfig::render_options(bool training, const std::array<float, 3>& background) const {
  RenderOptions o;
  o.n_coarse = n_coarse;
  o.n_fine = n_fine;
  o.perturb = training && perturb;
  o.background = background;
  return o;
}

void to_json(nlohmann::json& j, const NerfArchitecture& a) {
  j = {{"depth", a.depth},
       {"width", a.width},
       {"skip", a.skip},
       {"position_levels", a.position_levels},
       {"direction_levels", a.direction_levels}};
}

void from_json(const nlohmann::json& j, NerfArchitecture& a) {
  a.depth = j.value("depth", a.depth);
  a.width = j.value("width", a.width);
  a.skip = j.value("skip", a.skip);
  a.position_levels = j.value("position_levels", a.position_levels);
  a.direction_levels = j.value("direction_levels", a.direction_levels);
}

void to_json(nlohmann::json& j, const NerfTrainConfig& c) {
  j = {{"arch", c.arch},
       {"n_coarse", c.n_coarse},
       {"n_fine", c.n_fine},
       {"batch_rays", c.batch_rays},
       {"learning_rate", c.learning_rate},
       {"lr_decay_rate", c.lr_decay_rate},
       {"lr_decay_steps", c.lr_decay_steps},
       {"steps", c.steps},
       {"seed", c.seed},
       {"precrop_steps", c.precrop_steps},
       {"precrop_fraction", c.precrop_fraction},
       {"perturb", c.perturb},
       {"log_every", c.log_every}};
}

void from_json(const nlohmann::json& j, NerfTrainConfig& c) {
  if (j.contains("arch")) c.arch = j.at("arch").get<NerfArchitecture>();
  c.n_coarse = j.value("n_coarse", c.n_coarse);
  c.n_fine = j.value("n_fine", c.n_fine);
  c.batch_rays = j.value("batch_rays", c.batch_rays);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.lr_decay_rate = j.value("lr_decay_rate", c.lr_decay_rate);
  c.lr_decay_steps = j.value("lr_decay_steps", c.lr_decay_steps);
  c.steps = j.value("steps", c.steps);
  c.seed = j.value("seed", c.seed);
  c.precrop_steps = j.value("precrop_steps", c.precrop_steps);
  c.precrop_fraction = j.value("precrop_fraction", c.precrop_fraction);
  c.perturb = j.value("perturb", c.perturb);
  c.log_every = j.value("log_every", c.log_every);
}

void validate(const NerfTrainConfig& c) {
  c.arch.validate();
  require(c.n_coarse >= 2 && c.n_coarse <= 1024, "nerf.n_coarse must lie in [2, 1024]");
  require(c.n_fine >= 0 && c.n_fine <= 2048, "nerf.n_fine must lie in [0, 2048]");
  require(c.batch_rays >= 1, "nerf.batch_rays must be >= 1");
  require(c.learning_rate > 0.0f && std::isfinite(c.learning_rate), "nerf.learning_rate must be positive");
  require(c.lr_decay_rate > 0.0 && c.lr_decay_rate <= 1.0, "nerf.lr_decay_rate must lie in (0, 1]");
  require(c.lr_decay_steps >= 1, "nerf.lr_decay_steps must be >= 1");
  require(c.steps >= 0, "nerf.steps must be >= 0");
  require(c.precrop_steps >= 0, "nerf.precrop_steps must be >= 0");
  require(c.precrop_fraction > 0.0 && c.precrop_fraction <= 1.0, "nerf.precrop_fraction must lie in (0, 1]");
  require(c.log_every >= 1, "nerf.log_every must be >= 1");
}

// ---------------------------------------------------------------- model

NerfModel::NerfModel(const NerfTrainConfig& cfg, double near_, double far_, const std::array<float, 3>& bg)
    : config(cfg), coarse(cfg.arch, cfg.seed * 2 + 11), fine(cfg.arch, cfg.seed * 2 + 12), near(near_), far(far_),
      background(bg) {}

ParameterList NerfModel::parameters() {
  ParameterList p;
  coarse.append_parameters(p, "coarse");
  fine.append_parameters(p, "fine");
  return p;
}

std::string NerfModel::digest() const {
  Sha256 h;
  h.update(coarse.digest());
  h.update(fine.digest());
  return h.hex();
}

// ---------------------------------------------------------------- training

namespace {

Rng step_rng(std::uint64_t seed, int step) {
  return Rng(seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(step) * 0xD1B54A32D192ED03ULL + 7);
}

}  // namespace

NerfTrainer::NerfTrainer(const SceneDataset& scene, const NerfTrainConfig& config)
    : config_(config), model_(config, scene.near, scene.far, scene.background),
      optimizer_(AdamConfig{config.learning_rate}) {
  validate(config);
  const SceneDataset train = scene.subset("train");
  require(train.size() >= 2, "train_nerf: need at least 2 training views, got " + std::to_string(train.size()));
  train.validate();
  std::vector<Ray> rays;
  std::vector<float> targets;
  const int w = train.width(), h = train.height();
  const double f = config.precrop_fraction;
  const int x0 = static_cast<int>(w * (1 - f) / 2), x1 = w - x0;
  const int y0 = static_cast<int>(h * (1 - f) / 2), y1 = h - y0;
  for (std::size_t v = 0; v < train.size(); ++v) {
    const auto r = generate_rays(train.poses[v], train.near, train.far);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const int idx = static_cast<int>(rays.size());
        if (x >= x0 && x < x1 && y >= y0 && y < y1) center_rays_.push_back(idx);
        rays.push_back(r[static_cast<std::size_t>(y) * w + x]);
        for (int c = 0; c < 3; ++c) targets.push_back(train.images[v].at(x, y, c));
      }
    }
  }
  all_rays_ = RayBatch::from_rays(rays);
  all_targets_ = Eigen::Map<Matrix>(targets.data(), 3, static_cast<Eigen::Index>(rays.size()));
  ParameterList params = model_.parameters();
  zero_grad(params);
}

NerfStepLog NerfTrainer::step() {
  const int step = steps_done_;
  Rng rng = step_rng(config_.seed, step);
  const bool crop = step < config_.precrop_steps && !center_rays_.empty();
  const int pool = crop ? static_cast<int>(center_rays_.size()) : all_rays_.size();

  RayBatch batch;
  batch.near = all_rays_.near;
  batch.far = all_rays_.far;
  batch.origins.resize(3, config_.batch_rays);
  batch.directions.resize(3, config_.batch_rays);
  Matrix target(3, config_.batch_rays);
  for (int i = 0; i < config_.batch_rays; ++i) {
    int idx = static_cast<int>(rng.below(pool));
    if (crop) idx = center_rays_[idx];
    batch.origins.col(i) = all_rays_.origins.col(idx);
    batch.directions.col(i) = all_rays_.directions.col(idx);
    target.col(i) = all_targets_.col(idx);
  }

  const double lr = config_.learning_rate *
                    std::pow(config_.lr_decay_rate, static_cast<double>(step) / config_.lr_decay_steps);
  optimizer_.set_learning_rate(static_cast<float>(lr));
  ParameterList params = model_.parameters();
  zero_grad(params);
  const TrainRaysResult res = train_rays(model_.coarse, &model_.fine, batch, target,
                                         config_.render_options(true, model_.background), &rng);
  optimizer_.step(params);
  ++steps_done_;
  const double mse = config_.n_fine > 0 ? res.mse_fine : res.mse_coarse;
  return {step, res.loss, psnr_from_mse(mse), lr};
}

ModelCheckpoint to_model_checkpoint(NerfModel& model, int steps_done) {
  ModelCheckpoint m;
  m.stage = Stage::kNerf;
  m.config = model.config;
  m.metadata = {{"near", model.near}, {"far", model.far}, {"background", model.background}, {"steps_done", steps_done}};
  m.digests["trunk.coarse"] = model.coarse.trunk_digest(model.config.arch.depth);
  m.digests["trunk.fine"] = model.fine.trunk_digest(model.config.arch.depth);
  m.tensors = export_tensors(model.parameters());
  return m;
}

ModelCheckpoint NerfTrainer::checkpoint() {
  ModelCheckpoint m = to_model_checkpoint(model_, steps_done_);
  const auto adam = optimizer_.export_state(model_.parameters());
  m.tensors.insert(m.tensors.end(), adam.begin(), adam.end());
  return m;
}

void NerfTrainer::resume(const ModelCheckpoint& ckpt) {
  if (ckpt.stage != Stage::kNerf) throw StageTagError("expected a nerf checkpoint, got '" + stage_name(ckpt.stage) + "'");
  ParameterList params = model_.parameters();
  import_tensors(params, ckpt.tensors);
  optimizer_.import_state(params, ckpt.with_prefix("adam."));
  steps_done_ = ckpt.metadata.value("steps_done", 0);
}

NerfModel nerf_from_model(const ModelCheckpoint& ckpt) {
  if (ckpt.stage != Stage::kNerf) throw StageTagError("expected a nerf checkpoint, got '" + stage_name(ckpt.stage) + "'");
  NerfTrainConfig cfg = ckpt.config.get<NerfTrainConfig>();
  validate(cfg);
  NerfModel model(cfg, ckpt.metadata.at("near").get<double>(), ckpt.metadata.at("far").get<double>(),
                  ckpt.metadata.at("background").get<std::array<float, 3>>());
  ParameterList params = model.parameters();
  import_tensors(params, ckpt.tensors);
  return model;
}

ModelCheckpoint train_nerf(const SceneDataset& scene, const NerfTrainConfig& config,
                           const std::function<void(const NerfStepLog&)>& log) {
  NerfTrainer trainer(scene, config);
  while (trainer.steps_done() < config.steps) {
    const NerfStepLog entry = trainer.step();
    if (log) log(entry);
  }
  return trainer.checkpoint();
}

double evaluate_psnr(const NerfModel& model, const SceneDataset& views) {
  require(views.size() > 0, "evaluate_psnr: no views");
  const RenderOptions opt = model.config.render_options(false, model.background);
  double total = 0.0;
  for (std::size_t v = 0; v < views.size(); ++v) {
    const Image img = render_image(model.coarse, &model.fine, views.poses[v], model.near, model.far, opt);
    total += psnr_from_mse(mean_squared_error(img, views.images[v]));
  }
  return total / static_cast<double>(views.size());
}

}  // namespace stylenerf
