// Copyright 2026 The stylenerf Authors
// SPDX-License-Identifier: Apache-2.0

#include "stylenerf/adain.hpp"

#include <cmath>

#include "stylenerf/error.hpp"
#include "stylenerf/kernels.hpp"

namespace stylenerf {

namespace {

constexpr float kInputOffset = 0.5f;

FeatureMap preprocess(const FeatureMap& rgb) {
  FeatureMap x = rgb;
  for (float& v : x.values) v -= kInputOffset;
  return x;
}

void moments(const FeatureMap& f, std::vector<float>& mean, std::vector<float>& stddev) {
  mean.resize(f.channels);
  stddev.resize(f.channels);
  kernels::parallel::channel_moments(f.channels, static_cast<int>(f.pixels()), f.values, mean, stddev);
}

}  // namespace

// ---------------------------------------------------------------- statistics

int StyleStatistics::flattened_dim() const {
  int n = 0;
  for (const auto& m : means) n += 2 * static_cast<int>(m.size());
  return n;
}

std::vector<int> StyleStatistics::layer_channels() const {
  std::vector<int> c;
  for (const auto& m : means) c.push_back(static_cast<int>(m.size()));
  return c;
}

std::vector<float> StyleStatistics::flatten() const {
  std::vector<float> flat;
  flat.reserve(flattened_dim());
  for (std::size_t l = 0; l < means.size(); ++l) {
    flat.insert(flat.end(), means[l].begin(), means[l].end());
    flat.insert(flat.end(), stds[l].begin(), stds[l].end());
  }
  return flat;
}

StyleStatistics StyleStatistics::unflatten(std::span<const float> flat, std::span<const int> channels) {
  std::size_t expected = 0;
  for (int c : channels) expected += 2 * static_cast<std::size_t>(c);
  require(flat.size() == expected, "style statistics: flattened length " + std::to_string(flat.size()) +
                                       " does not match layer channels (" + std::to_string(expected) + ")");
  StyleStatistics s;
  std::size_t o = 0;
  for (int c : channels) {
    s.means.emplace_back(flat.begin() + o, flat.begin() + o + c);
    o += c;
    s.stds.emplace_back(flat.begin() + o, flat.begin() + o + c);
    o += c;
  }
  s.validate();
  return s;
}

void StyleStatistics::validate() const {
  require(means.size() == stds.size(), "style statistics: mean/std layer count mismatch");
  for (std::size_t l = 0; l < means.size(); ++l) {
    require(means[l].size() == stds[l].size(), "style statistics: mean/std channel mismatch");
    for (float v : means[l]) require(std::isfinite(v), "style statistics: non-finite mean");
    for (float v : stds[l]) require(std::isfinite(v) && v >= 0.0f, "style statistics: std must be finite and >= 0");
  }
}

StyleStatistics feature_statistics(const EncoderFeatures& features) {
  StyleStatistics s;
  s.means.resize(features.layers.size());
  s.stds.resize(features.layers.size());
  for (std::size_t l = 0; l < features.layers.size(); ++l) moments(features.layers[l], s.means[l], s.stds[l]);
  return s;
}

StyleStatistics extract_style_statistics(const Encoder& encoder, const Image& style_image) {
  return feature_statistics(encoder.encode(style_image));
}

// ---------------------------------------------------------------- encoder

std::vector<int> Encoder::tap_ops() { return {1, 6, 11, 20}; }

ConvNet Encoder::build_layout(Rng* rng) {
  // Weights are placeholders when rng is null (overwritten by from_tensors).
  Rng scratch(0);
  Rng& r = rng ? *rng : scratch;
  ConvNet net;
  auto conv = [&](int in, int out) {
    net.add_conv(Conv2d(in, out, 3, r, ConvInit::kHeNormal));
    net.add_relu();
  };
  conv(3, 64);  // relu1_1
  conv(64, 64);
  net.add_max_pool();
  conv(64, 128);  // relu2_1
  conv(128, 128);
  net.add_max_pool();
  conv(128, 256);  // relu3_1
  conv(256, 256);
  conv(256, 256);
  conv(256, 256);
  net.add_max_pool();
  conv(256, 512);  // relu4_1
  return net;
}

Encoder Encoder::standard(std::uint64_t seed) {
  Rng rng(seed);
  Encoder e;
  e.net_ = build_layout(&rng);
  for (Conv2d& c : e.net_.convs()) {
    // Column index = (in * 3 + ky) * 3 + kx; copy kx = 0 onto kx = 2.
    for (Eigen::Index col = 0; col < c.weight.cols(); col += 3) c.weight.col(col + 2) = c.weight.col(col);
  }
  e.identifier_ = "vgg19-relu4_1/he-normal-mirror-symmetric/seed=" + std::to_string(seed);
  return e;
}

Encoder Encoder::from_tensors(const std::vector<NamedTensor>& tensors, std::string identifier) {
  Encoder e;
  e.net_ = build_layout(nullptr);
  ParameterList params;
  e.net_.append_parameters(params, "encoder");
  import_tensors(params, tensors);
  e.identifier_ = std::move(identifier);
  return e;
}

std::vector<NamedTensor> Encoder::export_weights() const {
  ConvNet copy = net_;
  ParameterList params;
  copy.append_parameters(params, "encoder");
  return export_tensors(params);
}

void Encoder::validate_input(int channels, int height, int width) {
  require(channels == 3, "encoder: expected an RGB input");
  require(height >= kMinImageSize && width >= kMinImageSize,
          "encoder: image is " + std::to_string(width) + "x" + std::to_string(height) +
              ", both sides must be >= " + std::to_string(kMinImageSize));
  require(height % 8 == 0 && width % 8 == 0, "encoder: image sides must be divisible by 8");
}

EncoderFeatures Encoder::encode(const Image& image) const { return encode(to_feature_map(image)); }

EncoderFeatures Encoder::encode(const FeatureMap& rgb) const {
  validate_input(rgb.channels, rgb.height, rgb.width);
  EncoderFeatures f;
  net_.forward(preprocess(rgb), nullptr, tap_ops(), &f.layers);
  return f;
}

EncoderFeatures Encoder::encode(const FeatureMap& rgb, ConvNet::Trace& trace) const {
  validate_input(rgb.channels, rgb.height, rgb.width);
  EncoderFeatures f;
  net_.forward(preprocess(rgb), &trace, tap_ops(), &f.layers);
  return f;
}

FeatureMap Encoder::backward(const ConvNet::Trace& trace, const std::vector<FeatureMap>& layer_grads) const {
  return net_.backward_input(trace, FeatureMap{}, tap_ops(), layer_grads);
}

// ---------------------------------------------------------------- decoder

Decoder::Decoder(std::uint64_t seed) {
  Rng rng(seed);
  auto conv = [&](int in, int out, bool relu) {
    net_.add_conv(Conv2d(in, out, 3, rng, ConvInit::kUniformFanIn));
    if (relu) net_.add_relu();
  };
  conv(512, 256, true);
  net_.add_upsample();
  conv(256, 256, true);
  conv(256, 256, true);
  conv(256, 256, true);
  conv(256, 128, true);
  net_.add_upsample();
  conv(128, 128, true);
  conv(128, 64, true);
  net_.add_upsample();
  conv(64, 64, true);
  conv(64, 3, false);
}

FeatureMap Decoder::forward(const FeatureMap& features) const {
  require(features.channels == kStatisticChannels.back(),
          "decoder: expected " + std::to_string(kStatisticChannels.back()) + " channels, got " +
              std::to_string(features.channels));
  require(features.height >= kMinImageSize / 8 && features.width >= kMinImageSize / 8,
          "decoder: feature map too small");
  return net_.forward(features);
}

FeatureMap Decoder::forward(const FeatureMap& features, ConvNet::Trace& trace) const {
  require(features.channels == kStatisticChannels.back(), "decoder: expected relu4_1 features");
  return net_.forward(features, &trace);
}

void Decoder::backward(const ConvNet::Trace& trace, const FeatureMap& grad_output) {
  net_.backward(trace, grad_output, false);
}

Image Decoder::decode(const FeatureMap& features) const { return from_feature_map(forward(features)); }

ParameterList Decoder::parameters() {
  ParameterList p;
  net_.append_parameters(p, "decoder");
  return p;
}

// ---------------------------------------------------------------- adain

FeatureMap adain_transform(const FeatureMap& content, std::span<const float> style_mean,
                           std::span<const float> style_std) {
  require(style_mean.size() == static_cast<std::size_t>(content.channels) &&
              style_std.size() == static_cast<std::size_t>(content.channels),
          "adain: content has " + std::to_string(content.channels) + " channels, style statistics have " +
              std::to_string(style_mean.size()));
  std::vector<float> mu, sigma;
  moments(content, mu, sigma);
  FeatureMap out(content.channels, content.height, content.width);
  const std::size_t p = content.pixels();
  for (int c = 0; c < content.channels; ++c) {
    const float scale = style_std[c] / (sigma[c] + kAdainEpsilon);
    const float* in = content.values.data() + c * p;
    float* o = out.values.data() + c * p;
    for (std::size_t i = 0; i < p; ++i) o[i] = scale * (in[i] - mu[c]) + style_mean[c];
  }
  return out;
}

namespace {

AdainLoss loss_impl(const EncoderFeatures& stylized, const FeatureMap& target, const StyleStatistics& style,
                    double lambda, std::vector<FeatureMap>* grads) {
  require(lambda >= 0.0, "adain loss: lambda must be >= 0");
  require(stylized.layers.size() == style.means.size(), "adain loss: layer count mismatch");
  const FeatureMap& deep = stylized.deepest();
  require(deep.same_shape(target), "adain loss: content target shape mismatch");
  if (grads) {
    grads->clear();
    for (const FeatureMap& f : stylized.layers) grads->emplace_back(f.channels, f.height, f.width);
  }

  AdainLoss loss;
  const double n = static_cast<double>(deep.values.size());
  double sq = 0.0;
  for (std::size_t i = 0; i < deep.values.size(); ++i) {
    const double d = static_cast<double>(deep.values[i]) - target.values[i];
    sq += d * d;
    if (grads) grads->back().values[i] += static_cast<float>(2.0 * d / n);
  }
  loss.content = sq / n;

  double style_loss = 0.0;
  for (std::size_t l = 0; l < stylized.layers.size(); ++l) {
    const FeatureMap& f = stylized.layers[l];
    std::vector<float> mu, sigma;
    moments(f, mu, sigma);
    require(mu.size() == style.means[l].size(), "adain loss: statistic channel mismatch");
    const double channels = static_cast<double>(f.channels);
    const double pixels = static_cast<double>(f.pixels());
    double mean_term = 0.0, std_term = 0.0;
    for (int c = 0; c < f.channels; ++c) {
      const double dm = static_cast<double>(mu[c]) - style.means[l][c];
      const double ds = static_cast<double>(sigma[c]) - style.stds[l][c];
      mean_term += dm * dm;
      std_term += ds * ds;
      if (grads) {
        const double g_mean = lambda * 2.0 * dm / (channels * pixels);
        const double g_std = sigma[c] > 1e-12f ? lambda * 2.0 * ds / (channels * pixels * sigma[c]) : 0.0;
        float* g = (*grads)[l].values.data() + c * f.pixels();
        const float* v = f.values.data() + c * f.pixels();
        for (std::size_t i = 0; i < f.pixels(); ++i) {
          g[i] += static_cast<float>(g_mean + g_std * (static_cast<double>(v[i]) - mu[c]));
        }
      }
    }
    style_loss += mean_term / channels + std_term / channels;
  }
  loss.style = style_loss;
  loss.total = loss.content + lambda * loss.style;
  return loss;
}

}  // namespace

AdainLoss adain_loss(const EncoderFeatures& stylized, const FeatureMap& content_target,
                     const StyleStatistics& style, double lambda) {
  return loss_impl(stylized, content_target, style, lambda, nullptr);
}

AdainLoss adain_loss_with_grad(const EncoderFeatures& stylized, const FeatureMap& content_target,
                               const StyleStatistics& style, double lambda,
                               std::vector<FeatureMap>& layer_grads) {
  return loss_impl(stylized, content_target, style, lambda, &layer_grads);
}

// ---------------------------------------------------------------- training

AdainTrainer::AdainTrainer(const Encoder& encoder, std::vector<Image> content, std::vector<Image> styles,
                           AdainTrainConfig config)
    : encoder_(encoder), config_(config), decoder_(config.seed + 1), optimizer_(AdamConfig{config.learning_rate}) {
  require(!content.empty(), "train_adain: content corpus is empty");
  require(!styles.empty(), "train_adain: style corpus is empty");
  validate(config);
  for (Image& img : content) content_.push_back(resize_shorter_side(composite_over(img, {1, 1, 1}), config.resize_shorter));
  for (Image& img : styles) styles_.push_back(resize_shorter_side(composite_over(img, {1, 1, 1}), config.resize_shorter));
}

std::vector<AdainTrainer::Sample> AdainTrainer::draw_batch(int step_index) const {
  Rng rng(config_.seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(step_index) + 1);
  auto random_crop = [&](const Image& img) {
    const int x0 = static_cast<int>(rng.below(img.width - config_.crop_size + 1));
    const int y0 = static_cast<int>(rng.below(img.height - config_.crop_size + 1));
    return to_feature_map(crop(img, x0, y0, config_.crop_size, config_.crop_size));
  };
  std::vector<Sample> batch;
  for (int b = 0; b < config_.batch_size; ++b) {
    const Image& c = content_[rng.below(content_.size())];
    const Image& s = styles_[rng.below(styles_.size())];
    Sample sample;
    sample.content = random_crop(c);
    sample.style = random_crop(s);
    batch.push_back(std::move(sample));
  }
  return batch;
}

AdainLoss AdainTrainer::step() {
  const auto batch = draw_batch(steps_done_);
  ParameterList params = decoder_.parameters();
  zero_grad(params);
  AdainLoss mean_loss;
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (const Sample& s : batch) {
    const FeatureMap content_feat = encoder_.encode(s.content).deepest();
    const StyleStatistics style_stats = feature_statistics(encoder_.encode(s.style));
    const FeatureMap target = adain_transform(content_feat, style_stats.means.back(), style_stats.stds.back());

    ConvNet::Trace dec_trace, enc_trace;
    const FeatureMap out = decoder_.forward(target, dec_trace);
    const EncoderFeatures out_feat = encoder_.encode(out, enc_trace);
    std::vector<FeatureMap> grads;
    const AdainLoss l = adain_loss_with_grad(out_feat, target, style_stats, config_.lambda, grads);
    for (FeatureMap& g : grads)
      for (float& v : g.values) v *= static_cast<float>(inv_b);
    decoder_.backward(dec_trace, encoder_.backward(enc_trace, grads));
    mean_loss.content += l.content * inv_b;
    mean_loss.style += l.style * inv_b;
  }
  mean_loss.total = mean_loss.content + config_.lambda * mean_loss.style;
  optimizer_.step(params);
  ++steps_done_;
  return mean_loss;
}

void AdainTrainer::resume(const AdainCheckpoint& checkpoint) {
  if (checkpoint.encoder_digest != encoder_.digest()) {
    throw DigestMismatchError("adain checkpoint was trained with encoder " + checkpoint.encoder_identifier +
                              " (digest mismatch)");
  }
  ParameterList params = decoder_.parameters();
  import_tensors(params, checkpoint.decoder);
  optimizer_.import_state(params, checkpoint.optimizer);
  steps_done_ = checkpoint.steps_done;
}

AdainCheckpoint AdainTrainer::checkpoint() {
  ParameterList params = decoder_.parameters();
  AdainCheckpoint ckpt;
  ckpt.decoder = export_tensors(params);
  ckpt.optimizer = optimizer_.export_state(params);
  ckpt.encoder_identifier = encoder_.identifier();
  ckpt.encoder_digest = encoder_.digest();
  ckpt.config = config_;
  ckpt.steps_done = steps_done_;
  return ckpt;
}

AdainLoss evaluate_adain(const Encoder& encoder, const Decoder& decoder, const Image& content,
                         const Image& style, double lambda) {
  const FeatureMap content_feat = encoder.encode(content).deepest();
  const StyleStatistics stats = extract_style_statistics(encoder, style);
  const FeatureMap target = adain_transform(content_feat, stats.means.back(), stats.stds.back());
  return adain_loss(encoder.encode(decoder.forward(target)), target, stats, lambda);
}

AdainCheckpoint train_adain(const Encoder& encoder, std::vector<Image> content, std::vector<Image> styles,
                            const AdainTrainConfig& config,
                            const std::function<void(const AdainStepLog&)>& log) {
  AdainTrainer trainer(encoder, std::move(content), std::move(styles), config);
  while (trainer.steps_done() < config.steps) {
    const int step = trainer.steps_done();
    const AdainLoss loss = trainer.step();
    if (log) log({step, loss});
  }
  return trainer.checkpoint();
}

void to_json(nlohmann::json& j, const AdainTrainConfig& c) {
  j = {{"steps", c.steps},          {"batch_size", c.batch_size}, {"learning_rate", c.learning_rate},
       {"lambda", c.lambda},        {"crop_size", c.crop_size},   {"resize_shorter", c.resize_shorter},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, AdainTrainConfig& c) {
  c.steps = j.value("steps", c.steps);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.lambda = j.value("lambda", c.lambda);
  c.crop_size = j.value("crop_size", c.crop_size);
  c.resize_shorter = j.value("resize_shorter", c.resize_shorter);
  c.seed = j.value("seed", c.seed);
}

void validate(const AdainTrainConfig& c) {
  require(c.steps >= 0, "adain.steps must be >= 0");
  require(c.batch_size >= 1, "adain.batch_size must be >= 1");
  require(c.learning_rate > 0.0f && std::isfinite(c.learning_rate), "adain.learning_rate must be positive");
  require(c.lambda >= 0.0 && std::isfinite(c.lambda), "adain.lambda must be >= 0");
  require(c.crop_size >= kMinImageSize && c.crop_size % 8 == 0,
          "adain.crop_size must be >= 32 and divisible by 8");
  require(c.resize_shorter >= c.crop_size, "adain.resize_shorter must be >= adain.crop_size");
}

ModelCheckpoint to_model_checkpoint(const AdainCheckpoint& ckpt) {
  ModelCheckpoint m;
  m.stage = Stage::kAdain;
  m.config = ckpt.config;
  m.digests["encoder"] = ckpt.encoder_digest;
  m.metadata = {{"encoder_identifier", ckpt.encoder_identifier}, {"steps_done", ckpt.steps_done}};
  m.tensors = ckpt.decoder;
  m.tensors.insert(m.tensors.end(), ckpt.optimizer.begin(), ckpt.optimizer.end());
  return m;
}

AdainCheckpoint adain_from_model(const ModelCheckpoint& m) {
  if (m.stage != Stage::kAdain) {
    throw StageTagError("expected an adain checkpoint, got stage '" + stage_name(m.stage) + "'");
  }
  AdainCheckpoint c;
  c.config = m.config.get<AdainTrainConfig>();
  const auto it = m.digests.find("encoder");
  if (it == m.digests.end()) throw CorruptArchiveError("adain checkpoint has no encoder digest");
  c.encoder_digest = it->second;
  c.encoder_identifier = m.metadata.value("encoder_identifier", std::string());
  c.steps_done = m.metadata.value("steps_done", 0);
  c.decoder = m.with_prefix("decoder.");
  c.optimizer = m.with_prefix("adam.");
  return c;
}

// ---------------------------------------------------------------- inference

Stylizer::Stylizer(const Encoder& encoder, const AdainCheckpoint& checkpoint) : encoder_(encoder) {
  if (checkpoint.encoder_digest != encoder.digest()) {
    throw DigestMismatchError("adain checkpoint expects encoder '" + checkpoint.encoder_identifier +
                              "' but a different encoder was supplied");
  }
  ParameterList params = decoder_.parameters();
  import_tensors(params, checkpoint.decoder);
}

Image Stylizer::stylize(const Image& content, const Image& style, double alpha) const {
  return stylize(content, extract_style_statistics(encoder_, style), alpha);
}

Image Stylizer::stylize(const Image& content, const StyleStatistics& style, double alpha) const {
  require(alpha >= 0.0 && alpha <= 1.0, "stylize: alpha must lie in [0, 1]");
  style.validate();
  const FeatureMap f = encoder_.encode(content).deepest();
  FeatureMap t = adain_transform(f, style.means.back(), style.stds.back());
  const float a = static_cast<float>(alpha);
  for (std::size_t i = 0; i < t.values.size(); ++i) t.values[i] = a * t.values[i] + (1.0f - a) * f.values[i];
  return decoder_.decode(t);
}

}  // namespace stylenerf
