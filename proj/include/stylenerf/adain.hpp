// Copyright 2026 The stylenerf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// 2D stylization: a frozen VGG-style encoder, adaptive instance normalization,
// a trainable mirrored decoder and the content + style loss used to train it.

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "stylenerf/checkpoint.hpp"
#include "stylenerf/conv.hpp"
#include "stylenerf/image.hpp"
#include "stylenerf/nn.hpp"

namespace stylenerf {

constexpr float kAdainEpsilon = 1e-5f;
constexpr std::array<int, 4> kStatisticChannels{64, 128, 256, 512};
constexpr int kStyleDim = 2 * (64 + 128 + 256 + 512);  // 1920
constexpr std::uint64_t kEncoderSeed = 0x56474731394aULL;
constexpr int kMinImageSize = 32;

/// Channelwise feature means and (population) standard deviations at each
/// statistic layer. Flattened layout: mean_0, std_0, mean_1, std_1, ...
struct StyleStatistics {
  std::vector<std::vector<float>> means;
  std::vector<std::vector<float>> stds;

  int flattened_dim() const;
  std::vector<int> layer_channels() const;
  std::vector<float> flatten() const;
  static StyleStatistics unflatten(std::span<const float> flat, std::span<const int> channels);
  void validate() const;
};

struct EncoderFeatures {
  std::vector<FeatureMap> layers;  // relu1_1, relu2_1, relu3_1, relu4_1
  const FeatureMap& deepest() const { return layers.back(); }
};

/// VGG-19 prefix up to relu4_1 with frozen weights. The built-in weights are
/// He-normal from a fixed seed with every 3x3 filter made left-right
/// symmetric, so the network commutes with horizontal mirroring and the
/// statistics of an image and of its mirror agree. Pretrained weights can be
/// supplied with from_tensors().
class Encoder {
 public:
  static Encoder standard(std::uint64_t seed = kEncoderSeed);
  static Encoder from_tensors(const std::vector<NamedTensor>& tensors, std::string identifier);

  // Throws ValidationError unless the map has 3 channels and both sides are
  // >= 32 and divisible by 8.
  static void validate_input(int channels, int height, int width);

  EncoderFeatures encode(const Image& image) const;
  EncoderFeatures encode(const FeatureMap& rgb) const;
  EncoderFeatures encode(const FeatureMap& rgb, ConvNet::Trace& trace) const;
  // dL/d(rgb input) given gradients at each statistic layer (empty = zero).
  FeatureMap backward(const ConvNet::Trace& trace, const std::vector<FeatureMap>& layer_grads) const;

  const std::string& identifier() const { return identifier_; }
  std::string digest() const { return net_.digest(); }
  std::vector<NamedTensor> export_weights() const;
  static std::vector<int> tap_ops();

 private:
  Encoder() = default;
  static ConvNet build_layout(Rng* rng);

  ConvNet net_;
  std::string identifier_;
};

// Nearest-upsampling mirror of the encoder, relu4_1 (512 channels) -> RGB.
class Decoder {
 public:
  explicit Decoder(std::uint64_t seed = 1);

  // Unclamped output, same spatial size as the encoder input.
  FeatureMap forward(const FeatureMap& features) const;
  FeatureMap forward(const FeatureMap& features, ConvNet::Trace& trace) const;
  void backward(const ConvNet::Trace& trace, const FeatureMap& grad_output);
  // Clamped image.
  Image decode(const FeatureMap& features) const;

  ParameterList parameters();
  std::string digest() const { return net_.digest(); }
  void zero_grad() { net_.zero_grad(); }

 private:
  ConvNet net_;
};

StyleStatistics feature_statistics(const EncoderFeatures& features);
StyleStatistics extract_style_statistics(const Encoder& encoder, const Image& style_image);

// style_std * (content - mu_c) / (sigma_c + eps) + style_mean, per channel.
FeatureMap adain_transform(const FeatureMap& content, std::span<const float> style_mean,
                           std::span<const float> style_std);

struct AdainLoss {
  double total = 0.0;
  double content = 0.0;
  double style = 0.0;
};

/// content: mean squared error between the deepest features of the stylized
/// image and `content_target`. style: sum over statistic layers of the mean
/// squared errors of channel means and of channel stds. total = content + lambda * style.
AdainLoss adain_loss(const EncoderFeatures& stylized, const FeatureMap& content_target,
                     const StyleStatistics& style, double lambda);

// The same loss plus its gradients at every statistic layer of `stylized`.
AdainLoss adain_loss_with_grad(const EncoderFeatures& stylized, const FeatureMap& content_target,
                               const StyleStatistics& style, double lambda,
                               std::vector<FeatureMap>& layer_grads);

struct AdainTrainConfig {
  int steps = 2000;
  int batch_size = 4;
  float learning_rate = 1e-4f;
  double lambda = 10.0;
  int crop_size = 256;
  int resize_shorter = 512;
  std::uint64_t seed = 0;
};

struct AdainStepLog {
  int step = 0;
  AdainLoss loss;
};

// Decoder weights plus everything needed to validate and resume them.
struct AdainCheckpoint {
  std::vector<NamedTensor> decoder;
  std::vector<NamedTensor> optimizer;
  std::string encoder_identifier;
  std::string encoder_digest;
  AdainTrainConfig config;
  int steps_done = 0;
};

void to_json(nlohmann::json& j, const AdainTrainConfig& c);
void from_json(const nlohmann::json& j, AdainTrainConfig& c);
void validate(const AdainTrainConfig& c);

// Archive form (stage "adain"). from_model throws StageTagError for other stages.
ModelCheckpoint to_model_checkpoint(const AdainCheckpoint& ckpt);
AdainCheckpoint adain_from_model(const ModelCheckpoint& ckpt);

class AdainTrainer {
 public:
  // Images are resized so the shorter side is config.resize_shorter; crops are
  // config.crop_size squared.
  AdainTrainer(const Encoder& encoder, std::vector<Image> content, std::vector<Image> styles,
               AdainTrainConfig config);

  void resume(const AdainCheckpoint& checkpoint);
  // Runs one optimizer step; the batch depends only on (seed, step index).
  AdainLoss step();
  int steps_done() const { return steps_done_; }
  AdainCheckpoint checkpoint();
  const Decoder& decoder() const { return decoder_; }

 private:
  struct Sample {
    FeatureMap content;
    FeatureMap style;
  };
  std::vector<Sample> draw_batch(int step_index) const;

  const Encoder& encoder_;
  std::vector<Image> content_;
  std::vector<Image> styles_;
  AdainTrainConfig config_;
  Decoder decoder_;
  Adam optimizer_;
  int steps_done_ = 0;
};

// Loss of one (content, style) pair under `decoder`; images must already be
// encoder-sized.
AdainLoss evaluate_adain(const Encoder& encoder, const Decoder& decoder, const Image& content,
                         const Image& style, double lambda);

AdainCheckpoint train_adain(const Encoder& encoder, std::vector<Image> content,
                            std::vector<Image> styles, const AdainTrainConfig& config,
                            const std::function<void(const AdainStepLog&)>& log = {});

/// Encoder + trained decoder. Read-only after construction.
class Stylizer {
 public:
  // Throws DigestMismatchError when the checkpoint was trained against a
  // different encoder.
  Stylizer(const Encoder& encoder, const AdainCheckpoint& checkpoint);

  // decode(alpha * adain(f_c, style stats) + (1 - alpha) * f_c)
  Image stylize(const Image& content, const Image& style, double alpha = 1.0) const;
  Image stylize(const Image& content, const StyleStatistics& style, double alpha = 1.0) const;
  const Encoder& encoder() const { return encoder_; }

 private:
  Encoder encoder_;
  Decoder decoder_;
};

}  // namespace stylenerf
