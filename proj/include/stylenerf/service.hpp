// Copyright 2026 The stylenerf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Read-only HTTP render service over a trained multistyle checkpoint.
//
//   GET  /styles                      [{style_id, name, kind, thumbnail}]
//   GET  /styles/<id>/thumbnail.png   64x64 PNG
//   POST /render                      RenderRequest JSON -> PNG, X-Render-Time-Ms
//   GET  /healthz                     checkpoint digests
//
// RenderRequest:
//   {"pose":  {"index": 0} | {"matrix": [[4x4]]} | {"orbit": {"azimuth": 30, "elevation": 20, "radius": 4}},
//    "style": {"id": "style_00"} | {"a": "style_00", "b": "style_01", "lambda": 0.5}
//             | {"id": "style_00", "intensity": 0.5},
//    "resolution": 64 | 128 | 256,
//    "seed": 0}

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "stylenerf/error.hpp"
#include "stylenerf/multistyle.hpp"

namespace stylenerf {

struct PoseIndex {
  int index = 0;
};
struct PoseMatrix {
  Mat4 camera_to_world = Mat4::Identity();
};
struct PoseOrbit {
  double azimuth = 0.0;    // degrees
  double elevation = 0.0;  // degrees
  double radius = 4.0;
};
using PoseSpec = std::variant<PoseIndex, PoseMatrix, PoseOrbit>;

struct StyleSingle {
  std::string id;
};
struct StyleBlend {
  std::string a;
  std::string b;
  double lambda = 0.0;
};
struct StyleIntensity {
  std::string id;
  double intensity = 1.0;
};
using StyleSpec = std::variant<StyleSingle, StyleBlend, StyleIntensity>;

struct RenderRequest {
  PoseSpec pose;
  StyleSpec style;
  int resolution = 64;
  std::uint64_t seed = 0;
};

// Raised for requests naming styles the registry does not hold (HTTP 422).
class UnknownStyleError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

constexpr int kServiceResolutions[] = {64, 128, 256};

// Structural checks only; throws ValidationError with the offending field.
RenderRequest parse_render_request(const nlohmann::json& body);

// Statistics for a style spec via interpolate_styles / set_intensity.
// Throws UnknownStyleError for ids missing from the registry.
StyleStatistics resolve_style(const StyleSpec& spec, const StyleRegistry& registry);
// Training pose, explicit matrix or orbit pose; intrinsics from the first
// training pose. Throws ValidationError for out-of-range indices or bad rotations.
CameraPose resolve_pose(const PoseSpec& spec, const MultiStyleModel& model);

struct HttpReply {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
  std::map<std::string, std::string> headers;
};

struct ServiceOptions {
  int max_in_flight = 2;
  int retry_after_seconds = 1;
  int thumbnail_size = 64;
};

class RenderService {
 public:
  // `run_dir` supplies style thumbnails; nothing under it is written.
  RenderService(std::shared_ptr<const MultiStyleModel> model, std::filesystem::path run_dir,
                ServiceOptions options = {});
  // Loads <run_dir>/checkpoints/multistyle.snck; throws StateError with a
  // clear message when it is missing.
  static std::unique_ptr<RenderService> open(const std::filesystem::path& run_dir, ServiceOptions options = {});

  HttpReply styles() const;
  HttpReply thumbnail(const std::string& style_id) const;
  HttpReply render(const std::string& body);
  HttpReply healthz() const;

  // A render slot; empty when the budget is exhausted. Released on destruction.
  class Slot {
   public:
    explicit Slot(std::atomic<int>* counter) : counter_(counter) {}
    Slot(Slot&& other) noexcept : counter_(std::exchange(other.counter_, nullptr)) {}
    Slot(const Slot&) = delete;
    ~Slot() {
      if (counter_) counter_->fetch_sub(1);
    }

   private:
    std::atomic<int>* counter_;
  };
  std::optional<Slot> try_acquire();
  int in_flight() const { return in_flight_.load(); }

  // Blocks serving HTTP until stop() is called from another thread.
  void listen(const std::string& host, int port);
  // Binds to an ephemeral port and returns it; serve with listen_after_bind().
  int bind_any_port(const std::string& host);
  void listen_after_bind();
  void stop();
  bool running() const;

 private:
  void install_routes();

  std::shared_ptr<const MultiStyleModel> model_;
  ServiceOptions options_;
  std::map<std::string, std::string> thumbnails_;
  nlohmann::json health_;
  std::atomic<int> in_flight_{0};
  struct Server;
  std::shared_ptr<Server> server_;
};

}  // namespace stylenerf
