// Copyright 2026 The stylenerf Authors
// SPDX-License-Identifier: Apache-2.0

#include "stylenerf/service.hpp"

#include <httplib.h>

#include <chrono>
#include <cmath>
#include <cstdio>

#include "stylenerf/checkpoint.hpp"
#include "stylenerf/digest.hpp"
#include "stylenerf/image.hpp"

namespace stylenerf {

namespace fs = std::filesystem;

// ---------------------------------------------------------------- requests

namespace {

double number_field(const nlohmann::json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ValidationError(where + "." + key + ": required");
  const auto& v = obj.at(key);
  if (!v.is_number() || !std::isfinite(v.get<double>())) throw ValidationError(where + "." + key + ": must be a finite number");
  return v.get<double>();
}

std::string string_field(const nlohmann::json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ValidationError(where + "." + key + ": required");
  const auto& v = obj.at(key);
  if (!v.is_string() || v.get<std::string>().empty()) throw ValidationError(where + "." + key + ": must be a non-empty string");
  return v.get<std::string>();
}

void only_keys(const nlohmann::json& obj, std::initializer_list<const char*> keys, const std::string& where) {
  for (const auto& [k, v] : obj.items()) {
    bool ok = false;
    for (const char* allowed : keys) ok = ok || k == allowed;
    if (!ok) throw ValidationError(where + "." + k + ": unexpected field");
  }
}

double unit_interval(const nlohmann::json& obj, const char* key, const std::string& where) {
  const double v = number_field(obj, key, where);
  if (v < 0.0 || v > 1.0) throw ValidationError(where + "." + key + ": must lie in [0, 1]");
  return v;
}

PoseSpec parse_pose(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("pose: must be an object");
  const int forms = static_cast<int>(j.contains("index")) + static_cast<int>(j.contains("matrix")) +
                    static_cast<int>(j.contains("orbit"));
  if (forms != 1) throw ValidationError("pose: exactly one of index, matrix, orbit is required");
  only_keys(j, {"index", "matrix", "orbit"}, "pose");
  if (j.contains("index")) {
    const auto& v = j.at("index");
    if (!v.is_number_integer()) throw ValidationError("pose.index: must be an integer");
    return PoseIndex{v.get<int>()};
  }
  if (j.contains("matrix")) {
    const auto& m = j.at("matrix");
    if (!m.is_array() || m.size() != 4) throw ValidationError("pose.matrix: must be a 4x4 array");
    PoseMatrix p;
    for (int r = 0; r < 4; ++r) {
      if (!m[r].is_array() || m[r].size() != 4) throw ValidationError("pose.matrix: must be a 4x4 array");
      for (int c = 0; c < 4; ++c) {
        if (!m[r][c].is_number() || !std::isfinite(m[r][c].get<double>()))
          throw ValidationError("pose.matrix: entries must be finite numbers");
        p.camera_to_world(r, c) = m[r][c].get<double>();
      }
    }
    return p;
  }
  const auto& o = j.at("orbit");
  if (!o.is_object()) throw ValidationError("pose.orbit: must be an object");
  only_keys(o, {"azimuth", "elevation", "radius"}, "pose.orbit");
  PoseOrbit p{number_field(o, "azimuth", "pose.orbit"), number_field(o, "elevation", "pose.orbit"),
              number_field(o, "radius", "pose.orbit")};
  if (std::abs(p.elevation) >= 90.0) throw ValidationError("pose.orbit.elevation: must lie in (-90, 90)");
  if (p.radius <= 0.0) throw ValidationError("pose.orbit.radius: must be positive");
  return p;
}

StyleSpec parse_style(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("style: must be an object");
  const bool blend = j.contains("a") || j.contains("b") || j.contains("lambda");
  const bool single = j.contains("id");
  if (blend == single) throw ValidationError("style: exactly one of {id}, {a, b, lambda}, {id, intensity} is required");
  if (blend) {
    only_keys(j, {"a", "b", "lambda"}, "style");
    return StyleBlend{string_field(j, "a", "style"), string_field(j, "b", "style"), unit_interval(j, "lambda", "style")};
  }
  if (j.contains("intensity")) {
    only_keys(j, {"id", "intensity"}, "style");
    return StyleIntensity{string_field(j, "id", "style"), unit_interval(j, "intensity", "style")};
  }
  only_keys(j, {"id"}, "style");
  return StyleSingle{string_field(j, "id", "style")};
}

}  // namespace

RenderRequest parse_render_request(const nlohmann::json& body) {
  if (!body.is_object()) throw ValidationError("request: body must be a JSON object");
  only_keys(body, {"pose", "style", "resolution", "seed"}, "request");
  if (!body.contains("pose")) throw ValidationError("pose: required");
  if (!body.contains("style")) throw ValidationError("style: required");
  RenderRequest r{parse_pose(body.at("pose")), parse_style(body.at("style"))};
  if (body.contains("resolution")) {
    const auto& v = body.at("resolution");
    if (!v.is_number_integer()) throw ValidationError("resolution: must be one of 64, 128, 256");
    r.resolution = v.get<int>();
    bool ok = false;
    for (int allowed : kServiceResolutions) ok = ok || r.resolution == allowed;
    if (!ok) throw ValidationError("resolution: must be one of 64, 128, 256");
  }
  if (body.contains("seed")) {
    const auto& v = body.at("seed");
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
      throw ValidationError("seed: must be a non-negative integer");
    r.seed = v.get<std::uint64_t>();
  }
  return r;
}

StyleStatistics resolve_style(const StyleSpec& spec, const StyleRegistry& registry) {
  auto lookup = [&](const std::string& id) -> const StyleStatistics& {
    const int i = registry.find(id);
    if (i < 0) throw UnknownStyleError("unknown style_id '" + id + "'");
    return registry.entries()[i].statistics;
  };
  if (const auto* s = std::get_if<StyleSingle>(&spec)) return lookup(s->id);
  if (const auto* b = std::get_if<StyleBlend>(&spec)) return interpolate_styles(lookup(b->a), lookup(b->b), b->lambda);
  const auto& in = std::get<StyleIntensity>(spec);
  const StyleEntry* content = registry.content();
  if (content == nullptr) throw UnknownStyleError("intensity requires the 'content' style, which this model lacks");
  return set_intensity(lookup(in.id), content->statistics, in.intensity);
}

CameraPose resolve_pose(const PoseSpec& spec, const MultiStyleModel& model) {
  require(!model.poses.empty(), "model has no training poses");
  const CameraPose& ref = model.poses.front();
  if (const auto* p = std::get_if<PoseIndex>(&spec)) {
    if (p->index < 0 || p->index >= static_cast<int>(model.poses.size())) {
      throw ValidationError("pose.index: must lie in [0, " + std::to_string(model.poses.size() - 1) + "]");
    }
    return model.poses[p->index];
  }
  if (const auto* m = std::get_if<PoseMatrix>(&spec)) {
    CameraPose pose = CameraPose::from_matrix(m->camera_to_world, ref.focal, ref.height, ref.width);
    try {
      pose.validate();
    } catch (const ValidationError& e) {
      throw ValidationError(std::string("pose.matrix: ") + e.what());
    }
    return pose;
  }
  const auto& o = std::get<PoseOrbit>(spec);
  return orbit_pose(o.azimuth, o.elevation, o.radius, ref.focal, ref.height, ref.width);
}

// ---------------------------------------------------------------- service

struct RenderService::Server {
  httplib::Server http;
};

namespace {

HttpReply json_reply(int status, const nlohmann::json& body) {
  HttpReply r;
  r.status = status;
  r.body = body.dump();
  return r;
}

HttpReply error_reply(int status, const std::string& message) { return json_reply(status, {{"error", message}}); }

std::string thumbnail_png(const Image& source, int size) {
  Image img = composite_over(source, {1.0f, 1.0f, 1.0f});
  const auto bytes = encode_png(resize_bilinear(img, size, size));
  return {bytes.begin(), bytes.end()};
}

}  // namespace

RenderService::RenderService(std::shared_ptr<const MultiStyleModel> model, fs::path run_dir, ServiceOptions options)
    : model_(std::move(model)), options_(options), server_(std::make_shared<Server>()) {
  require(model_ != nullptr, "service: no model");
  require(options_.max_in_flight >= 1, "service: max_in_flight must be >= 1");
  require(options_.thumbnail_size >= 8, "service: thumbnail_size must be >= 8");
  const std::string first_frame = model_->frame_ids.empty() ? std::string() : model_->frame_ids.front();
  for (const StyleEntry& e : model_->registry().entries()) {
    std::vector<fs::path> candidates;
    if (!e.image.empty()) candidates.emplace_back(e.image);
    if (!first_frame.empty()) candidates.push_back(run_dir / "stylized" / e.id / (first_frame + ".png"));
    Image source(options_.thumbnail_size, options_.thumbnail_size, 0.5f);
    for (const fs::path& p : candidates) {
      std::error_code ec;
      if (!fs::is_regular_file(p, ec)) continue;
      try {
        source = load_image(p);
        break;
      } catch (const IoError&) {
      }
    }
    thumbnails_[e.id] = thumbnail_png(source, options_.thumbnail_size);
  }
  health_ = {{"status", "ok"},
             {"digests", {{"trunk", model_->trunk_digest()}, {"registry", model_->registry().digest()}}},
             {"steps_done", model_->steps_done},
             {"styles", model_->registry().size()}};
  install_routes();
}

std::unique_ptr<RenderService> RenderService::open(const fs::path& run_dir, ServiceOptions options) {
  const fs::path ckpt_path = run_dir / "checkpoints" / "multistyle.snck";
  if (!fs::is_regular_file(ckpt_path)) {
    throw StateError("no multistyle checkpoint at " + ckpt_path.string() +
                     "; run train-multistyle before starting the service");
  }
  const auto bytes = read_file(ckpt_path);
  const ModelCheckpoint ckpt = deserialize_checkpoint(bytes, Stage::kMultistyle);
  auto model = std::make_shared<const MultiStyleModel>(MultiStyleModel::from_checkpoint(ckpt));
  auto service = std::make_unique<RenderService>(std::move(model), run_dir, options);
  service->health_["digests"]["checkpoint"] = sha256_hex(std::span<const std::byte>(
      reinterpret_cast<const std::byte*>(bytes.data()), bytes.size()));
  return service;
}

HttpReply RenderService::styles() const {
  nlohmann::json list = nlohmann::json::array();
  for (const StyleEntry& e : model_->registry().entries()) {
    list.push_back({{"style_id", e.id},
                    {"name", e.name},
                    {"kind", e.kind},
                    {"thumbnail", "/styles/" + e.id + "/thumbnail.png"}});
  }
  return json_reply(200, list);
}

HttpReply RenderService::thumbnail(const std::string& style_id) const {
  const auto it = thumbnails_.find(style_id);
  if (it == thumbnails_.end()) return error_reply(404, "unknown style_id '" + style_id + "'");
  HttpReply r;
  r.content_type = "image/png";
  r.body = it->second;
  return r;
}

HttpReply RenderService::healthz() const { return json_reply(200, health_); }

std::optional<RenderService::Slot> RenderService::try_acquire() {
  int current = in_flight_.load();
  while (current < options_.max_in_flight) {
    if (in_flight_.compare_exchange_weak(current, current + 1)) return Slot(&in_flight_);
  }
  return std::nullopt;
}

HttpReply RenderService::render(const std::string& body) {
  const auto start = std::chrono::steady_clock::now();
  RenderRequest request;
  StyleStatistics style;
  CameraPose pose;
  try {
    request = parse_render_request(nlohmann::json::parse(body));
    style = resolve_style(request.style, model_->registry());
    pose = resolve_pose(request.pose, *model_);
  } catch (const nlohmann::json::exception& e) {
    return error_reply(400, std::string("request: malformed JSON: ") + e.what());
  } catch (const UnknownStyleError& e) {
    return error_reply(422, e.what());
  } catch (const ValidationError& e) {
    return error_reply(400, e.what());
  }
  auto slot = try_acquire();
  if (!slot) {
    HttpReply r = error_reply(503, "render budget exhausted; retry later");
    r.headers["Retry-After"] = std::to_string(options_.retry_after_seconds);
    return r;
  }
  Rng rng(request.seed);
  const Image image = render_view(pose, style, *model_, request.resolution, &rng);
  const auto png = encode_png(image);
  const double ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  HttpReply r;
  r.content_type = "image/png";
  r.body.assign(png.begin(), png.end());
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", ms);
  r.headers["X-Render-Time-Ms"] = buf;
  return r;
}

void RenderService::install_routes() {
  auto send = [](httplib::Response& res, const HttpReply& reply) {
    res.status = reply.status;
    for (const auto& [k, v] : reply.headers) res.set_header(k, v);
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Access-Control-Expose-Headers", "X-Render-Time-Ms, Retry-After");
    res.set_content(reply.body, reply.content_type);
  };
  auto& http = server_->http;
  http.Get("/styles", [this, send](const httplib::Request&, httplib::Response& res) { send(res, styles()); });
  http.Get(R"(/styles/([A-Za-z0-9._-]+)/thumbnail\.png)",
           [this, send](const httplib::Request& req, httplib::Response& res) { send(res, thumbnail(req.matches[1])); });
  http.Get("/healthz", [this, send](const httplib::Request&, httplib::Response& res) { send(res, healthz()); });
  http.Post("/render",
            [this, send](const httplib::Request& req, httplib::Response& res) { send(res, render(req.body)); });
  http.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.status = 204;
  });
  http.set_exception_handler([send](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string what = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    send(res, error_reply(500, what));
  });
}

void RenderService::listen(const std::string& host, int port) {
  if (!server_->http.listen(host, port)) throw IoError("cannot listen on " + host + ":" + std::to_string(port));
}

int RenderService::bind_any_port(const std::string& host) {
  const int port = server_->http.bind_to_any_port(host);
  if (port < 0) throw IoError("cannot bind to " + host);
  return port;
}

void RenderService::listen_after_bind() { server_->http.listen_after_bind(); }

void RenderService::stop() { server_->http.stop(); }

bool RenderService::running() const { return server_->http.is_running(); }

}  // namespace stylenerf
