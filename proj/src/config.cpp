// Copyright 2026 The stylenerf Authors
// SPDX-License-Identifier: Apache-2.0

#include "stylenerf/config.hpp"

#include <cmath>
#include <set>

#include "stylenerf/checkpoint.hpp"
#include "stylenerf/error.hpp"

namespace stylenerf {

namespace {

// Compares the keys of `given` against a freshly serialized default so typos
// in a config file are reported instead of silently ignored.
void reject_unknown(const nlohmann::json& given, const nlohmann::json& known, const std::string& where) {
  if (!given.is_object()) return;
  for (const auto& [key, value] : given.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!known.contains(key)) throw ValidationError("config: unknown key '" + path + "'");
    if (value.is_object() && known.at(key).is_object()) reject_unknown(value, known.at(key), path);
  }
}

nlohmann::json known_keys() {
  RunConfig defaults;
  defaults.near = 0.0;
  defaults.far = 0.0;
  return defaults;
}

}  // namespace

void to_json(nlohmann::json& j, const RenderSettings& r) {
  j = {{"resolution", r.resolution}, {"orbit_frames", r.orbit_frames}};
}

void from_json(const nlohmann::json& j, RenderSettings& r) {
  r.resolution = j.value("resolution", r.resolution);
  r.orbit_frames = j.value("orbit_frames", r.orbit_frames);
}

void to_json(nlohmann::json& j, const RunConfig& c) {
  j = {{"stage", c.stage},
       {"scene", c.scene},
       {"styles", c.styles},
       {"content", c.content},
       {"content_as_style", c.content_as_style},
       {"adain", c.adain},
       {"nerf", c.nerf},
       {"multistyle", c.multistyle},
       {"render", c.render}};
  j["near"] = c.near ? nlohmann::json(*c.near) : nlohmann::json(nullptr);
  j["far"] = c.far ? nlohmann::json(*c.far) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, RunConfig& c) {
  require(j.is_object(), "config: top level must be a JSON object");
  reject_unknown(j, known_keys(), "");
  try {
    c.stage = j.value("stage", c.stage);
    c.scene = j.value("scene", c.scene);
    c.styles = j.value("styles", c.styles);
    c.content = j.value("content", c.content);
    c.content_as_style = j.value("content_as_style", c.content_as_style);
    if (j.contains("near")) c.near = j.at("near").is_null() ? std::nullopt : std::optional(j.at("near").get<double>());
    if (j.contains("far")) c.far = j.at("far").is_null() ? std::nullopt : std::optional(j.at("far").get<double>());
    if (j.contains("adain")) c.adain = j.at("adain").get<AdainTrainConfig>();
    if (j.contains("nerf")) c.nerf = j.at("nerf").get<NerfTrainConfig>();
    if (j.contains("multistyle")) c.multistyle = j.at("multistyle").get<MultistyleTrainConfig>();
    if (j.contains("render")) c.render = j.at("render").get<RenderSettings>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
}

void RunConfig::validate() const {
  try {
    parse_stage(stage);
  } catch (const std::exception&) {
    throw ValidationError("config.stage must be one of adain, nerf, multistyle (got '" + stage + "')");
  }
  if (near) require(std::isfinite(*near) && *near >= 0.0, "config.near must be finite and >= 0");
  if (far) require(std::isfinite(*far) && *far > 0.0, "config.far must be finite and > 0");
  if (near && far) require(*far > *near, "config.far must exceed config.near");
  for (const std::string& s : styles) require(!s.empty(), "config.styles: empty path");
  stylenerf::validate(adain);
  stylenerf::validate(nerf);
  stylenerf::validate(multistyle);
  multistyle.arch.validate(nerf.arch);
  require(render.resolution >= 8 && render.resolution <= 4096, "config.render.resolution must lie in [8, 4096]");
  require(render.orbit_frames >= 1 && render.orbit_frames <= 10000, "config.render.orbit_frames must lie in [1, 10000]");
}

SceneOptions RunConfig::scene_options() const {
  SceneOptions o;
  o.near = near;
  o.far = far;
  return o;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return j.get<RunConfig>();
}

void save_run_config(const RunConfig& config, const std::filesystem::path& path) {
  write_file_atomic(path, nlohmann::json(config).dump(2) + "\n");
}

nlohmann::json merge_config(nlohmann::json base, const nlohmann::json& patch) {
  if (!base.is_object() || !patch.is_object()) return patch;
  for (const auto& [key, value] : patch.items()) {
    base[key] = base.contains(key) ? merge_config(base[key], value) : value;
  }
  return base;
}

}  // namespace stylenerf
