// Copyright 2026 The stylenerf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Run configuration: one JSON file per run holding every input path and
// hyperparameter of all three stages. CLI flags are applied on top of the
// file and the merged result is written back into the run directory.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "stylenerf/adain.hpp"
#include "stylenerf/multistyle.hpp"
#include "stylenerf/nerf.hpp"

namespace stylenerf {

struct RenderSettings {
  int resolution = 64;     // CLI render output size (square)
  int orbit_frames = 60;   // poses in an orbit sweep
};

struct RunConfig {
  std::string stage = "multistyle";      // adain | nerf | multistyle: last stage the run targets
  std::string scene;                      // scene directory
  std::vector<std::string> styles;        // style image files
  std::vector<std::string> content;       // content corpus for train-adain (files or directories)
  std::optional<double> near;
  std::optional<double> far;
  bool content_as_style = true;
  AdainTrainConfig adain;
  NerfTrainConfig nerf;
  MultistyleTrainConfig multistyle;
  RenderSettings render;

  // Every field against its declared range; throws ValidationError naming the field.
  void validate() const;
  SceneOptions scene_options() const;
};

void to_json(nlohmann::json& j, const RenderSettings& r);
void from_json(const nlohmann::json& j, RenderSettings& r);
void to_json(nlohmann::json& j, const RunConfig& c);
// Unknown keys anywhere in the document are rejected.
void from_json(const nlohmann::json& j, RunConfig& c);

// Reads and parses a config file; ValidationError on malformed content.
RunConfig load_run_config(const std::filesystem::path& path);
// Pretty-printed JSON, atomically replaced.
void save_run_config(const RunConfig& config, const std::filesystem::path& path);

// Deep merge of `patch` into `base` (objects merge key by key, everything
// else is replaced). Used for "file, then flags" layering.
nlohmann::json merge_config(nlohmann::json base, const nlohmann::json& patch);

}  // namespace stylenerf
