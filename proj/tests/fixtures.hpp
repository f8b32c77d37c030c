// Copyright 2026 The stylenerf Authors
// SPDX-License-Identifier: Apache-2.0

// Small end-to-end fixtures: a 32x32 cube scene, an untrained stage-2 trunk,
// a stylizer with an untrained decoder and the stylized dataset it produces.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "stylenerf/multistyle.hpp"
#include "stylenerf/synthetic.hpp"

namespace fixtures {

inline stylenerf::NerfTrainConfig trunk_config() {
  stylenerf::NerfTrainConfig c;
  c.arch.depth = 4;
  c.arch.width = 16;
  c.arch.skip = 2;
  c.arch.position_levels = 3;
  c.arch.direction_levels = 2;
  c.n_coarse = 8;
  c.n_fine = 8;
  return c;
}

inline stylenerf::MultistyleArchitecture small_heads(int split, bool density_aware) {
  stylenerf::MultistyleArchitecture a;
  a.trunk_split = split;
  a.density_aware = density_aware;
  a.style_hidden = 12;
  a.style_embed = 8;
  a.view_embed = 8;
  a.rgb_hidden = 8;
  a.density_hidden = 8;
  a.density_embed = 4;
  return a;
}

inline stylenerf::MultistyleTrainConfig tiny_multistyle(int split = 4, bool density_aware = false) {
  stylenerf::MultistyleTrainConfig c;
  c.arch = small_heads(split, density_aware);
  c.batch_rays = 64;
  c.learning_rate = 1e-2f;
  c.steps = 4;
  c.seed = 2;
  return c;
}

struct StylizedScene {
  stylenerf::SceneDataset scene;
  stylenerf::NerfModel stage2;
  stylenerf::StylizedDataset data;
  std::filesystem::path dir;

  explicit StylizedScene(const std::string& name)
      : stage2(trunk_config(), 2.0, 6.0, {1.0f, 1.0f, 1.0f}),
        dir(std::filesystem::temp_directory_path() / ("stylenerf_test_" + name)) {
    using namespace stylenerf;
    CubeSceneConfig cfg;
    cfg.size = 32;
    cfg.train_views = 3;
    cfg.val_views = 1;
    scene = make_cube_scene(cfg);
    std::filesystem::remove_all(dir);
    const Encoder encoder = Encoder::standard();
    Decoder decoder(5);
    AdainCheckpoint ck;
    ck.decoder = export_tensors(decoder.parameters());
    ck.encoder_identifier = encoder.identifier();
    ck.encoder_digest = encoder.digest();
    const Stylizer stylizer(encoder, ck);
    std::vector<StyleSource> sources;
    const auto images = make_style_images(2, 40, 3);
    for (int i = 0; i < 2; ++i) sources.push_back({"pattern" + std::to_string(i), "", images[i]});
    data = build_stylized_dataset(scene, sources, stylizer, {}, dir);
  }
};

}  // namespace fixtures
