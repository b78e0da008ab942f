#pragma once

#include <memory>

#include "motionxfer/dataset.hpp"
#include "motionxfer/render.hpp"
#include "motionxfer/train.hpp"

namespace mxf::fixture {

inline std::shared_ptr<Dataset> tiny_dataset(int n_frames = 40, int size = 32) {
  SceneConfig scene;
  scene.height = scene.width = size;
  scene.n_frames = n_frames;
  auto data = std::make_shared<Dataset>();
  for (auto& f : generate_video(scene, 11)) {
    data->frames.push_back(quantize(f.image));
    data->part_masks.push_back(f.part_masks);
    data->poses.push_back(f.pose);
  }
  data->meta = scene_config_to_json(scene);
  return data;
}

// Small enough that a training step takes a few tens of milliseconds.
inline TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.batch = 2;
  cfg.resolutions = {32};
  cfg.iterations = {4};
  cfg.disc_scales = {2};
  cfg.n_train_pairs = 16;
  cfg.n_test_pairs = 4;
  cfg.generator.base_channels = 8;
  cfg.generator.n_down = 2;
  cfg.generator.n_residual = 1;
  cfg.generator.n_fine_residual = 1;
  cfg.discriminator.base_channels = 8;
  cfg.discriminator.n_layers = 2;
  cfg.perceptual.channels = {4, 4, 4, 4, 4};
  cfg.aux.channels = 4;
  cfg.aux.pretrain_steps = 2;
  cfg.aux.batch = 2;
  cfg.checkpoint_every = 0;
  return cfg;
}

}  // namespace mxf::fixture
