#pragma once

#include <filesystem>

#include "motionxfer/nets.hpp"
#include "motionxfer/train.hpp"

namespace mxf {

inline constexpr int kCheckpointVersion = 1;

struct CheckpointInfo {
  int version = 0;
  TrainConfig config;
  int stage = 0;
  int step = 0;
  bool aux_ready = false;
};

/// Reads only the header fields of a checkpoint.
CheckpointInfo read_checkpoint_info(const std::filesystem::path& path);

/// Generators from a checkpoint, ready for transfer at the stored stage.
struct InferenceModels {
  CheckpointInfo info;
  Generator synthesis{nullptr};
  Generator fusion{nullptr};

  int resolution() const { return info.config.resolutions.at(info.stage); }
};

InferenceModels load_inference_models(const std::filesystem::path& path);

}  // namespace mxf
