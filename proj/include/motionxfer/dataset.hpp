#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "motionxfer/image.hpp"
#include "motionxfer/pose.hpp"
#include "motionxfer/render.hpp"

namespace mxf {

/// On-disk video layout shared by synthetic and user-supplied data:
///   frames/%06d.png, masks/%06d_part%02d.png, poses.json, meta.json
struct Dataset {
  std::vector<Image> frames;
  std::vector<std::array<Mask, kNumParts>> part_masks;
  std::vector<Pose2D> poses;
  nlohmann::json meta;

  int size() const { return static_cast<int>(frames.size()); }
  int height() const { return frames.empty() ? 0 : frames.front().height(); }
  int width() const { return frames.empty() ? 0 : frames.front().width(); }
  Mask fg_mask(int t) const;
};

std::string frame_filename(int index);
std::string part_mask_filename(int index, int part);

nlohmann::json scene_config_to_json(const SceneConfig& cfg);
SceneConfig scene_config_from_json(const nlohmann::json& j);

void write_dataset(const std::filesystem::path& dir, const std::vector<LabeledFrame>& frames,
                   const nlohmann::json& meta);
Dataset read_dataset(const std::filesystem::path& dir);

/// Problems found in a directory claiming the layout above; empty when valid.
std::vector<std::string> validate_dataset_dir(const std::filesystem::path& dir);

}  // namespace mxf
