#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "motionxfer/pose.hpp"

namespace mxf {

/// One record of a keypoint file. `pose` is empty when the record could not
/// be parsed; `error` then says why.
struct PoseRecord {
  int frame_index = 0;
  std::optional<Pose2D> pose;
  std::string error;
};

/// Keypoint file: a JSON array of
///   {frame_index, keypoints: [[x, y, visible] x 15],
///    landmarks: {face, lhand, rhand, lfoot, rfoot: [[x, y], ...]}}
/// Malformed records are kept with an error instead of aborting the read.
std::vector<PoseRecord> parse_pose_records(const std::string& text);
std::vector<PoseRecord> read_pose_file(const std::filesystem::path& path);

std::string serialize_poses(const std::vector<Pose2D>& poses);
void write_pose_file(const std::filesystem::path& path, const std::vector<Pose2D>& poses);

/// Strict read: every record must parse; returns poses ordered by frame index.
std::vector<Pose2D> read_poses_strict(const std::filesystem::path& path);

}  // namespace mxf
