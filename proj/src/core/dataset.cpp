#include "motionxfer/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "motionxfer/error.hpp"
#include "motionxfer/png_io.hpp"
#include "motionxfer/pose_io.hpp"

namespace fs = std::filesystem;

namespace mxf {

Mask Dataset::fg_mask(int t) const {
  return mask_union(std::span<const Mask>(part_masks.at(static_cast<std::size_t>(t))));
}

std::string frame_filename(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06d.png", index);
  return buf;
}

std::string part_mask_filename(int index, int part) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%06d_part%02d.png", index, part);
  return buf;
}

nlohmann::json scene_config_to_json(const SceneConfig& cfg) {
  return {{"height", cfg.height},
          {"width", cfg.width},
          {"n_frames", cfg.n_frames},
          {"history", cfg.history},
          {"appearance_seed", cfg.appearance_seed},
          {"motion_seed", cfg.motion_seed},
          {"background", to_string(cfg.background)},
          {"shadow", cfg.shadow},
          {"motion_amplitude", cfg.motion_amplitude}};
}

SceneConfig scene_config_from_json(const nlohmann::json& j) {
  static const std::vector<std::string> kKnown = {"height",      "width",      "n_frames",
                                                  "history",     "appearance_seed", "motion_seed",
                                                  "background",  "shadow",     "motion_amplitude"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(kKnown.begin(), kKnown.end(), key) == kKnown.end()) {
      throw Error("scene config: unknown field '" + key + "'");
    }
  }
  SceneConfig cfg;
  cfg.height = j.value("height", cfg.height);
  cfg.width = j.value("width", cfg.width);
  cfg.n_frames = j.value("n_frames", cfg.n_frames);
  cfg.history = j.value("history", cfg.history);
  cfg.appearance_seed = j.value("appearance_seed", cfg.appearance_seed);
  cfg.motion_seed = j.value("motion_seed", cfg.motion_seed);
  if (j.contains("background")) cfg.background = background_style_from_string(j.at("background"));
  cfg.shadow = j.value("shadow", cfg.shadow);
  cfg.motion_amplitude = j.value("motion_amplitude", cfg.motion_amplitude);
  return cfg;
}

void write_dataset(const fs::path& dir, const std::vector<LabeledFrame>& frames,
                   const nlohmann::json& meta) {
  fs::create_directories(dir / "frames");
  fs::create_directories(dir / "masks");
  std::vector<Pose2D> poses;
  poses.reserve(frames.size());
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const int i = static_cast<int>(t);
    write_png(dir / "frames" / frame_filename(i), frames[t].image);
    for (int p = 0; p < kNumParts; ++p) {
      write_mask_png(dir / "masks" / part_mask_filename(i, p), frames[t].part_masks[p]);
    }
    poses.push_back(frames[t].pose);
  }
  write_pose_file(dir / "poses.json", poses);
  std::ofstream out(dir / "meta.json");
  out << meta.dump(2) << '\n';
}

Dataset read_dataset(const fs::path& dir) {
  if (auto problems = validate_dataset_dir(dir); !problems.empty()) {
    throw Error("dataset " + dir.string() + ": " + problems.front());
  }
  Dataset d;
  d.poses = read_poses_strict(dir / "poses.json");
  {
    std::ifstream in(dir / "meta.json");
    d.meta = nlohmann::json::parse(in);
  }
  const int n = static_cast<int>(d.poses.size());
  d.frames.reserve(n);
  d.part_masks.reserve(n);
  for (int i = 0; i < n; ++i) {
    d.frames.push_back(read_png(dir / "frames" / frame_filename(i)));
    std::array<Mask, kNumParts> masks;
    for (int p = 0; p < kNumParts; ++p) masks[p] = read_mask_png(dir / "masks" / part_mask_filename(i, p));
    d.part_masks.push_back(std::move(masks));
  }
  return d;
}

std::vector<std::string> validate_dataset_dir(const fs::path& dir) {
  std::vector<std::string> problems;
  if (!fs::is_directory(dir)) return {"not a directory"};
  for (const char* sub : {"frames", "masks"})
    if (!fs::is_directory(dir / sub)) problems.push_back(std::string("missing ") + sub + "/");
  for (const char* file : {"poses.json", "meta.json"})
    if (!fs::is_regular_file(dir / file)) problems.push_back(std::string("missing ") + file);
  if (!problems.empty()) return problems;

  std::vector<PoseRecord> records;
  try {
    records = read_pose_file(dir / "poses.json");
  } catch (const std::exception& e) {
    return {e.what()};
  }
  try {
    std::ifstream in(dir / "meta.json");
    const auto meta = nlohmann::json::parse(in);
    if (!meta.is_object()) problems.push_back("meta.json: not an object");
  } catch (const std::exception& e) {
    problems.push_back(std::string("meta.json: ") + e.what());
  }
  std::size_t n_frames = 0;
  for (const auto& e : fs::directory_iterator(dir / "frames"))
    if (e.path().extension() == ".png") ++n_frames;
  if (n_frames != records.size()) {
    problems.push_back("frame count " + std::to_string(n_frames) + " != pose count " +
                       std::to_string(records.size()));
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    const int idx = static_cast<int>(i);
    if (!records[i].pose) problems.push_back("pose " + std::to_string(i) + ": " + records[i].error);
    if (records[i].frame_index != idx) problems.push_back("pose records must be ordered by frame_index");
    if (!fs::is_regular_file(dir / "frames" / frame_filename(idx))) {
      problems.push_back("missing frames/" + frame_filename(idx));
    }
    for (int p = 0; p < kNumParts; ++p) {
      if (!fs::is_regular_file(dir / "masks" / part_mask_filename(idx, p))) {
        problems.push_back("missing masks/" + part_mask_filename(idx, p));
        break;
      }
    }
    if (problems.size() > 20) break;
  }
  return problems;
}

}  // namespace mxf
