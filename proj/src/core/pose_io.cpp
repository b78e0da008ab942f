#include "motionxfer/pose_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "motionxfer/error.hpp"

namespace mxf {
namespace {

using nlohmann::json;

Point2 parse_point(const json& j) {
  if (!j.is_array() || j.size() < 2) throw Error("point must be [x, y, ...]");
  return {j.at(0).get<double>(), j.at(1).get<double>()};
}

Pose2D parse_pose(const json& rec) {
  Pose2D pose;
  const auto& kps = rec.at("keypoints");
  if (!kps.is_array() || kps.size() != kNumKeypoints) {
    throw Error("expected " + std::to_string(kNumKeypoints) + " keypoints");
  }
  for (int i = 0; i < kNumKeypoints; ++i) {
    const auto& k = kps.at(i);
    pose.keypoints[i] = parse_point(k);
    if (k.size() < 3) throw Error("keypoint must be [x, y, visible]");
    const auto& v = k.at(2);
    pose.visible[i] = v.is_boolean() ? v.get<bool>() : v.get<double>() > 0.5;
  }
  if (rec.contains("landmarks")) {
    const auto& lms = rec.at("landmarks");
    for (int l = 0; l < kNumLandmarkSets; ++l) {
      const auto key = std::string(landmark_name(static_cast<Landmark>(l)));
      if (!lms.contains(key)) continue;
      for (const auto& p : lms.at(key)) pose.landmarks[l].push_back(parse_point(p));
    }
  }
  complete_derived_keypoints(pose);
  for (int i = 0; i < kNumKeypoints; ++i) {
    if (!std::isfinite(pose.keypoints[i].x) || !std::isfinite(pose.keypoints[i].y)) {
      throw Error("non-finite keypoint");
    }
  }
  return pose;
}

}  // namespace

std::vector<PoseRecord> parse_pose_records(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("keypoint file is not valid JSON: ") + e.what());
  }
  if (!doc.is_array()) throw Error("keypoint file must be an array of frame records");
  std::vector<PoseRecord> out;
  out.reserve(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) {
    PoseRecord r;
    r.frame_index = static_cast<int>(i);
    try {
      const auto& rec = doc[i];
      if (rec.contains("frame_index")) r.frame_index = rec.at("frame_index").get<int>();
      r.pose = parse_pose(rec);
    } catch (const std::exception& e) {
      r.pose.reset();
      r.error = e.what();
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<PoseRecord> read_pose_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open keypoint file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_pose_records(ss.str());
}

std::string serialize_poses(const std::vector<Pose2D>& poses) {
  json doc = json::array();
  for (std::size_t f = 0; f < poses.size(); ++f) {
    const auto& pose = poses[f];
    json rec;
    rec["frame_index"] = f;
    json kps = json::array();
    for (int i = 0; i < kNumKeypoints; ++i) {
      kps.push_back({pose.keypoints[i].x, pose.keypoints[i].y, pose.visible[i] ? 1 : 0});
    }
    rec["keypoints"] = std::move(kps);
    json lms = json::object();
    for (int l = 0; l < kNumLandmarkSets; ++l) {
      json pts = json::array();
      for (const auto& p : pose.landmarks[l]) pts.push_back({p.x, p.y});
      lms[std::string(landmark_name(static_cast<Landmark>(l)))] = std::move(pts);
    }
    rec["landmarks"] = std::move(lms);
    doc.push_back(std::move(rec));
  }
  return doc.dump(1);
}

void write_pose_file(const std::filesystem::path& path, const std::vector<Pose2D>& poses) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write keypoint file " + path.string());
  out << serialize_poses(poses) << '\n';
}

std::vector<Pose2D> read_poses_strict(const std::filesystem::path& path) {
  auto records = read_pose_file(path);
  std::sort(records.begin(), records.end(),
            [](const PoseRecord& a, const PoseRecord& b) { return a.frame_index < b.frame_index; });
  std::vector<Pose2D> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    if (!r.pose) {
      throw Error(path.string() + ": frame " + std::to_string(r.frame_index) + ": " + r.error);
    }
    out.push_back(*r.pose);
  }
  return out;
}

}  // namespace mxf
