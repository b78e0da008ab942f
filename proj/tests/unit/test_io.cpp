#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "helpers.hpp"
#include "motionxfer/dataset.hpp"
#include "motionxfer/error.hpp"
#include "motionxfer/png_io.hpp"
#include "motionxfer/pose_io.hpp"

using namespace mxf;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("mxf_io_" + std::to_string(std::random_device{}()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST(Png, RgbRoundTripIsQuantized) {
  TempDir tmp;
  std::mt19937_64 rng(1);
  const auto img = fixture::random_image(rng, 13, 17, 3);
  write_png(tmp.path / "a.png", img);
  const auto back = read_png(tmp.path / "a.png");
  EXPECT_EQ(back, quantize(img));
  write_png(tmp.path / "b.png", back);
  EXPECT_EQ(read_png(tmp.path / "b.png"), back);
}

TEST(Png, MaskRoundTripAndMissingFile) {
  TempDir tmp;
  std::mt19937_64 rng(2);
  const auto m = fixture::random_mask(rng, 9, 11);
  write_mask_png(tmp.path / "m.png", m);
  EXPECT_EQ(read_mask_png(tmp.path / "m.png"), m);
  EXPECT_THROW(read_png(tmp.path / "nope.png"), Error);
  std::ofstream(tmp.path / "junk.png") << "not a png";
  EXPECT_THROW(read_png(tmp.path / "junk.png"), Error);
}

TEST(PoseFile, RoundTripPreservesKeypointsAndLandmarks) {
  std::mt19937_64 rng(3);
  std::vector<Pose2D> poses;
  for (int i = 0; i < 4; ++i) poses.push_back(fixture::jittered_pose(rng, 40, 40, 12, 2.0));
  poses[2].visible[5] = false;
  const auto recs = parse_pose_records(serialize_poses(poses));
  ASSERT_EQ(recs.size(), 4u);
  for (int i = 0; i < 4; ++i) {
    ASSERT_TRUE(recs[i].pose.has_value()) << recs[i].error;
    EXPECT_EQ(recs[i].frame_index, i);
    for (int k = 0; k < kNumKeypoints; ++k) {
      EXPECT_EQ(recs[i].pose->visible[k], poses[i].visible[k]);
      EXPECT_NEAR(recs[i].pose->keypoints[k].x, poses[i].keypoints[k].x, 1e-9);
      EXPECT_NEAR(recs[i].pose->keypoints[k].y, poses[i].keypoints[k].y, 1e-9);
    }
  }
}

TEST(PoseFile, MalformedRecordIsKeptWithError) {
  std::mt19937_64 rng(4);
  const std::vector<Pose2D> poses{fixture::stick_pose(20, 20, 8)};
  auto doc = nlohmann::json::parse(serialize_poses(poses));
  nlohmann::json bad = doc[0];
  bad["frame_index"] = 1;
  bad["keypoints"].erase(bad["keypoints"].begin());
  doc.push_back(bad);
  const auto recs = parse_pose_records(doc.dump());
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_TRUE(recs[0].pose.has_value());
  EXPECT_FALSE(recs[1].pose.has_value());
  EXPECT_FALSE(recs[1].error.empty());
  EXPECT_THROW(parse_pose_records("{not json"), Error);
  EXPECT_THROW(parse_pose_records("{}"), Error);

  TempDir tmp;
  std::ofstream(tmp.path / "p.json") << doc.dump();
  EXPECT_THROW(read_poses_strict(tmp.path / "p.json"), Error);
}

TEST(SceneConfigJson, RoundTripAndUnknownKeyRejected) {
  SceneConfig cfg;
  cfg.n_frames = 77;
  cfg.background = BackgroundStyle::kMovingDistractor;
  const auto j = scene_config_to_json(cfg);
  const auto back = scene_config_from_json(j);
  EXPECT_EQ(back.n_frames, 77);
  EXPECT_EQ(back.background, BackgroundStyle::kMovingDistractor);
  EXPECT_EQ(scene_config_to_json(back), j);
  auto bad = j;
  bad["colour_depth"] = 8;
  try {
    scene_config_from_json(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("colour_depth"), std::string::npos);
  }
}

TEST(DatasetDir, WriteReadValidate) {
  TempDir tmp;
  SceneConfig cfg;
  cfg.n_frames = 8;
  const auto frames = generate_video(cfg, 3);
  write_dataset(tmp.path / "d", frames, scene_config_to_json(cfg));
  EXPECT_TRUE(validate_dataset_dir(tmp.path / "d").empty());
  const auto ds = read_dataset(tmp.path / "d");
  ASSERT_EQ(ds.size(), 8);
  for (int t = 0; t < 8; ++t) {
    EXPECT_EQ(ds.frames[t], quantize(frames[t].image));
    EXPECT_EQ(ds.fg_mask(t), frames[t].fg_mask);
    for (int p = 0; p < kNumParts; ++p) EXPECT_EQ(ds.part_masks[t][p], frames[t].part_masks[p]);
  }
  fs::remove(tmp.path / "d" / "poses.json");
  EXPECT_FALSE(validate_dataset_dir(tmp.path / "d").empty());
  EXPECT_THROW(read_dataset(tmp.path / "d"), Error);
  EXPECT_FALSE(validate_dataset_dir(tmp.path / "missing").empty());
}
