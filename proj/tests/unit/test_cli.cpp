#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "motionxfer/dataset.hpp"
#include "motionxfer/png_io.hpp"
#include "motionxfer/train.hpp"
#include "train_fixture.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(MXF_CLI_PATH) + " --log-level warn " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

void write_json(const fs::path& p, const json& j) { std::ofstream(p) << j.dump(2); }

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

// One workspace shared across the suite: data, a tiny trained checkpoint.
class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / ("mxf_cli_" + std::to_string(std::random_device{}()));
    fs::create_directories(root_);
    mxf::SceneConfig scene;
    scene.height = scene.width = 32;
    scene.n_frames = 40;
    write_json(root_ / "scene.json", mxf::scene_config_to_json(scene));
    auto cfg = mxf::fixture::tiny_config();
    cfg.iterations = {2};
    write_json(root_ / "train.json", mxf::to_json(cfg));
    ASSERT_EQ(run("synth-data --config " + (root_ / "scene.json").string() + " --seed 3 --output " +
                  (root_ / "data").string()),
              0);
    ASSERT_EQ(run("train " + (root_ / "data").string() + " --config " + (root_ / "train.json").string() +
                  " --output " + (root_ / "run").string()),
              0);
  }
  static void TearDownTestSuite() { fs::remove_all(root_); }
  static fs::path root_;
};
fs::path CliTest::root_;

}  // namespace

TEST_F(CliTest, SynthDataWritesValidDatasetAndManifest) {
  EXPECT_TRUE(mxf::validate_dataset_dir(root_ / "data").empty());
  const auto m = read_json(root_ / "data" / "manifest.json");
  EXPECT_EQ(m["command"], "synth-data");
  EXPECT_EQ(m["seed"], 3);
  EXPECT_TRUE(m.contains("version"));
  EXPECT_EQ(mxf::read_dataset(root_ / "data").size(), 40);
}

TEST_F(CliTest, OutputDirectoryProtection) {
  const auto scene = (root_ / "scene.json").string();
  EXPECT_NE(run("synth-data --config " + scene + " --output " + (root_ / "data").string()), 0);
  EXPECT_EQ(run("synth-data --config " + scene + " --force --output " + (root_ / "data").string()), 0);
  fs::create_directories(root_ / "foreign");
  std::ofstream(root_ / "foreign" / "keep.txt") << "x";
  EXPECT_NE(run("synth-data --config " + scene + " --force --output " + (root_ / "foreign").string()), 0);
  EXPECT_TRUE(fs::exists(root_ / "foreign" / "keep.txt"));
}

TEST_F(CliTest, TrainArtifactsAndConfigErrors) {
  for (const char* f : {"checkpoint.pt", "metrics.jsonl", "summary.json", "manifest.json"})
    EXPECT_TRUE(fs::exists(root_ / "run" / f)) << f;
  auto bad = read_json(root_ / "train.json");
  bad["momentum"] = 0.9;
  write_json(root_ / "bad.json", bad);
  EXPECT_NE(run("train " + (root_ / "data").string() + " --config " + (root_ / "bad.json").string() + " --output " +
                (root_ / "bad_run").string()),
            0);
}

TEST_F(CliTest, TransferEvaluateRecomposite) {
  const auto data = (root_ / "data").string();
  ASSERT_EQ(run("transfer " + data + " " + data + " " + (root_ / "run" / "checkpoint.pt").string() + " --output " +
                (root_ / "xfer").string()),
            0);
  int n = 0;
  for (const auto& e : fs::directory_iterator(root_ / "xfer"))
    if (e.path().extension() == ".png") ++n;
  EXPECT_EQ(n, 40);
  EXPECT_TRUE(fs::exists(root_ / "xfer" / "selections.json"));
  EXPECT_EQ(mxf::read_png(root_ / "xfer" / "000000.png").height(), 32);

  ASSERT_EQ(run("evaluate " + (root_ / "xfer").string() + " " + data + " --output " + (root_ / "eval").string()), 0);
  const auto report = read_json(root_ / "eval" / "report.json");
  EXPECT_TRUE(report.contains("whole"));

  ASSERT_EQ(run("recomposite " + (root_ / "xfer" / "foreground").string() + " " + (root_ / "xfer" / "masks").string() +
                " " + (root_ / "data" / "frames" / "000000.png").string() + " --output " + (root_ / "recomp").string()),
            0);
  EXPECT_TRUE(fs::exists(root_ / "recomp" / "000000.png"));
}

TEST_F(CliTest, CorruptReferencePoseIsSkipped) {
  auto poses = read_json(root_ / "data" / "poses.json");
  poses[5]["keypoints"] = json::array();
  poses.erase(poses.begin() + 10, poses.end());
  write_json(root_ / "ref.json", poses);
  ASSERT_EQ(run("transfer " + (root_ / "data").string() + " " + (root_ / "ref.json").string() + " " +
                (root_ / "run" / "checkpoint.pt").string() + " --output " + (root_ / "xfer_bad").string() +
                " --debug-dir " + (root_ / "debug").string()),
            0);
  auto count_png = [](const fs::path& dir) {
    int n = 0;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.path().extension() == ".png") ++n;
    return n;
  };
  EXPECT_EQ(count_png(root_ / "xfer_bad"), 9);
  EXPECT_EQ(count_png(root_ / "debug" / "pose"), 9 * 45);
  EXPECT_EQ(count_png(root_ / "debug" / "parts"), 9 * 10);
  EXPECT_TRUE(fs::exists(root_ / "debug" / "pose" / "000000_44.png"));
  EXPECT_FALSE(fs::exists(root_ / "debug" / "parts" / "000005_part00.png"));
}

TEST_F(CliTest, EvaluateCountMismatchFails) {
  fs::create_directories(root_ / "few");
  fs::copy_file(root_ / "data" / "frames" / "000000.png", root_ / "few" / "000000.png");
  EXPECT_NE(run("evaluate " + (root_ / "few").string() + " " + (root_ / "data").string() + " --output " +
                (root_ / "eval_few").string()),
            0);
  EXPECT_EQ(run("evaluate " + (root_ / "few").string() + " " + (root_ / "data").string() + " --subset --output " +
                (root_ / "eval_sub").string()),
            0);
}
