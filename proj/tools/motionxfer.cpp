#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "motionxfer/checkpoint.hpp"
#include "motionxfer/compositing.hpp"
#include "motionxfer/dataset.hpp"
#include "motionxfer/log.hpp"
#include "motionxfer/metrics.hpp"
#include "motionxfer/pipeline.hpp"
#include "motionxfer/png_io.hpp"
#include "motionxfer/pose_io.hpp"
#include "motionxfer/render.hpp"
#include "motionxfer/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  bool force = false;
  std::string output;
};

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw mxf::Error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw mxf::Error(path.string() + ": " + e.what());
  }
}

// With --force a previous run's directory (recognised by its manifest) is
// cleared; otherwise a non-empty directory is refused.
void prepare_output(const fs::path& dir, bool force) {
  if (dir.empty()) throw mxf::Error("--output is required");
  if (fs::exists(dir) && !fs::is_directory(dir)) throw mxf::Error(dir.string() + " exists and is not a directory");
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!force) throw mxf::Error(dir.string() + " is not empty; pass --force to overwrite");
    if (!fs::exists(dir / "manifest.json")) {
      throw mxf::Error(dir.string() + " has no manifest.json; --force only replaces earlier outputs of this tool");
    }
    for (const auto& e : fs::directory_iterator(dir)) fs::remove_all(e.path());
  }
  fs::create_directories(dir);
}

void write_manifest(const fs::path& dir, const std::string& command, const json& config, std::uint64_t seed,
                    const json& inputs) {
  json m = {{"command", command},
            {"config", config},
            {"seed", seed},
            {"version", MXF_VERSION},
            {"inputs", inputs}};
  std::ofstream(dir / "manifest.json") << m.dump(2) << "\n";
}

std::vector<fs::path> png_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw mxf::Error(dir.string() + " is not a directory");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".png") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

int frame_index_of(const fs::path& p) {
  try {
    return std::stoi(p.stem().string());
  } catch (const std::exception&) {
    throw mxf::Error("cannot read a frame index from " + p.filename().string());
  }
}

// ---------------------------------------------------------------------------

void run_synth(const Common& c) {
  mxf::SceneConfig cfg;
  if (!c.config.empty()) cfg = mxf::scene_config_from_json(read_json_file(c.config));
  mxf::validate_scene_config(cfg);
  const std::uint64_t seed = c.seed.value_or(0);
  const fs::path out = c.output;
  prepare_output(out, c.force);
  const auto frames = mxf::generate_video(cfg, seed);
  json meta = mxf::scene_config_to_json(cfg);
  meta["seed"] = seed;
  mxf::write_dataset(out, frames, meta);
  const auto problems = mxf::validate_dataset_dir(out);
  for (const auto& p : problems) mxf::log::error("dataset check: " + p);
  write_manifest(out, "synth-data", mxf::scene_config_to_json(cfg), seed, json::object());
  mxf::log::info("wrote " + std::to_string(frames.size()) + " frames to " + out.string());
}

void run_train(const Common& c, const std::string& data_dir, const std::string& resume) {
  mxf::TrainConfig cfg;
  if (!c.config.empty()) cfg = mxf::read_train_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  cfg.validate();
  const fs::path out = c.output;
  if (resume.empty()) {
    prepare_output(out, c.force);
  } else {
    fs::create_directories(out);
  }
  auto data = std::make_shared<const mxf::Dataset>(mxf::read_dataset(data_dir));
  write_manifest(out, "train", mxf::to_json(cfg), cfg.seed, {{"data", data_dir}, {"resume", resume}});
  mxf::TrainOptions opts;
  opts.output = out;
  if (!resume.empty()) opts.resume = fs::path(resume);
  const auto summary = mxf::train(data, cfg, opts);
  std::cout << summary.final_eval.report.to_table();
  std::cout << "identity ssim " << summary.final_eval.mean_ssim << ", fusion win rate "
            << summary.final_eval.fusion_win_rate << ", " << summary.seconds << " s\n";
}

// Reference poses come from a keypoint file or a dataset directory.
std::vector<mxf::PoseRecord> read_reference(const fs::path& ref) {
  if (fs::is_directory(ref)) return mxf::read_pose_file(ref / "poses.json");
  return mxf::read_pose_file(ref);
}

void run_transfer(const Common& c, const std::string& target_dir, const std::string& reference,
                  const std::string& checkpoint, const std::string& debug_dir) {
  const fs::path out = c.output;
  prepare_output(out, c.force);
  auto models = mxf::load_inference_models(checkpoint);
  const auto& cfg = models.info.config;
  torch::set_num_threads(cfg.threads);
  const auto data = mxf::read_dataset(target_dir);
  const int res = models.resolution();
  mxf::Split all;
  all.train_begin = 0;
  all.train_end = data.size();
  all.test_begin = all.test_end = data.size();
  const auto stage = mxf::prepare_stage(data, all, res, cfg);
  const int factor = data.height() / res;

  const auto records = read_reference(reference);
  fs::create_directories(out / "foreground");
  fs::create_directories(out / "masks");
  write_manifest(out, "transfer", mxf::to_json(cfg), cfg.seed,
                 {{"target", target_dir}, {"reference", reference}, {"checkpoint", checkpoint}});

  mxf::TransferSettings settings;
  settings.history = cfg.history;
  settings.raster = cfg.raster;
  settings.chroma = cfg.chroma;
  std::vector<mxf::Pose2D> history;
  json selections = json::array();
  int written = 0, skipped = 0;
  for (const auto& rec : records) {
    const int index = rec.frame_index;
    if (!rec.pose) {
      mxf::log::warn("reference frame " + std::to_string(index) + " skipped: " + rec.error);
      ++skipped;
      continue;
    }
    const auto ref = mxf::scale_pose(*rec.pose, factor);
    mxf::NearestPose nearest;
    try {
      nearest = mxf::nearest_training_pose(ref, stage.poses, 1);
    } catch (const mxf::Error& e) {
      mxf::log::warn("reference frame " + std::to_string(index) + " skipped: " + e.what());
      ++skipped;
      continue;
    }
    history.push_back(ref);
    if (static_cast<int>(history.size()) > cfg.history) history.erase(history.begin());
    const int in = static_cast<int>(nearest.index);
    const auto result = mxf::transfer(models.synthesis, models.fusion, stage.frames[in], stage.masks[in],
                                      stage.poses[in], history, stage.background, settings);
    mxf::write_png(out / mxf::frame_filename(index), result.output);
    mxf::write_png(out / "foreground" / mxf::frame_filename(index), result.foreground);
    mxf::write_mask_png(out / "masks" / mxf::frame_filename(index), result.fg_mask);
    if (!debug_dir.empty()) {
      mxf::dump_pose_channels(fs::path(debug_dir) / "pose", index, result.pose.grid);
      mxf::dump_part_crops(fs::path(debug_dir) / "parts", index, result.parts);
    }
    selections.push_back({{"reference", index}, {"input", in}, {"distance", nearest.distance}});
    ++written;
  }
  std::ofstream(out / "selections.json") << selections.dump(2) << "\n";
  mxf::log::info("transfer wrote " + std::to_string(written) + " frames, skipped " + std::to_string(skipped));
}

void run_evaluate(const Common& c, const std::string& gen_dir, const std::string& gt_dir,
                  const std::string& train_poses, bool subset) {
  const fs::path out = c.output;
  prepare_output(out, c.force);
  const auto gt = mxf::read_dataset(gt_dir);
  const auto files = png_files(gen_dir);
  if (files.empty()) throw mxf::Error(gen_dir + " holds no frames");
  if (!subset && static_cast<int>(files.size()) != gt.size()) {
    throw mxf::Error("frame count mismatch: " + std::to_string(files.size()) + " generated, " +
                     std::to_string(gt.size()) + " ground truth (pass --subset to match by name)");
  }
  std::vector<mxf::Image> gen, ref;
  std::vector<mxf::Mask> masks;
  std::vector<std::string> names;
  std::vector<mxf::Pose2D> poses;
  for (const auto& f : files) {
    const int t = frame_index_of(f);
    if (t < 0 || t >= gt.size()) throw mxf::Error("frame count mismatch: no ground truth for " + f.filename().string());
    gen.push_back(mxf::read_png(f));
    const mxf::Image& g = gt.frames[t];
    if (!gen.back().same_shape(g)) {
      gen.back() = mxf::resize_bilinear(gen.back(), g.height(), g.width());
      mxf::log::warn(f.filename().string() + " resized to the ground-truth resolution");
    }
    ref.push_back(g);
    masks.push_back(gt.fg_mask(t));
    names.push_back(f.filename().string());
    poses.push_back(gt.poses[t]);
  }
  auto report = mxf::evaluate_sequences(gen, ref, masks, names);
  if (!train_poses.empty()) {
    const auto pool = mxf::read_poses_strict(train_poses);
    std::vector<double> ssim;
    for (const auto& m : report.whole) ssim.push_back(m.ssim);
    report.novelty = mxf::novelty_curve(poses, ssim, pool);
    std::ofstream(out / "novelty.csv") << report.novelty_csv();
  }
  std::ofstream(out / "report.json") << report.to_json().dump(2) << "\n";
  std::ofstream(out / "report.txt") << report.to_table();
  write_manifest(out, "evaluate", json::object(), c.seed.value_or(0),
                 {{"generated", gen_dir}, {"ground_truth", gt_dir}, {"train_poses", train_poses}});
  std::cout << report.to_table();
}

void run_recomposite(const Common& c, const std::string& fg_dir, const std::string& mask_dir,
                     const std::string& background, bool no_blur, double sigma, int band) {
  const fs::path out = c.output;
  prepare_output(out, c.force);
  mxf::BlendConfig blend;
  if (!c.config.empty()) {
    const auto j = read_json_file(c.config);
    for (const auto& [key, _] : j.items())
      if (key != "blur" && key != "sigma" && key != "band") throw mxf::Error("recomposite config: unknown field '" + key + "'");
    blend.blur = j.value("blur", blend.blur);
    blend.sigma = j.value("sigma", blend.sigma);
    blend.band = j.value("band", blend.band);
  }
  if (no_blur) blend.blur = false;
  if (sigma > 0) blend.sigma = sigma;
  if (band >= 0) blend.band = band;
  const auto bg = mxf::read_png(background);
  const auto files = png_files(fg_dir);
  for (const auto& f : files) {
    const auto mask_path = fs::path(mask_dir) / f.filename();
    if (!fs::exists(mask_path)) throw mxf::Error("no mask for " + f.filename().string());
    const auto fg = mxf::read_png(f);
    const auto mask = mxf::read_mask_png(mask_path);
    if (!mask.same_extent(fg.height(), fg.width())) throw mxf::Error("mask size mismatch for " + f.filename().string());
    mxf::write_png(out / f.filename(), mxf::recomposite(fg, mask, bg, blend));
  }
  write_manifest(out, "recomposite", {{"blur", blend.blur}, {"sigma", blend.sigma}, {"band", blend.band}},
                 c.seed.value_or(0), {{"foreground", fg_dir}, {"masks", mask_dir}, {"background", background}});
  mxf::log::info("recomposited " + std::to_string(files.size()) + " frames");
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "Config file (JSON)");
  app->add_option("--seed", c.seed, "Seed override");
  app->add_flag("--force", c.force, "Overwrite a non-empty output directory");
  app->add_option("--output", c.output, "Output directory")->required();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stage motion transfer: synthetic data, training, transfer and evaluation"};
  app.require_subcommand(1);
  std::string level = "info";
  app.add_option("--log-level", level, "debug, info, warn or error")
      ->check(CLI::IsMember({"debug", "info", "warn", "error"}));

  Common c;
  auto* synth = app.add_subcommand("synth-data", "Render a synthetic labelled video");
  add_common(synth, c);

  auto* train = app.add_subcommand("train", "Train both generators on a video directory");
  add_common(train, c);
  std::string data_dir, resume;
  train->add_option("data", data_dir, "Video directory")->required()->check(CLI::ExistingDirectory);
  train->add_option("--resume", resume, "Checkpoint to resume from")->check(CLI::ExistingFile);

  auto* transfer = app.add_subcommand("transfer", "Re-render a target video following reference poses");
  add_common(transfer, c);
  std::string target, reference, checkpoint, debug_dir;
  transfer->add_option("target", target, "Target video directory")->required()->check(CLI::ExistingDirectory);
  transfer->add_option("reference", reference, "Reference keypoint file or video directory")
      ->required()
      ->check(CLI::ExistingPath);
  transfer->add_option("checkpoint", checkpoint, "Trained checkpoint")->required()->check(CLI::ExistingFile);
  transfer->add_option("--debug-dir", debug_dir, "Also write pose channels and warped part crops here");

  auto* evaluate = app.add_subcommand("evaluate", "Score generated frames against ground truth");
  add_common(evaluate, c);
  std::string gen_dir, gt_dir, train_poses;
  bool subset = false;
  evaluate->add_option("generated", gen_dir, "Directory of generated frames")->required()->check(CLI::ExistingDirectory);
  evaluate->add_option("ground_truth", gt_dir, "Ground-truth video directory")->required()->check(CLI::ExistingDirectory);
  evaluate->add_option("--train-poses", train_poses, "Training keypoint file for the novelty curve")
      ->check(CLI::ExistingFile);
  evaluate->add_flag("--subset", subset, "Generated frames cover a subset, matched by file name");

  auto* recomp = app.add_subcommand("recomposite", "Composite generated foregrounds onto a new background");
  add_common(recomp, c);
  std::string fg_dir, mask_dir, background;
  bool no_blur = false;
  double sigma = 0.0;
  int band = -1;
  recomp->add_option("foreground", fg_dir, "Foreground frames")->required()->check(CLI::ExistingDirectory);
  recomp->add_option("masks", mask_dir, "Foreground masks")->required()->check(CLI::ExistingDirectory);
  recomp->add_option("background", background, "Background image")->required()->check(CLI::ExistingFile);
  recomp->add_flag("--no-blur", no_blur, "Hard composite without boundary blur");
  recomp->add_option("--sigma", sigma, "Boundary blur sigma in pixels");
  recomp->add_option("--band", band, "Boundary band width in pixels");

  CLI11_PARSE(app, argc, argv);
  static const std::map<std::string, mxf::log::Level> kLevels = {{"debug", mxf::log::Level::kDebug},
                                                                 {"info", mxf::log::Level::kInfo},
                                                                 {"warn", mxf::log::Level::kWarn},
                                                                 {"error", mxf::log::Level::kError}};
  mxf::log::set_level(kLevels.at(level));

  try {
    if (*synth) run_synth(c);
    if (*train) run_train(c, data_dir, resume);
    if (*transfer) run_transfer(c, target, reference, checkpoint, debug_dir);
    if (*evaluate) run_evaluate(c, gen_dir, gt_dir, train_poses, subset);
    if (*recomp) run_recomposite(c, fg_dir, mask_dir, background, no_blur, sigma, band);
  } catch (const std::exception& e) {
    mxf::log::error(e.what());
  }
  return mxf::log::error_count() == 0 ? 0 : 1;
}
