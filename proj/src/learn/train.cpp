#include "motionxfer/train.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "motionxfer/error.hpp"
#include "motionxfer/log.hpp"
#include "motionxfer/pipeline.hpp"
#include "motionxfer/render.hpp"
#include "motionxfer/tensor.hpp"
#include "motionxfer/warp.hpp"

namespace mxf {
namespace {

using nlohmann::json;

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  if (!j.is_object()) throw Error(where + ": expected an object");
  std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) throw Error(where + ": unknown field '" + key + "'");
  }
}

template <typename T>
void read_field(const json& j, const char* key, T& field) {
  if (j.contains(key)) j.at(key).get_to(field);
}

void set_requires_grad(torch::nn::Module& m, bool on) {
  for (auto& p : m.parameters()) p.set_requires_grad(on);
}

bool finite(double v) { return std::isfinite(v); }

Mask downsample_mask(const Mask& m, int factor) {
  if (factor == 1) return m;
  const int h = m.height() / factor, w = m.width() / factor;
  Mask out(h, w);
  const int need = (factor * factor + 1) / 2;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int n = 0;
      for (int dy = 0; dy < factor; ++dy)
        for (int dx = 0; dx < factor; ++dx) n += m.at(y * factor + dy, x * factor + dx);
      out.at(y, x) = n >= need ? 1 : 0;
    }
  }
  return out;
}

torch::Tensor cat_history(const torch::Tensor& pose_t, const std::vector<int>& history, int k) {
  std::vector<torch::Tensor> slices;
  slices.reserve(k);
  const int pad = k - static_cast<int>(history.size());
  for (int i = 0; i < pad; ++i) slices.push_back(pose_t[history.front()]);
  for (int t : history) slices.push_back(pose_t[t]);
  return torch::cat(slices, 0);
}

json stage_terms_json(const StageTerms& t) {
  return {{"l_rela_d", t.rela_d}, {"l_gp", t.gp}, {"l_rela_g", t.rela_g}, {"l_fm", t.fm},
          {"l_vgg", t.vgg},       {"l_sp", t.sp}, {"total", t.total},     {"l1", t.l1}};
}

double item(const torch::Tensor& t) { return t.item<double>(); }

}  // namespace

void TrainConfig::validate() const {
  if (!(lr > 0)) throw Error("train config: lr must be positive");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) throw Error("train config: betas must be in [0, 1)");
  if (batch < 1) throw Error("train config: batch must be >= 1");
  if (history < 1) throw Error("train config: history must be >= 1");
  if (!(split_ratio > 0 && split_ratio < 1)) throw Error("train config: split ratio must be in (0, 1)");
  if (n_train_pairs < 0 || n_test_pairs < 0) throw Error("train config: pair counts must be non-negative");
  if (resolutions.empty() || resolutions.size() > 2) throw Error("train config: one or two stages are supported");
  if (iterations.size() != resolutions.size() || disc_scales.size() != resolutions.size()) {
    throw Error("train config: resolutions, iterations and disc_scales need one entry per stage");
  }
  for (std::size_t s = 0; s < resolutions.size(); ++s) {
    if (resolutions[s] < 16) throw Error("train config: resolution below 16");
    if (iterations[s] < 0) throw Error("train config: negative iteration count");
    if (disc_scales[s] < 1) throw Error("train config: disc_scales must be >= 1");
  }
  if (resolutions.size() == 2 && resolutions[1] != 2 * resolutions[0]) {
    throw Error("train config: the fine stage must double the coarse resolution");
  }
  if (threads < 1) throw Error("train config: threads must be >= 1");
  if (checkpoint_every < 0) throw Error("train config: checkpoint_every must be >= 0");
  if (aux.channels < 1 || aux.pretrain_steps < 0 || aux.batch < 1 || !(aux.lr > 0)) {
    throw Error("train config: invalid aux encoder settings");
  }
  if (perceptual.script.empty() && perceptual.channels.empty()) {
    throw Error("train config: perceptual pyramid needs at least one stage");
  }
  weights.validate();
  chroma.validate();
  GeneratorSpec g = generator;
  g.in_channels = 3 + kPoseChannels * history;
  g.validate();
  DiscriminatorSpec d = discriminator;
  d.in_channels = 3 + kPoseChannels * history;
  d.n_scales = disc_scales.front();
  d.validate();
}

json to_json(const TrainConfig& c) {
  return {
      {"lr", c.lr},
      {"beta1", c.beta1},
      {"beta2", c.beta2},
      {"batch", c.batch},
      {"history", c.history},
      {"resolutions", c.resolutions},
      {"iterations", c.iterations},
      {"disc_scales", c.disc_scales},
      {"split_ratio", c.split_ratio},
      {"n_train_pairs", c.n_train_pairs},
      {"n_test_pairs", c.n_test_pairs},
      {"seed", c.seed},
      {"weights", to_json(c.weights)},
      {"generator",
       {{"base_channels", c.generator.base_channels},
        {"n_down", c.generator.n_down},
        {"n_residual", c.generator.n_residual},
        {"n_fine_residual", c.generator.n_fine_residual}}},
      {"discriminator", {{"base_channels", c.discriminator.base_channels}, {"n_layers", c.discriminator.n_layers}}},
      {"perceptual",
       {{"script", c.perceptual.script}, {"seed", c.perceptual.seed}, {"channels", c.perceptual.channels}}},
      {"aux",
       {{"channels", c.aux.channels},
        {"pretrain_steps", c.aux.pretrain_steps},
        {"batch", c.aux.batch},
        {"lr", c.aux.lr}}},
      {"raster",
       {{"sigma", c.raster.sigma},
        {"landmark_sigma", c.raster.landmark_sigma},
        {"width_ratio", c.raster.width_ratio},
        {"min_width", c.raster.min_width}}},
      {"chroma",
       {{"key", c.chroma.key}, {"threshold", c.chroma.threshold}, {"cleanup_radius", c.chroma.cleanup_radius}}},
      {"checkpoint_every", c.checkpoint_every},
      {"threads", c.threads},
  };
}

TrainConfig train_config_from_json(const json& j) {
  reject_unknown(j,
                 {"lr", "beta1", "beta2", "batch", "history", "resolutions", "iterations", "disc_scales",
                  "split_ratio", "n_train_pairs", "n_test_pairs", "seed", "weights", "generator", "discriminator",
                  "perceptual", "aux", "raster", "chroma", "checkpoint_every", "threads"},
                 "train config");
  TrainConfig c;
  read_field(j, "lr", c.lr);
  read_field(j, "beta1", c.beta1);
  read_field(j, "beta2", c.beta2);
  read_field(j, "batch", c.batch);
  read_field(j, "history", c.history);
  read_field(j, "resolutions", c.resolutions);
  read_field(j, "iterations", c.iterations);
  read_field(j, "disc_scales", c.disc_scales);
  read_field(j, "split_ratio", c.split_ratio);
  read_field(j, "n_train_pairs", c.n_train_pairs);
  read_field(j, "n_test_pairs", c.n_test_pairs);
  read_field(j, "seed", c.seed);
  read_field(j, "checkpoint_every", c.checkpoint_every);
  read_field(j, "threads", c.threads);
  if (j.contains("weights")) c.weights = loss_weights_from_json(j.at("weights"));
  if (j.contains("generator")) {
    const auto& g = j.at("generator");
    reject_unknown(g, {"base_channels", "n_down", "n_residual", "n_fine_residual"}, "generator");
    read_field(g, "base_channels", c.generator.base_channels);
    read_field(g, "n_down", c.generator.n_down);
    read_field(g, "n_residual", c.generator.n_residual);
    read_field(g, "n_fine_residual", c.generator.n_fine_residual);
  }
  if (j.contains("discriminator")) {
    const auto& d = j.at("discriminator");
    reject_unknown(d, {"base_channels", "n_layers"}, "discriminator");
    read_field(d, "base_channels", c.discriminator.base_channels);
    read_field(d, "n_layers", c.discriminator.n_layers);
  }
  if (j.contains("perceptual")) {
    const auto& p = j.at("perceptual");
    reject_unknown(p, {"script", "seed", "channels"}, "perceptual");
    read_field(p, "script", c.perceptual.script);
    read_field(p, "seed", c.perceptual.seed);
    read_field(p, "channels", c.perceptual.channels);
  }
  if (j.contains("aux")) {
    const auto& a = j.at("aux");
    reject_unknown(a, {"channels", "pretrain_steps", "batch", "lr"}, "aux");
    read_field(a, "channels", c.aux.channels);
    read_field(a, "pretrain_steps", c.aux.pretrain_steps);
    read_field(a, "batch", c.aux.batch);
    read_field(a, "lr", c.aux.lr);
  }
  if (j.contains("raster")) {
    const auto& r = j.at("raster");
    reject_unknown(r, {"sigma", "landmark_sigma", "width_ratio", "min_width"}, "raster");
    read_field(r, "sigma", c.raster.sigma);
    read_field(r, "landmark_sigma", c.raster.landmark_sigma);
    read_field(r, "width_ratio", c.raster.width_ratio);
    read_field(r, "min_width", c.raster.min_width);
  }
  if (j.contains("chroma")) {
    const auto& k = j.at("chroma");
    reject_unknown(k, {"key", "threshold", "cleanup_radius"}, "chroma");
    read_field(k, "key", c.chroma.key);
    read_field(k, "threshold", c.chroma.threshold);
    read_field(k, "cleanup_radius", c.chroma.cleanup_radius);
  }
  c.validate();
  return c;
}

TrainConfig read_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  try {
    return train_config_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Split and pair sampling

std::vector<int> pose_history(int t, int k, int first) {
  std::vector<int> h;
  h.reserve(k);
  for (int i = k - 1; i >= 0; --i) h.push_back(std::max(first, t - i));
  return h;
}

Split split_and_sample(int n_frames, const TrainConfig& cfg) {
  if (n_frames < 2 * cfg.history) {
    throw Error("split_and_sample: video has " + std::to_string(n_frames) + " frames, need at least " +
                std::to_string(2 * cfg.history));
  }
  if (!(cfg.split_ratio > 0 && cfg.split_ratio < 1)) throw Error("split_and_sample: split ratio must be in (0, 1)");
  Split s;
  const int cut = static_cast<int>(std::floor(cfg.split_ratio * n_frames + 1e-9));
  if (cut < 1 || cut >= n_frames) throw Error("split_and_sample: split leaves an empty partition");
  s.train_begin = 0;
  s.train_end = cut;
  s.test_begin = cut;
  s.test_end = n_frames;

  std::mt19937_64 rng(cfg.seed * 0x9E3779B97F4A7C15ULL + 0x5151);
  auto draw = [&](int begin, int end, int count, std::vector<PairSample>& out) {
    std::uniform_int_distribution<int> pick(begin, end - 1);
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
      PairSample p;
      p.input = pick(rng);
      p.reference = pick(rng);
      p.history = pose_history(p.reference, cfg.history, begin);
      out.push_back(std::move(p));
    }
  };
  draw(s.train_begin, s.train_end, cfg.n_train_pairs, s.train_pairs);
  draw(s.test_begin, s.test_end, cfg.n_test_pairs, s.test_pairs);
  return s;
}

std::vector<std::string> split_violations(const Split& split) {
  std::vector<std::string> out;
  auto check = [&](const PairSample& p, std::size_t i) {
    auto bad = [&](int t, const char* what) {
      if (!split.in_train(t)) {
        out.push_back("train pair " + std::to_string(i) + ": " + what + " frame " + std::to_string(t) +
                      " outside the training partition");
      }
    };
    bad(p.input, "input");
    bad(p.reference, "reference");
    for (int t : p.history) bad(t, "history");
  };
  for (std::size_t i = 0; i < split.train_pairs.size(); ++i) check(split.train_pairs[i], i);
  if (split.train_end > split.test_begin) out.push_back("partitions overlap");
  return out;
}

// ---------------------------------------------------------------------------
// Stage data

Pose2D scale_pose(const Pose2D& pose, int factor) {
  if (factor == 1) return pose;
  Pose2D out = pose;
  auto map = [factor](Point2 p) {
    return Point2{(p.x + 0.5) / factor - 0.5, (p.y + 0.5) / factor - 0.5};
  };
  for (auto& k : out.keypoints) k = map(k);
  for (auto& set : out.landmarks)
    for (auto& p : set) p = map(p);
  return out;
}

StageData prepare_stage(const Dataset& data, const Split& split, int resolution, const TrainConfig& cfg) {
  if (data.size() == 0) throw Error("prepare_stage: empty dataset");
  if (resolution > data.height() || data.height() % resolution != 0) {
    throw Error("prepare_stage: resolution " + std::to_string(resolution) + " does not divide frame height " +
                std::to_string(data.height()));
  }
  const int factor = data.height() / resolution;
  if (data.width() % factor != 0) throw Error("prepare_stage: frame width not divisible by the scale factor");
  StageData s;
  s.resolution = resolution;
  const int n = data.size();
  s.frames.reserve(n);
  s.masks.resize(n);
  s.fg.reserve(n);
  s.poses.reserve(n);
  std::vector<torch::Tensor> frames_t, green_t, pose_t, labels_t;
  for (int t = 0; t < n; ++t) {
    s.frames.push_back(factor == 1 ? data.frames[t] : downsample(data.frames[t], factor));
    for (int p = 0; p < kNumParts; ++p) s.masks[t][p] = downsample_mask(data.part_masks[t][p], factor);
    s.fg.push_back(mask_union(s.masks[t]));
    s.poses.push_back(scale_pose(data.poses[t], factor));

    const Image& f = s.frames.back();
    const int h = f.height(), w = f.width();
    frames_t.push_back(to_tensor(f));
    green_t.push_back(to_tensor(over_green(f, s.fg.back(), cfg.chroma)));
    pose_t.push_back(to_tensor(build_pose_volume(s.poses.back(), h, w, cfg.raster).grid));
    auto labels = torch::zeros({h, w}, torch::kInt64);
    auto acc = labels.accessor<int64_t, 2>();
    for (int p = 0; p < kNumParts; ++p) {
      const Mask& m = s.masks[t][p];
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          if (m.at(y, x)) acc[y][x] = p + 1;
    }
    labels_t.push_back(labels);
  }
  s.frames_t = torch::stack(frames_t);
  s.green_t = torch::stack(green_t);
  s.pose_t = torch::stack(pose_t);
  s.labels_t = torch::stack(labels_t);

  std::vector<Image> train_frames(s.frames.begin() + split.train_begin, s.frames.begin() + split.train_end);
  std::vector<Mask> train_fg(s.fg.begin() + split.train_begin, s.fg.begin() + split.train_end);
  s.background = estimate_background(train_frames, train_fg);
  s.background_t = to_tensor(s.background);
  return s;
}

Batch make_batch(const StageData& stage, std::span<const PairSample> pairs, int history) {
  if (pairs.empty()) throw Error("make_batch: no pairs");
  std::vector<torch::Tensor> parts, pose, green, target;
  for (const auto& p : pairs) {
    const auto transforms = estimate_part_transforms(stage.poses[p.input], stage.poses[p.reference]);
    parts.push_back(to_tensor(assemble_parts(stage.frames[p.input], stage.masks[p.input], transforms).grid));
    pose.push_back(cat_history(stage.pose_t, p.history, history));
    green.push_back(stage.green_t[p.reference]);
    target.push_back(stage.frames_t[p.reference]);
  }
  Batch b;
  b.parts = torch::stack(parts);
  b.pose = torch::stack(pose);
  b.green = torch::stack(green);
  b.target = torch::stack(target);
  b.background = stage.background_t.unsqueeze(0).expand_as(b.target).contiguous();
  return b;
}

json StepRecord::to_json() const {
  return {{"step", step},
          {"stage", stage},
          {"resolution", resolution},
          {"loss_d", loss_d},
          {"loss_g", loss_g},
          {"synthesis", stage_terms_json(synthesis)},
          {"fusion", stage_terms_json(fusion)}};
}

json IdentityEval::summary() const {
  return {{"identity_ssim", mean_ssim},
          {"identity_whole", {{"mse", report.whole_summary.mse}, {"psnr", report.whole_summary.psnr},
                              {"ssim", report.whole_summary.ssim}}},
          {"identity_foreground", {{"mse", report.foreground_summary.mse}, {"psnr", report.foreground_summary.psnr},
                                   {"ssim", report.foreground_summary.ssim}}},
          {"pairs", mse_out.size()},
          {"pair_mse_out", finite_mean(mse_out)},
          {"pair_mse_comb", finite_mean(mse_comb)},
          {"fusion_win_rate", fusion_win_rate}};
}

double window_mean(std::span<const double> values, std::size_t first, std::size_t window) {
  if (window == 0 || first + window > values.size()) throw Error("window_mean: window out of range");
  double s = 0;
  for (std::size_t i = first; i < first + window; ++i) s += values[i];
  return s / static_cast<double>(window);
}

// ---------------------------------------------------------------------------
// Trainer

Trainer::Trainer(TrainConfig cfg, std::shared_ptr<const Dataset> data) : cfg_(std::move(cfg)), data_(std::move(data)) {
  cfg_.validate();
  if (!data_) throw Error("trainer: no dataset");
  torch::set_num_threads(cfg_.threads);
  torch::manual_seed(cfg_.seed);
  rng_.seed(cfg_.seed ^ 0xA5A5A5A5DEADBEEFULL);
  split_ = split_and_sample(data_->size(), cfg_);
  const auto violations = split_violations(split_);
  if (!violations.empty()) throw Error("trainer: " + violations.front());

  GeneratorSpec gs = cfg_.generator;
  gs.fine = false;
  gs.in_channels = kPartsChannels + kPoseChannels * cfg_.history;
  models_.synthesis = Generator(gs);
  gs.in_channels = 3 + kPoseChannels * cfg_.history;
  models_.fusion = Generator(gs);
  models_.aux_pose = AuxEncoder(cfg_.aux.channels, kPoseChannels);
  models_.aux_parse = AuxEncoder(cfg_.aux.channels, kNumParts + 1);
  phi_pose_ = std::make_unique<EncoderExtractor>(models_.aux_pose);
  phi_parse_ = std::make_unique<EncoderExtractor>(models_.aux_parse);
  if (cfg_.perceptual.script.empty()) {
    perceptual_ = std::make_unique<RandomPyramidExtractor>(cfg_.perceptual.seed, cfg_.perceptual.channels);
  } else {
    perceptual_ = std::make_unique<ScriptedExtractor>(cfg_.perceptual.script);
  }
  enter_stage(0);
}

int Trainer::stage_end(int stage) const {
  int end = 0;
  for (int s = 0; s <= stage && s < static_cast<int>(cfg_.iterations.size()); ++s) end += cfg_.iterations[s];
  return end;
}

void Trainer::build_critics() {
  DiscriminatorSpec ds = cfg_.discriminator;
  ds.in_channels = 3 + kPoseChannels * cfg_.history;
  ds.n_scales = cfg_.disc_scales[stage_index_];
  models_.disc_synthesis = MultiScaleDiscriminator(ds);
  models_.disc_fusion = MultiScaleDiscriminator(ds);
}

void Trainer::build_optimizers() {
  auto opts = torch::optim::AdamOptions(cfg_.lr).betas({cfg_.beta1, cfg_.beta2});
  std::vector<torch::Tensor> g = models_.synthesis->parameters();
  for (auto& p : models_.fusion->parameters()) g.push_back(p);
  std::vector<torch::Tensor> d = models_.disc_synthesis->parameters();
  for (auto& p : models_.disc_fusion->parameters()) d.push_back(p);
  opt_g_ = std::make_unique<torch::optim::Adam>(g, opts);
  opt_d_ = std::make_unique<torch::optim::Adam>(d, opts);
}

void Trainer::enter_stage(int stage) {
  if (stage < 0 || stage >= static_cast<int>(cfg_.resolutions.size())) {
    throw Error("trainer: no stage " + std::to_string(stage));
  }
  if (stage == stage_index_) return;
  stage_ = prepare_stage(*data_, split_, cfg_.resolutions[stage], cfg_);
  stage_index_ = stage;
  if (stage > 0) {
    if (!models_.synthesis->fine) models_.synthesis->enable_fine(cfg_.generator.n_fine_residual);
    if (!models_.fusion->fine) models_.fusion->enable_fine(cfg_.generator.n_fine_residual);
  }
  build_critics();
  build_optimizers();
  log::info("stage " + std::to_string(stage) + " at " + std::to_string(stage_.resolution) + " px");
}

void Trainer::pretrain_aux() {
  if (aux_ready_) return;
  std::mt19937_64 rng(cfg_.seed + 0x0A0A);
  std::uniform_int_distribution<int> pick(split_.train_begin, split_.train_end - 1);
  std::bernoulli_distribution use_green(0.5);
  set_requires_grad(*models_.aux_pose, true);
  set_requires_grad(*models_.aux_parse, true);
  std::vector<torch::Tensor> params = models_.aux_pose->parameters();
  for (auto& p : models_.aux_parse->parameters()) params.push_back(p);
  torch::optim::Adam opt(params, torch::optim::AdamOptions(cfg_.aux.lr));
  models_.aux_pose->train();
  models_.aux_parse->train();
  double last_pose = 0, last_parse = 0;
  for (int it = 0; it < cfg_.aux.pretrain_steps; ++it) {
    std::vector<torch::Tensor> img, pose, labels;
    for (int b = 0; b < cfg_.aux.batch; ++b) {
      const int t = pick(rng);
      img.push_back(use_green(rng) ? stage_.green_t[t] : stage_.frames_t[t]);
      pose.push_back(stage_.pose_t[t]);
      labels.push_back(stage_.labels_t[t]);
    }
    auto x = torch::stack(img);
    auto l_pose = torch::mse_loss(models_.aux_pose->forward(x), torch::stack(pose));
    auto l_parse = torch::nn::functional::cross_entropy(models_.aux_parse->forward(x), torch::stack(labels));
    opt.zero_grad();
    (l_pose + l_parse).backward();
    opt.step();
    last_pose = l_pose.item<double>();
    last_parse = l_parse.item<double>();
  }
  set_requires_grad(*models_.aux_pose, false);
  set_requires_grad(*models_.aux_parse, false);
  models_.aux_pose->eval();
  models_.aux_parse->eval();
  aux_ready_ = true;
  std::ostringstream msg;
  msg << "aux encoders pretrained for " << cfg_.aux.pretrain_steps << " steps (pose mse " << last_pose
      << ", parsing ce " << last_parse << ")";
  log::info(msg.str());
}

torch::Tensor Trainer::stage_generator_loss(Generator&, MultiScaleDiscriminator& d, const torch::Tensor& fake,
                                            const torch::Tensor& real, const torch::Tensor& pose, StageTerms& terms) {
  const auto& w = cfg_.weights;
  GeneratorLossTerms lt;
  if (w.rela != 0 || w.fm != 0) {
    DiscOutput real_out;
    {
      torch::NoGradGuard guard;
      real_out = d->forward(real, pose);
    }
    const DiscOutput fake_out = d->forward(fake, pose);
    if (w.rela != 0) lt.rela = rela_g_loss(scores(real_out), scores(fake_out));
    if (w.fm != 0) lt.fm = feature_matching_loss(intermediate_features(real_out), intermediate_features(fake_out));
  }
  if (w.vgg != 0) lt.vgg = perceptual_loss(*perceptual_, real, fake);
  if (w.sp != 0) lt.sp = semantic_pose_loss(*phi_pose_, *phi_parse_, real, fake, w.s);
  auto total = total_generator_loss(w, lt);
  if (lt.rela) terms.rela_g = item(*lt.rela);
  if (lt.fm) terms.fm = item(*lt.fm);
  if (lt.vgg) terms.vgg = item(*lt.vgg);
  if (lt.sp) terms.sp = item(*lt.sp);
  terms.total = item(total);
  return total;
}

void Trainer::dump_and_abort(std::span<const PairSample> pairs, const StepRecord& rec) {
  json dump = rec.to_json();
  json jp = json::array();
  for (const auto& p : pairs) jp.push_back({{"input", p.input}, {"reference", p.reference}, {"history", p.history}});
  dump["pairs"] = jp;
  const auto path = dump_dir_ / ("nonfinite_step" + std::to_string(rec.step) + ".json");
  std::ofstream(path) << dump.dump(2) << "\n";
  throw Error("non-finite loss at step " + std::to_string(rec.step) + "; batch dumped to " + path.string());
}

StepRecord Trainer::train_step(std::span<const PairSample> pairs) {
  StepRecord rec;
  rec.step = step_ + 1;
  rec.stage = stage_index_;
  rec.resolution = stage_.resolution;
  const Batch b = make_batch(stage_, pairs, cfg_.history);
  const auto& w = cfg_.weights;
  auto& gh = models_.synthesis;
  auto& gf = models_.fusion;
  auto& dh = models_.disc_synthesis;
  auto& df = models_.disc_fusion;
  gh->train();
  gf->train();

  auto fake_green = synthesize_foreground(gh, b.parts, b.pose);
  auto mask = chroma_mask_batch(fake_green, cfg_.chroma);
  auto comb = composite_tensor(fake_green, mask, b.background);
  auto fake_out = fuse(gf, comb, b.pose);

  // Critic update.
  set_requires_grad(*dh, true);
  set_requires_grad(*df, true);
  auto critic_loss = [&](MultiScaleDiscriminator& d, const torch::Tensor& real, const torch::Tensor& fake,
                         StageTerms& t) {
    const auto fake_d = fake.detach();
    auto rela = rela_d_loss(scores(d->forward(real, b.pose)), scores(d->forward(fake_d, b.pose)));
    Critic critic = [&d](const torch::Tensor& x, const torch::Tensor& c) { return scores(d->forward(x, c)); };
    torch::Tensor loss = rela;
    t.rela_d = item(rela);
    if (w.gp != 0) {
      auto gp = gradient_penalty(critic, real, fake_d, b.pose);
      t.gp = item(gp);
      loss = loss + w.gp * gp;
    }
    return loss;
  };
  opt_d_->zero_grad();
  auto loss_d = critic_loss(dh, b.green, fake_green, rec.synthesis) + critic_loss(df, b.target, fake_out, rec.fusion);
  rec.loss_d = item(loss_d);
  if (!finite(rec.loss_d)) dump_and_abort(pairs, rec);
  loss_d.backward();
  opt_d_->step();

  // Generator update through the compositing path.
  const bool any_g = w.rela != 0 || w.fm != 0 || w.vgg != 0 || w.sp != 0;
  if (any_g) {
    set_requires_grad(*dh, false);
    set_requires_grad(*df, false);
    opt_g_->zero_grad();
    auto loss_h = stage_generator_loss(gh, dh, fake_green, b.green, b.pose, rec.synthesis);
    auto loss_f = stage_generator_loss(gf, df, fake_out, b.target, b.pose, rec.fusion);
    auto loss_g = loss_h + loss_f;
    rec.loss_g = item(loss_g);
    if (!finite(rec.loss_g)) dump_and_abort(pairs, rec);
    loss_g.backward();
    opt_g_->step();
    set_requires_grad(*dh, true);
    set_requires_grad(*df, true);
  }
  rec.synthesis.l1 = item((fake_green.detach() - b.green).abs().mean());
  rec.fusion.l1 = item((fake_out.detach() - b.target).abs().mean());
  ++step_;
  return rec;
}

StepRecord Trainer::step_once() {
  if (split_.train_pairs.empty()) throw Error("trainer: no training pairs");
  std::uniform_int_distribution<std::size_t> pick(0, split_.train_pairs.size() - 1);
  std::vector<PairSample> batch;
  batch.reserve(cfg_.batch);
  for (int i = 0; i < cfg_.batch; ++i) batch.push_back(split_.train_pairs[pick(rng_)]);
  return train_step(batch);
}

IdentityEval Trainer::evaluate() {
  torch::NoGradGuard guard;
  models_.synthesis->eval();
  models_.fusion->eval();
  constexpr std::size_t kChunk = 8;
  auto run = [&](const std::vector<PairSample>& pairs, std::vector<Image>& out, std::vector<Image>& comb) {
    for (std::size_t i = 0; i < pairs.size(); i += kChunk) {
      const auto n = std::min(kChunk, pairs.size() - i);
      const Batch b = make_batch(stage_, std::span(pairs).subspan(i, n), cfg_.history);
      auto green = synthesize_foreground(models_.synthesis, b.parts, b.pose);
      auto c = composite_tensor(green, chroma_mask_batch(green, cfg_.chroma), b.background);
      auto o = fuse(models_.fusion, c, b.pose);
      for (std::size_t k = 0; k < n; ++k) {
        out.push_back(to_image(o[k]));
        comb.push_back(to_image(c[k]));
      }
    }
  };

  IdentityEval ev;
  std::vector<PairSample> identity;
  std::vector<Image> gt;
  std::vector<Mask> fg;
  std::vector<std::string> names;
  std::vector<Pose2D> test_poses;
  for (int t = split_.test_begin; t < split_.test_end; ++t) {
    identity.push_back({t, t, pose_history(t, cfg_.history, split_.test_begin)});
    gt.push_back(stage_.frames[t]);
    fg.push_back(stage_.fg[t]);
    names.push_back(frame_filename(t));
    test_poses.push_back(stage_.poses[t]);
  }
  std::vector<Image> out, comb;
  run(identity, out, comb);
  ev.report = evaluate_sequences(out, gt, fg, names);
  std::vector<double> ssim_values;
  for (const auto& m : ev.report.whole) ssim_values.push_back(m.ssim);
  std::vector<Pose2D> train_poses(stage_.poses.begin() + split_.train_begin,
                                  stage_.poses.begin() + split_.train_end);
  ev.report.novelty = novelty_curve(test_poses, ssim_values, train_poses);
  ev.mean_ssim = ev.report.whole_summary.ssim;

  out.clear();
  comb.clear();
  run(split_.test_pairs, out, comb);
  std::size_t wins = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Image ref = to_byte_scale(quantize(stage_.frames[split_.test_pairs[i].reference]));
    ev.mse_out.push_back(mse(to_byte_scale(quantize(out[i])), ref));
    ev.mse_comb.push_back(mse(to_byte_scale(quantize(comb[i])), ref));
    if (ev.mse_out.back() <= ev.mse_comb.back()) ++wins;
  }
  ev.fusion_win_rate = out.empty() ? 0.0 : static_cast<double>(wins) / static_cast<double>(out.size());
  models_.synthesis->train();
  models_.fusion->train();
  return ev;
}

// ---------------------------------------------------------------------------
// Full run

TrainSummary train(std::shared_ptr<const Dataset> data, const TrainConfig& cfg, const TrainOptions& opts) {
  namespace fs = std::filesystem;
  const auto start = std::chrono::steady_clock::now();
  fs::create_directories(opts.output);
  Trainer trainer(cfg, std::move(data));
  trainer.set_dump_dir(opts.output);
  TrainSummary summary;

  const auto baseline_path = opts.output / "baseline.json";
  if (opts.resume) {
    trainer.load(*opts.resume);
    log::info("resumed at step " + std::to_string(trainer.step()));
  } else {
    if (opts.evaluate_baseline) {
      summary.baseline = trainer.evaluate();
      std::ofstream(baseline_path) << summary.baseline.summary().dump(2) << "\n";
    }
    trainer.pretrain_aux();
  }

  std::ofstream metrics(opts.output / "metrics.jsonl", opts.resume ? std::ios::app : std::ios::trunc);
  const int last_stage = static_cast<int>(cfg.resolutions.size()) - 1;
  const int total = trainer.stage_end(last_stage);
  const auto checkpoint = opts.output / "checkpoint.pt";
  while (trainer.step() < total) {
    while (trainer.step() >= trainer.stage_end(trainer.stage())) trainer.enter_stage(trainer.stage() + 1);
    StepRecord rec = trainer.step_once();
    metrics << rec.to_json().dump() << "\n";
    summary.log.push_back(std::move(rec));
    if (cfg.checkpoint_every > 0 && trainer.step() % cfg.checkpoint_every == 0) trainer.save(checkpoint);
  }
  metrics.flush();
  trainer.save(checkpoint);

  summary.final_eval = trainer.evaluate();
  json s = summary.final_eval.summary();
  if (!opts.resume && opts.evaluate_baseline) s["baseline"] = summary.baseline.summary();
  s["steps"] = trainer.step();
  std::ofstream(opts.output / "summary.json") << s.dump(2) << "\n";
  std::ofstream(opts.output / "report.json") << summary.final_eval.report.to_json().dump(2) << "\n";
  std::ofstream(opts.output / "report.txt") << summary.final_eval.report.to_table();
  std::ofstream(opts.output / "novelty.csv") << summary.final_eval.report.novelty_csv();
  summary.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return summary;
}

}  // namespace mxf
