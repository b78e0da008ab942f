#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "motionxfer/compositing.hpp"
#include "motionxfer/dataset.hpp"
#include "motionxfer/heatmap.hpp"
#include "motionxfer/losses.hpp"
#include "motionxfer/metrics.hpp"
#include "motionxfer/nets.hpp"

namespace mxf {

struct PerceptualConfig {
  std::string script;  // TorchScript feature extractor; empty selects the random pyramid
  std::uint64_t seed = 7;
  std::vector<int> channels{8, 16, 32, 32, 32};
};

struct AuxConfig {
  int channels = 16;
  int pretrain_steps = 200;
  int batch = 8;
  double lr = 1e-3;
};

struct TrainConfig {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  int batch = 4;
  int history = 3;
  // One entry per stage, coarse first. Full scale trains 256 then 512 for
  // many more iterations; these are desk defaults.
  std::vector<int> resolutions{64, 128};
  std::vector<int> iterations{3000, 2000};
  std::vector<int> disc_scales{2, 3};
  double split_ratio = 0.85;
  int n_train_pairs = 2000;  // full scale: 20000
  int n_test_pairs = 200;    // full scale: 2000
  std::uint64_t seed = 0;
  LossWeights weights;
  GeneratorSpec generator;          // in_channels is derived per network
  DiscriminatorSpec discriminator;  // in_channels and n_scales are derived
  PerceptualConfig perceptual;
  AuxConfig aux;
  RasterConfig raster;
  ChromaKeyConfig chroma;
  int checkpoint_every = 1000;  // 0 disables periodic checkpoints
  int threads = 1;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
/// Unknown fields are rejected; absent fields keep their defaults.
TrainConfig train_config_from_json(const nlohmann::json& j);
TrainConfig read_train_config(const std::filesystem::path& path);

struct PairSample {
  int input = 0;
  int reference = 0;
  std::vector<int> history;  // oldest first, ends with `reference`
};

struct Split {
  int train_begin = 0, train_end = 0;  // [begin, end)
  int test_begin = 0, test_end = 0;
  std::vector<PairSample> train_pairs;
  std::vector<PairSample> test_pairs;

  bool in_train(int t) const { return t >= train_begin && t < train_end; }
  bool in_test(int t) const { return t >= test_begin && t < test_end; }
};

/// History t-K+1 .. t, clamped to `first`.
std::vector<int> pose_history(int t, int k, int first);

/// Contiguous temporal split, then pairs drawn uniformly with replacement
/// inside each partition.
Split split_and_sample(int n_frames, const TrainConfig& cfg);

/// Problems found when checking that no test frame feeds a training pair.
std::vector<std::string> split_violations(const Split& split);

/// Dataset resampled to one training resolution.
struct StageData {
  int resolution = 0;
  std::vector<Image> frames;
  std::vector<std::array<Mask, kNumParts>> masks;
  std::vector<Mask> fg;
  std::vector<Pose2D> poses;
  torch::Tensor frames_t;  // [N, 3, R, R]
  torch::Tensor green_t;   // [N, 3, R, R] foreground over the key colour
  torch::Tensor pose_t;    // [N, 15, R, R]
  torch::Tensor labels_t;  // [N, R, R] int64, 0 = background, 1 + part index
  Image background;        // estimated from the training partition
  torch::Tensor background_t;  // [3, R, R]
};

/// Scales pixel coordinates for average pooling by `factor`.
Pose2D scale_pose(const Pose2D& pose, int factor);

StageData prepare_stage(const Dataset& data, const Split& split, int resolution, const TrainConfig& cfg);

struct Batch {
  torch::Tensor parts;       // [B, 30, R, R]
  torch::Tensor pose;        // [B, 15K, R, R]
  torch::Tensor green;       // [B, 3, R, R]
  torch::Tensor target;      // [B, 3, R, R]
  torch::Tensor background;  // [B, 3, R, R]
};

Batch make_batch(const StageData& stage, std::span<const PairSample> pairs, int history);

struct StageTerms {
  double rela_d = 0, gp = 0, rela_g = 0, fm = 0, vgg = 0, sp = 0, total = 0, l1 = 0;
};

struct StepRecord {
  int step = 0;  // global, 1-based
  int stage = 0;
  int resolution = 0;
  StageTerms synthesis;
  StageTerms fusion;
  double loss_d = 0;
  double loss_g = 0;

  nlohmann::json to_json() const;
};

struct Models {
  Generator synthesis{nullptr};
  Generator fusion{nullptr};
  MultiScaleDiscriminator disc_synthesis{nullptr};
  MultiScaleDiscriminator disc_fusion{nullptr};
  AuxEncoder aux_pose{nullptr};
  AuxEncoder aux_parse{nullptr};
};

struct IdentityEval {
  EvalReport report;            // test frames in temporal order, I_ref = I_in
  std::vector<double> mse_out;  // per held-out pair, whole frame, 8-bit scale
  std::vector<double> mse_comb;
  double mean_ssim = 0.0;
  double fusion_win_rate = 0.0;  // share of pairs with mse_out <= mse_comb

  nlohmann::json summary() const;
};

class Trainer {
 public:
  Trainer(TrainConfig cfg, std::shared_ptr<const Dataset> data);

  const TrainConfig& config() const { return cfg_; }
  const Split& split() const { return split_; }
  const StageData& stage_data() const { return stage_; }
  Models& models() { return models_; }
  int stage() const { return stage_index_; }
  int step() const { return step_; }
  /// Global step at which `stage` ends.
  int stage_end(int stage) const;

  /// Trains the frozen pose/parsing encoders (once, before the first stage).
  void pretrain_aux();
  bool aux_ready() const { return aux_ready_; }

  /// Moves to `stage`, adding the fine enhancer and rebuilding critics and
  /// optimisers when the resolution changes.
  void enter_stage(int stage);

  /// One alternating critic/generator update on explicit pairs.
  StepRecord train_step(std::span<const PairSample> pairs);
  /// Draws a batch from the training pairs and calls train_step.
  StepRecord step_once();

  IdentityEval evaluate();

  void save(const std::filesystem::path& path) const;
  /// Throws on a config mismatch or a corrupt file.
  void load(const std::filesystem::path& path);

  /// Where non-finite-loss dumps go; defaults to the working directory.
  void set_dump_dir(std::filesystem::path dir) { dump_dir_ = std::move(dir); }

 private:
  void build_critics();
  void build_optimizers();
  torch::Tensor stage_generator_loss(Generator& g, MultiScaleDiscriminator& d, const torch::Tensor& fake,
                                     const torch::Tensor& real, const torch::Tensor& pose, StageTerms& terms);
  [[noreturn]] void dump_and_abort(std::span<const PairSample> pairs, const StepRecord& rec);

  TrainConfig cfg_;
  std::shared_ptr<const Dataset> data_;
  Split split_;
  StageData stage_;
  int stage_index_ = -1;
  int step_ = 0;
  bool aux_ready_ = false;
  Models models_;
  std::unique_ptr<FeatureExtractor> perceptual_;
  std::unique_ptr<EncoderExtractor> phi_pose_;
  std::unique_ptr<EncoderExtractor> phi_parse_;
  std::unique_ptr<torch::optim::Adam> opt_g_;
  std::unique_ptr<torch::optim::Adam> opt_d_;
  std::mt19937_64 rng_;
  std::filesystem::path dump_dir_ = ".";
};

struct TrainSummary {
  IdentityEval baseline;
  IdentityEval final_eval;
  std::vector<StepRecord> log;
  double seconds = 0.0;
};

struct TrainOptions {
  std::filesystem::path output;
  std::optional<std::filesystem::path> resume;
  bool evaluate_baseline = true;
};

/// Full run: baseline evaluation, encoder pretraining, staged training with a
/// metrics log (metrics.jsonl) and checkpoints, then a final evaluation.
TrainSummary train(std::shared_ptr<const Dataset> data, const TrainConfig& cfg, const TrainOptions& opts);

/// Smoothed series: mean of consecutive windows of `window` values.
double window_mean(std::span<const double> values, std::size_t first, std::size_t window);

}  // namespace mxf
