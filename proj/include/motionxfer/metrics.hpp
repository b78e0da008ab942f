#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "motionxfer/image.hpp"
#include "motionxfer/pose.hpp"

namespace mxf {

/// Images are compared on the 0..255 scale; convert [-1, 1] frames with
/// to_byte_scale() first.
inline constexpr double kPixelMax = 255.0;

struct SsimConfig {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

struct FrameMetrics {
  double mse = 0.0;
  double psnr = 0.0;  // +inf when mse == 0
  double ssim = 0.0;
};

double mse(const Image& x, const Image& y, const Mask* mask = nullptr);
/// 10 log10(MAX^2 / mse); +inf for a zero error.
double psnr_from_mse(double mse_value);
/// Mean SSIM over "valid" window centres (the whole window inside the frame),
/// restricted to masked centres when a mask is given; channels averaged.
double ssim(const Image& x, const Image& y, const Mask* mask = nullptr, const SsimConfig& cfg = {});

/// Throws when the mask selects no pixel (or no valid SSIM centre).
FrameMetrics frame_metrics(const Image& x, const Image& y, const Mask* mask = nullptr,
                           const SsimConfig& cfg = {});

/// Mean over t of MSE[(gen_t - gen_{t-1}) - (gt_t - gt_{t-1})].
double diff_frame_mse(std::span<const Image> gen, std::span<const Image> gt,
                      std::span<const Mask> masks = {});

struct NoveltyPoint {
  double novelty = 0.0;
  double ssim = 0.0;
};

std::vector<NoveltyPoint> novelty_curve(std::span<const Pose2D> test_poses,
                                        std::span<const double> test_ssim,
                                        std::span<const Pose2D> train_poses, int k = kDefaultNoveltyK);

/// Mean ignoring infinities; `excluded` receives how many were skipped.
double finite_mean(std::span<const double> values, std::size_t* excluded = nullptr);

struct RegionSummary {
  double mse = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
  std::size_t psnr_inf = 0;  // frames with zero error, excluded from the PSNR mean
};

struct EvalReport {
  std::vector<std::string> names;  // per-frame identifiers
  std::vector<FrameMetrics> whole;
  std::vector<FrameMetrics> foreground;
  RegionSummary whole_summary;
  RegionSummary foreground_summary;
  double diff_mse_whole = 0.0;
  double diff_mse_foreground = 0.0;
  std::vector<NoveltyPoint> novelty;

  nlohmann::json to_json() const;
  /// Plain-text table laid out as method rows against MSE / PSNR / SSIM.
  std::string to_table(const std::string& method = "ours") const;
  std::string novelty_csv() const;
};

/// Frames are in [-1, 1]; metrics are computed on the 8-bit scale.
EvalReport evaluate_sequences(std::span<const Image> gen, std::span<const Image> gt,
                              std::span<const Mask> fg_masks, std::vector<std::string> names = {});

std::string format_psnr(double psnr);

}  // namespace mxf
