#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "motionxfer/image.hpp"
#include "motionxfer/pose.hpp"

namespace mxf {

enum class BackgroundStyle { kStatic, kDriftingTexture, kMovingDistractor };

std::string to_string(BackgroundStyle style);
BackgroundStyle background_style_from_string(const std::string& name);

struct SceneConfig {
  int height = 64;
  int width = 64;
  int n_frames = 300;
  int history = 3;  // K; videos must hold at least 2K frames
  std::uint64_t appearance_seed = 1;
  std::uint64_t motion_seed = 2;
  BackgroundStyle background = BackgroundStyle::kStatic;
  bool shadow = true;
  double motion_amplitude = 1.0;  // scales every joint-angle oscillation
};

/// Throws with the first violated constraint.
void validate_scene_config(const SceneConfig& cfg);

struct LabeledFrame {
  Image image;                                // H x W x 3 in [-1, 1]
  Pose2D pose;
  std::array<Mask, kNumParts> part_masks;     // visible region of each part
  Mask fg_mask;                               // union of part_masks
  std::array<PartSegment, kNumParts> bones;   // renderer's own bone list
};

/// Deterministic in (cfg, seed). Throws if the figure leaves the frame in
/// more than 10% of frames.
std::vector<LabeledFrame> generate_video(const SceneConfig& cfg, std::uint64_t seed);

/// Background layer alone (no figure, no shadow) at frame `t`.
Image render_background(const SceneConfig& cfg, std::uint64_t seed, int t);

/// Upper bound on per-frame displacement of any keypoint implied by the
/// motion script.
double keypoint_speed_bound(const SceneConfig& cfg);

/// Per-pixel mean over frames where the pixel is background; pixels never
/// exposed are filled by iterating the 8-neighbour mean to a fixpoint.
Image estimate_background(std::span<const Image> frames, std::span<const Mask> fg_masks);

/// Iterates hole := mean of in-frame 8-neighbours (known pixels fixed)
/// until the largest update falls below `tol`.
void fill_holes(Image& image, const Mask& holes, double tol = 1e-7, int max_iters = 200000);

}  // namespace mxf
