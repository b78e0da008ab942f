#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "motionxfer/image.hpp"
#include "motionxfer/pose.hpp"

namespace mxf {

inline constexpr int kPoseChannels = kNumParts + kNumLandmarkSets;  // 15

struct RasterConfig {
  // Non-positive values select the defaults below.
  double sigma = 0.0;           // default 0.02 * max(H, W)
  double landmark_sigma = 0.0;  // default: same as sigma
  double width_ratio = 0.25;    // rectangle width / segment length
  double min_width = 3.0;       // pixels

  double resolved_sigma(int height, int width) const;
  double resolved_landmark_sigma(int height, int width) const;
};

/// 1D normalised Gaussian taps, radius ceil(4 sigma).
std::vector<double> gaussian_kernel(double sigma);

/// Binary solid shape for a part: a circle at the segment midpoint with
/// radius half its length for the head, else a rotated rectangle spanning the
/// segment. Pixel centres sit at integer coordinates.
Image part_shape_mask(const PartSegment& segment, int height, int width, double rect_width);

/// Separable Gaussian blur with zero padding outside the frame.
Image gaussian_blur(const Image& channel, double sigma);

struct RasterChannel {
  Image grid;            // H x W x 1
  bool clipped = false;  // shape extended past the frame
};

/// Solid shape blurred by a normalised Gaussian and rescaled to peak 1.
RasterChannel rasterize_part_channel(const PartSegment& segment, int height, int width,
                                     double rect_width, double sigma);

/// Per-pixel max of unit-peak Gaussians around each point, rescaled to peak 1.
/// An empty list yields a zero channel.
Image rasterize_landmark_channel(std::span<const Point2> points, int height, int width,
                                 double sigma);

struct PoseVolume {
  Image grid;  // H x W x 15: ten parts then face, lhand, rhand, lfoot, rfoot
  std::vector<Part> clipped_parts;
};

PoseVolume build_pose_volume(const Pose2D& pose, int height, int width,
                             const RasterConfig& cfg = {});

struct StackedPoseVolume {
  Image grid;  // H x W x (15 * K), oldest slice first
  int history = 0;
};

/// Stacks the history oldest to newest, padding the front with the oldest
/// volume when fewer than `k` are available.
StackedPoseVolume stack_temporal(std::span<const PoseVolume> history, int k);

/// Debug dump: one 8-bit grayscale file per channel, `<frame>_<channel>.png`.
void dump_pose_channels(const std::filesystem::path& dir, int frame, const Image& volume);

}  // namespace mxf
