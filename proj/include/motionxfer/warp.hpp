#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <vector>

#include "motionxfer/image.hpp"
#include "motionxfer/pose.hpp"

namespace mxf {

inline constexpr float kFillValue = -1.0f;
inline constexpr int kPartsChannels = 3 * kNumParts;  // 30

/// Source coordinates (x, y) in pixels for every output pixel.
struct SamplingGrid {
  int height = 0;
  int width = 0;
  std::vector<double> coords;  // interleaved x, y

  SamplingGrid() = default;
  SamplingGrid(int h, int w) : height(h), width(w), coords(static_cast<std::size_t>(h) * w * 2) {}
  double& x(int r, int c) { return coords[(static_cast<std::size_t>(r) * width + c) * 2]; }
  double& y(int r, int c) { return coords[(static_cast<std::size_t>(r) * width + c) * 2 + 1]; }
  double x(int r, int c) const { return coords[(static_cast<std::size_t>(r) * width + c) * 2]; }
  double y(int r, int c) const { return coords[(static_cast<std::size_t>(r) * width + c) * 2 + 1]; }
};

/// Inverse-warp grid: coords(p) = m^-1 [p, 1]. Throws if m is singular.
SamplingGrid affine_grid(const AffineMatrix& m, int height, int width);

/// Bilinear interpolation of the four neighbours; neighbours outside the
/// image contribute `fill`.
Image bilinear_sample(const Image& image, const SamplingGrid& grid, float fill = kFillValue);

struct SampleGradients {
  Image image;        // d loss / d image, same shape as the input image
  SamplingGrid grid;  // d loss / d coords
};

/// Vector-Jacobian product of bilinear_sample for an upstream gradient
/// shaped like its output.
SampleGradients bilinear_sample_backward(const Image& image, const SamplingGrid& grid,
                                         const Image& grad_output, float fill = kFillValue);

/// H x W x 30, three colour channels per part in canonical order.
struct PartsVolume {
  Image grid;
};

/// Masks each part out of `input` (off-mask pixels become `fill`) and warps it
/// with its own transform. Missing parts yield constant-fill slabs.
PartsVolume assemble_parts(const Image& input, std::span<const Mask> part_masks,
                           const PartTransformSet& transforms, float fill = kFillValue);

/// The warped 3-channel slab for a single part.
Image warp_part(const Image& input, const Mask& mask, const AffineMatrix& m, float fill = kFillValue);

/// Debug dump of the warped crops, `<frame>_part<NN>.png`.
void dump_part_crops(const std::filesystem::path& dir, int frame, const PartsVolume& parts);

}  // namespace mxf
