#pragma once

#include <array>

#include "motionxfer/image.hpp"

namespace mxf {

struct ChromaKeyConfig {
  std::array<float, 3> key{-1.0f, 1.0f, -1.0f};  // pure green in [-1, 1]
  float threshold = 0.5f;                         // tau
  int cleanup_radius = 1;                         // opening before compositing; 0 disables

  void validate() const;
};

/// 1 where the colour distance to the key exceeds the threshold.
Mask extract_foreground_mask(const Image& img, const ChromaKeyConfig& ck = {});

/// Chroma mask followed by the configured morphological opening.
Mask foreground_mask_for_composite(const Image& img, const ChromaKeyConfig& ck = {});

/// mask * fg + (1 - mask) * bg, per pixel.
Image composite(const Image& fg, const Mask& mask, const Image& bg);

/// fg where the mask is set, key colour elsewhere.
Image over_green(const Image& fg, const Mask& mask, const ChromaKeyConfig& ck = {});

/// Pixels within `radius` of a mask/background transition.
Mask boundary_band(const Mask& mask, int radius);

struct BlendConfig {
  bool blur = true;
  double sigma = 1.0;
  int band = 2;
};

/// Composite onto a new background (resized to match) with the mask softened
/// by a Gaussian inside the boundary band; hard selection elsewhere.
Image recomposite(const Image& fg, const Mask& mask, const Image& background,
                  const BlendConfig& cfg = {});

}  // namespace mxf
