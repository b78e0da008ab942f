#pragma once

#include <filesystem>

#include "motionxfer/image.hpp"

namespace mxf {

// 8-bit PNG round trip. Colour frames map [-1, 1] <-> 0..255; masks are
// written as 0/255 grayscale and read back thresholded at 128.
void write_png(const std::filesystem::path& path, const Image& rgb);
Image read_png(const std::filesystem::path& path);

void write_mask_png(const std::filesystem::path& path, const Mask& mask);
Mask read_mask_png(const std::filesystem::path& path);

/// Writes a single channel in [0, 1] as 8-bit grayscale.
void write_gray_png(const std::filesystem::path& path, const Image& gray, int channel = 0);

}  // namespace mxf
