#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "motionxfer/error.hpp"

namespace mxf {

/// Dense H x W x C float grid, interleaved (HWC). Colour frames live in
/// [-1, 1]; heat maps in [0, 1].
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels, float fill = 0.0f);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  float& at(int y, int x, int c = 0) { return data_[index(y, x, c)]; }
  float at(int y, int x, int c = 0) const { return data_[index(y, x, c)]; }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }

  bool same_shape(const Image& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_ &&
           channels_ == other.channels_;
  }
  bool same_extent(int height, int width) const noexcept {
    return height_ == height && width_ == width;
  }

  /// Copies channels [first, first + count) into a new image.
  Image channel_slice(int first, int count) const;
  /// Writes `src` into channels starting at `first`.
  void set_channels(int first, const Image& src);

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int y, int x, int c) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

/// Binary H x W mask, values 0 or 1.
class Mask {
 public:
  Mask() = default;
  Mask(int height, int width, std::uint8_t fill = 0);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::uint8_t& at(int y, int x) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  std::uint8_t at(int y, int x) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  std::span<std::uint8_t> data() noexcept { return data_; }
  std::span<const std::uint8_t> data() const noexcept { return data_; }
  std::size_t count() const noexcept;
  bool same_extent(int height, int width) const noexcept {
    return height_ == height && width_ == width;
  }

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> data_;
};

Mask mask_union(std::span<const Mask> masks);
double mask_iou(const Mask& a, const Mask& b);

// Square structuring element of the given radius (radius 1 is 3x3).
Mask erode(const Mask& m, int radius);
Mask dilate(const Mask& m, int radius);
Mask open(const Mask& m, int radius);

/// [-1, 1] <-> 8-bit. Quantisation rounds to nearest and clamps.
std::uint8_t to_byte(float v) noexcept;
float from_byte(std::uint8_t b) noexcept;

/// Maps a [-1, 1] image onto the 0..255 scale without quantising.
Image to_byte_scale(const Image& image);
/// Rounds every value through the 8-bit on-disk representation.
Image quantize(const Image& image);

/// Average-pools by an integer factor.
Image downsample(const Image& image, int factor);
/// Bilinear resize (pixel-centre aligned).
Image resize_bilinear(const Image& image, int height, int width);
/// Nearest-neighbour resize for masks.
Mask resize_nearest(const Mask& mask, int height, int width);

}  // namespace mxf
