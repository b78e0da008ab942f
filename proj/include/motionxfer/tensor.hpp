#pragma once

#include <span>

#include <torch/torch.h>

#include "motionxfer/image.hpp"

namespace mxf {

/// HWC image -> [C, H, W] float tensor.
torch::Tensor to_tensor(const Image& image);
/// Binary mask -> [1, H, W] float tensor.
torch::Tensor to_tensor(const Mask& mask);
/// [C, H, W] (or [1, C, H, W]) tensor -> HWC image.
Image to_image(const torch::Tensor& chw);
/// [1, H, W] or [H, W] tensor thresholded at 0.5.
Mask to_mask(const torch::Tensor& t);

torch::Tensor stack_images(std::span<const Image> images);

}  // namespace mxf
