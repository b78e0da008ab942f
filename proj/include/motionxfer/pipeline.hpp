#pragma once

#include <span>

#include <torch/torch.h>

#include "motionxfer/compositing.hpp"
#include "motionxfer/heatmap.hpp"
#include "motionxfer/image.hpp"
#include "motionxfer/nets.hpp"
#include "motionxfer/pose.hpp"
#include "motionxfer/warp.hpp"

namespace mxf {

/// Synthesis net input: 30 part channels then 15 K pose channels.
torch::Tensor synthesize_foreground(Generator& g, const torch::Tensor& parts, const torch::Tensor& pose);
Image synthesize_foreground(Generator& g, const PartsVolume& parts, const StackedPoseVolume& pose);

/// Fusion net input: 3 composite channels then 15 K pose channels.
torch::Tensor fuse(Generator& g, const torch::Tensor& combined, const torch::Tensor& pose);
Image fuse(Generator& g, const Image& combined, const StackedPoseVolume& pose);

/// Chroma mask (with cleanup) for a batch [B, 3, H, W] -> [B, 1, H, W] in {0, 1}.
torch::Tensor chroma_mask_batch(const torch::Tensor& fg, const ChromaKeyConfig& ck);

/// mask * fg + (1 - mask) * background on tensors; differentiable in fg.
torch::Tensor composite_tensor(const torch::Tensor& fg, const torch::Tensor& mask, const torch::Tensor& background);

struct TransferSettings {
  int history = 3;
  RasterConfig raster;
  ChromaKeyConfig chroma;
};

struct TransferResult {
  PartTransformSet transforms;
  PartsVolume parts;
  StackedPoseVolume pose;
  Image foreground;  // synthesis output on green
  Mask fg_mask;
  Image combined;
  Image output;
};

/// I_out = F(I_in, P_in, P_ref): segments, part transforms, warped parts,
/// foreground synthesis, chroma mask, composite, fusion. `ref_history` holds
/// up to K reference poses, oldest first, ending at the current one. Errors
/// are rethrown as StageError naming the failing stage.
TransferResult transfer(Generator& synthesis, Generator& fusion, const Image& input,
                        std::span<const Mask> part_masks, const Pose2D& input_pose,
                        std::span<const Pose2D> ref_history, const Image& background,
                        const TransferSettings& settings);

}  // namespace mxf
