#include "motionxfer/pipeline.hpp"

#include <vector>

#include "motionxfer/error.hpp"
#include "motionxfer/tensor.hpp"

namespace mxf {
namespace {

void check_channels(Generator& g, int64_t got, const char* what) {
  if (got != g->spec().in_channels) {
    throw Error(std::string(what) + ": input has " + std::to_string(got) + " channels, generator expects " +
                std::to_string(g->spec().in_channels));
  }
}

template <typename F>
auto stage(const char* name, F&& f) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

}  // namespace

torch::Tensor synthesize_foreground(Generator& g, const torch::Tensor& parts, const torch::Tensor& pose) {
  if (parts.size(1) != kPartsChannels) throw Error("synthesize_foreground: parts volume must have 30 channels");
  if (pose.size(1) % kPoseChannels != 0) throw Error("synthesize_foreground: pose channels not a multiple of 15");
  check_channels(g, parts.size(1) + pose.size(1), "synthesize_foreground");
  return g->forward(torch::cat({parts, pose}, 1));
}

Image synthesize_foreground(Generator& g, const PartsVolume& parts, const StackedPoseVolume& pose) {
  if (!parts.grid.same_extent(pose.grid.height(), pose.grid.width())) {
    throw Error("synthesize_foreground: parts and pose maps are not aligned");
  }
  torch::NoGradGuard guard;
  return to_image(synthesize_foreground(g, to_tensor(parts.grid).unsqueeze(0), to_tensor(pose.grid).unsqueeze(0)));
}

torch::Tensor fuse(Generator& g, const torch::Tensor& combined, const torch::Tensor& pose) {
  if (combined.size(1) != 3) throw Error("fuse: combined frame must have 3 channels");
  if (pose.size(1) % kPoseChannels != 0) throw Error("fuse: pose channels not a multiple of 15");
  check_channels(g, combined.size(1) + pose.size(1), "fuse");
  return g->forward(torch::cat({combined, pose}, 1));
}

Image fuse(Generator& g, const Image& combined, const StackedPoseVolume& pose) {
  if (!combined.same_extent(pose.grid.height(), pose.grid.width())) {
    throw Error("fuse: combined frame and pose maps are not aligned");
  }
  torch::NoGradGuard guard;
  return to_image(fuse(g, to_tensor(combined).unsqueeze(0), to_tensor(pose.grid).unsqueeze(0)));
}

torch::Tensor chroma_mask_batch(const torch::Tensor& fg, const ChromaKeyConfig& ck) {
  torch::NoGradGuard guard;
  ck.validate();
  auto key = torch::tensor({ck.key[0], ck.key[1], ck.key[2]}, fg.options()).view({1, 3, 1, 1});
  auto dist2 = (fg.detach() - key).pow(2).sum(1, true);
  auto m = (dist2 > ck.threshold * ck.threshold).to(fg.dtype());
  if (ck.cleanup_radius > 0) {
    const int64_t k = 2 * ck.cleanup_radius + 1;
    // Opening: erode (min-pool, off-frame = background) then dilate (max-pool).
    namespace F = torch::nn::functional;
    auto padded = F::pad(m, F::PadFuncOptions({ck.cleanup_radius, ck.cleanup_radius, ck.cleanup_radius,
                                               ck.cleanup_radius}).value(0.0));
    auto eroded = -torch::max_pool2d(-padded, {k, k}, {1, 1});
    m = torch::max_pool2d(eroded, {k, k}, {1, 1}, {ck.cleanup_radius, ck.cleanup_radius});
  }
  return m;
}

torch::Tensor composite_tensor(const torch::Tensor& fg, const torch::Tensor& mask, const torch::Tensor& background) {
  return mask * fg + (1 - mask) * background;
}

TransferResult transfer(Generator& synthesis, Generator& fusion, const Image& input,
                        std::span<const Mask> part_masks, const Pose2D& input_pose,
                        std::span<const Pose2D> ref_history, const Image& background,
                        const TransferSettings& settings) {
  if (ref_history.empty()) throw StageError("pose_volume", "empty reference history");
  const int H = input.height(), W = input.width();
  TransferResult r;
  r.transforms = stage("part_transform", [&] {
    return estimate_part_transforms(input_pose, ref_history.back());
  });
  r.parts = stage("assemble_parts", [&] { return assemble_parts(input, part_masks, r.transforms); });
  r.pose = stage("pose_volume", [&] {
    std::vector<PoseVolume> vols;
    const std::size_t first = ref_history.size() > static_cast<std::size_t>(settings.history)
                                  ? ref_history.size() - settings.history
                                  : 0;
    for (std::size_t i = first; i < ref_history.size(); ++i) {
      vols.push_back(build_pose_volume(ref_history[i], H, W, settings.raster));
    }
    return stack_temporal(vols, settings.history);
  });
  r.foreground = stage("synthesize_foreground", [&] { return synthesize_foreground(synthesis, r.parts, r.pose); });
  r.fg_mask = stage("extract_foreground_mask", [&] { return foreground_mask_for_composite(r.foreground, settings.chroma); });
  r.combined = stage("composite", [&] { return composite(r.foreground, r.fg_mask, background); });
  r.output = stage("fuse", [&] { return fuse(fusion, r.combined, r.pose); });
  return r;
}

}  // namespace mxf
