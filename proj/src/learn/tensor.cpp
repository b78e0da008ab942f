#include "motionxfer/tensor.hpp"

#include <cstring>

namespace mxf {

torch::Tensor to_tensor(const Image& image) {
  auto hwc = torch::from_blob(const_cast<float*>(image.data().data()),
                              {image.height(), image.width(), image.channels()}, torch::kFloat32);
  return hwc.permute({2, 0, 1}).contiguous();
}

torch::Tensor to_tensor(const Mask& mask) {
  auto hw = torch::from_blob(const_cast<std::uint8_t*>(mask.data().data()), {mask.height(), mask.width()},
                             torch::kUInt8);
  return hw.to(torch::kFloat32).unsqueeze(0);
}

Image to_image(const torch::Tensor& t) {
  auto chw = t.dim() == 4 ? t.squeeze(0) : t;
  if (chw.dim() != 3) throw Error("to_image: expected a [C, H, W] tensor");
  auto hwc = chw.detach().to(torch::kFloat32).permute({1, 2, 0}).contiguous();
  Image out(static_cast<int>(hwc.size(0)), static_cast<int>(hwc.size(1)), static_cast<int>(hwc.size(2)));
  std::memcpy(out.data().data(), hwc.data_ptr<float>(), out.size() * sizeof(float));
  return out;
}

Mask to_mask(const torch::Tensor& t) {
  auto hw = t.dim() == 3 ? t.squeeze(0) : t;
  if (hw.dim() != 2) throw Error("to_mask: expected a [H, W] tensor");
  auto b = (hw.detach() > 0.5).to(torch::kUInt8).contiguous();
  Mask out(static_cast<int>(b.size(0)), static_cast<int>(b.size(1)));
  std::memcpy(out.data().data(), b.data_ptr<std::uint8_t>(), out.data().size());
  return out;
}

torch::Tensor stack_images(std::span<const Image> images) {
  std::vector<torch::Tensor> ts;
  ts.reserve(images.size());
  for (const auto& im : images) ts.push_back(to_tensor(im));
  return torch::stack(ts);
}

}  // namespace mxf
