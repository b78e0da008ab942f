#pragma once

#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

namespace mxf {

struct GeneratorSpec {
  int in_channels = 75;
  int base_channels = 32;  // half of the usual pix2pixHD width
  int n_down = 3;
  int n_residual = 6;
  int n_fine_residual = 3;  // blocks in the fine-scale wrapper
  bool fine = false;        // wrap the coarse net with the fine-scale enhancer

  void validate() const;
  friend bool operator==(const GeneratorSpec&, const GeneratorSpec&) = default;
};

struct DiscriminatorSpec {
  int in_channels = 48;  // image + condition channels
  int base_channels = 32;
  int n_layers = 3;
  int n_scales = 2;

  void validate() const;
  friend bool operator==(const DiscriminatorSpec&, const DiscriminatorSpec&) = default;
};

nlohmann::json to_json(const GeneratorSpec& s);
nlohmann::json to_json(const DiscriminatorSpec& s);
GeneratorSpec generator_spec_from_json(const nlohmann::json& j);
DiscriminatorSpec discriminator_spec_from_json(const nlohmann::json& j);

struct ResidualBlockImpl : torch::nn::Module {
  explicit ResidualBlockImpl(int channels);
  torch::Tensor forward(const torch::Tensor& x);
  torch::nn::Sequential body{nullptr};
};
TORCH_MODULE(ResidualBlock);

/// Coarse generator g: conv front, strided downsampling, residual blocks,
/// symmetric transposed-conv upsampling, 7x7 output head.
struct CoarseGeneratorImpl : torch::nn::Module {
  explicit CoarseGeneratorImpl(const GeneratorSpec& spec);
  /// Last feature map before the output head ([B, base, H, W]).
  torch::Tensor features(const torch::Tensor& x);
  /// Pre-activation output ([B, 3, H, W]).
  torch::Tensor logits(const torch::Tensor& x);
  torch::Tensor forward(const torch::Tensor& x) { return torch::tanh(logits(x)); }

  torch::nn::Sequential body{nullptr};
  torch::nn::Sequential head{nullptr};
};
TORCH_MODULE(CoarseGenerator);

/// Fine-scale layers g~ stacked around g. The output is
/// tanh(upsample(g logits on the half-resolution input) + residual), and the
/// residual head starts at zero so a fresh g~ reproduces the coarse output.
struct FineEnhancerImpl : torch::nn::Module {
  explicit FineEnhancerImpl(const GeneratorSpec& spec);
  torch::Tensor residual(const torch::Tensor& x_full, const torch::Tensor& coarse_features);

  torch::nn::Sequential front{nullptr};
  torch::nn::Sequential back{nullptr};
};
TORCH_MODULE(FineEnhancer);

/// G = (g, g~). Without the fine wrapper this is just g.
struct GeneratorImpl : torch::nn::Module {
  explicit GeneratorImpl(const GeneratorSpec& spec);
  torch::Tensor forward(const torch::Tensor& x);
  /// Adds g~ in place (coarse weights are kept).
  void enable_fine(int n_fine_residual);
  const GeneratorSpec& spec() const { return spec_; }

  CoarseGenerator coarse{nullptr};
  FineEnhancer fine{nullptr};

 private:
  GeneratorSpec spec_;
};
TORCH_MODULE(Generator);

/// Per-scale list of layer activations; the last entry of each scale is the
/// patch-wise score map.
using DiscOutput = std::vector<std::vector<torch::Tensor>>;

struct PatchDiscriminatorImpl : torch::nn::Module {
  PatchDiscriminatorImpl(int in_channels, int base_channels, int n_layers);
  std::vector<torch::Tensor> forward(const torch::Tensor& x);
  std::vector<torch::nn::Sequential> layers;
};
TORCH_MODULE(PatchDiscriminator);

struct MultiScaleDiscriminatorImpl : torch::nn::Module {
  explicit MultiScaleDiscriminatorImpl(const DiscriminatorSpec& spec);
  /// `image` and `condition` are concatenated along channels.
  DiscOutput forward(const torch::Tensor& image, const torch::Tensor& condition);
  const DiscriminatorSpec& spec() const { return spec_; }

  std::vector<PatchDiscriminator> scales;

 private:
  DiscriminatorSpec spec_;
};
TORCH_MODULE(MultiScaleDiscriminator);

/// Final score map of every scale.
std::vector<torch::Tensor> scores(const DiscOutput& out);
/// Every activation except the final score, per scale.
std::vector<std::vector<torch::Tensor>> intermediate_features(const DiscOutput& out);

}  // namespace mxf
