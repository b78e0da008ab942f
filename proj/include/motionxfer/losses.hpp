#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/script.h>
#include <torch/torch.h>

namespace mxf {

struct LossWeights {
  double rela = 1.0;
  double fm = 10.0;
  double vgg = 10.0;
  double sp = 10.0;
  double gp = 10.0;
  double s = 0.01;  // parsing term inside the semantic/pose loss

  void validate() const;
};

nlohmann::json to_json(const LossWeights& w);
LossWeights loss_weights_from_json(const nlohmann::json& j);

// Adversarial terms take the per-scale score maps of a multi-scale critic and
// average the per-scale values.

/// 1/2 E[(D(y) - 1)^2] + 1/2 E[D(x)^2]
torch::Tensor lsgan_d_loss(const std::vector<torch::Tensor>& real, const std::vector<torch::Tensor>& fake);
/// 1/2 E[(D(x) - 1)^2]
torch::Tensor lsgan_g_loss(const std::vector<torch::Tensor>& fake);

/// 1/2 E[(D(y) - mu(D(x)) - 1)^2] + 1/2 E[(D(x) - mu(D(y)))^2]; the gradient
/// penalty is added by the caller.
torch::Tensor rela_d_loss(const std::vector<torch::Tensor>& real, const std::vector<torch::Tensor>& fake);
/// 1/2 E[(D(x) - mu(D(y)) - 1)^2] + 1/2 E[(D(y) - mu(D(x)))^2]
torch::Tensor rela_g_loss(const std::vector<torch::Tensor>& real, const std::vector<torch::Tensor>& fake);

/// Critic returning per-scale score maps; a sample's critic value is the sum
/// of its scores at that scale.
using Critic = std::function<std::vector<torch::Tensor>(const torch::Tensor& image, const torch::Tensor& cond)>;

/// E[(||grad_xhat D(xhat, p)||_2 - 1)^2] at xhat = eps y + (1 - eps) x with
/// eps ~ U(0, 1) per sample (or `eps` when given, shape [B]). Unweighted.
/// `create_graph` keeps the result differentiable w.r.t. critic parameters.
torch::Tensor gradient_penalty(const Critic& critic, const torch::Tensor& real, const torch::Tensor& fake,
                               const torch::Tensor& cond, std::optional<torch::Tensor> eps = std::nullopt,
                               bool create_graph = true);

/// sum_i (1/N_i) ||D_i(y) - D_i(x)||_1 per scale, averaged over scales and
/// the batch. Real features are detached.
torch::Tensor feature_matching_loss(const std::vector<std::vector<torch::Tensor>>& real,
                                    const std::vector<std::vector<torch::Tensor>>& fake);

/// Frozen multi-layer feature function.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual std::vector<torch::Tensor> features(const torch::Tensor& image) = 0;
};

/// Five stride-2 conv stages with weights drawn from a private seeded
/// generator; never trained.
class RandomPyramidExtractor : public FeatureExtractor {
 public:
  explicit RandomPyramidExtractor(std::uint64_t seed = 7, std::vector<int> channels = {8, 16, 32, 32, 32});
  std::vector<torch::Tensor> features(const torch::Tensor& image) override;

 private:
  std::vector<torch::Tensor> weights_;
  std::vector<torch::Tensor> biases_;
};

/// TorchScript module whose forward returns a tuple or list of feature maps.
class ScriptedExtractor : public FeatureExtractor {
 public:
  explicit ScriptedExtractor(const std::string& path);
  std::vector<torch::Tensor> features(const torch::Tensor& image) override;

 private:
  torch::jit::script::Module module_;
};

/// Identity single-layer extractor.
class PassThroughExtractor : public FeatureExtractor {
 public:
  std::vector<torch::Tensor> features(const torch::Tensor& image) override { return {image}; }
};

/// sum_i (1/N_i) ||phi_i(y) - phi_i(x)||_1, target features detached.
torch::Tensor perceptual_loss(FeatureExtractor& phi, const torch::Tensor& real, const torch::Tensor& fake);

/// ||phi_p(y) - phi_p(x)||_1 + w_s ||phi_s(y) - phi_s(x)||_1, each normalised
/// per element like the feature-matching term.
torch::Tensor semantic_pose_loss(FeatureExtractor& phi_pose, FeatureExtractor& phi_parse,
                                 const torch::Tensor& real, const torch::Tensor& fake, double w_s);

struct GeneratorLossTerms {
  std::optional<torch::Tensor> rela;
  std::optional<torch::Tensor> fm;
  std::optional<torch::Tensor> vgg;
  std::optional<torch::Tensor> sp;
};

/// w_rela L_rela + w_FM L_FM + w_VGG L_VGG + w_SP L_SP. A term may be absent
/// only when its weight is zero.
torch::Tensor total_generator_loss(const LossWeights& w, const GeneratorLossTerms& terms);

/// Small conv encoder trained once to predict pose heat maps or part labels,
/// then frozen and used as a feature extractor.
struct AuxEncoderImpl : torch::nn::Module {
  AuxEncoderImpl(int channels, int out_channels);
  torch::Tensor encode(const torch::Tensor& image);
  torch::Tensor forward(const torch::Tensor& image) { return head->forward(encode(image)); }

  torch::nn::Sequential trunk{nullptr};
  torch::nn::Conv2d head{nullptr};
};
TORCH_MODULE(AuxEncoder);

class EncoderExtractor : public FeatureExtractor {
 public:
  explicit EncoderExtractor(AuxEncoder encoder);
  std::vector<torch::Tensor> features(const torch::Tensor& image) override;
  AuxEncoder& encoder() { return encoder_; }

 private:
  AuxEncoder encoder_;
};

}  // namespace mxf
