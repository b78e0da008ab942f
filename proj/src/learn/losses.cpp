#include "motionxfer/losses.hpp"

#include "motionxfer/error.hpp"

namespace mxf {

void LossWeights::validate() const {
  for (double v : {rela, fm, vgg, sp, gp, s})
    if (!(v >= 0.0)) throw Error("LossWeights: weights must be non-negative");
}

nlohmann::json to_json(const LossWeights& w) {
  return {{"w_rela", w.rela}, {"w_fm", w.fm}, {"w_vgg", w.vgg},
          {"w_sp", w.sp},     {"w_gp", w.gp}, {"w_s", w.s}};
}

LossWeights loss_weights_from_json(const nlohmann::json& j) {
  LossWeights w;
  for (const auto& [key, _] : j.items()) {
    if (key != "w_rela" && key != "w_fm" && key != "w_vgg" && key != "w_sp" && key != "w_gp" && key != "w_s") {
      throw Error("loss weights: unknown field '" + key + "'");
    }
  }
  w.rela = j.value("w_rela", w.rela);
  w.fm = j.value("w_fm", w.fm);
  w.vgg = j.value("w_vgg", w.vgg);
  w.sp = j.value("w_sp", w.sp);
  w.gp = j.value("w_gp", w.gp);
  w.s = j.value("w_s", w.s);
  w.validate();
  return w;
}

namespace {

void check_pair(const std::vector<torch::Tensor>& real, const std::vector<torch::Tensor>& fake,
                const char* what) {
  if (real.empty() || real.size() != fake.size()) throw Error(std::string(what) + ": scale count mismatch");
  for (std::size_t s = 0; s < real.size(); ++s) {
    if (real[s].numel() == 0 || fake[s].numel() == 0) throw Error(std::string(what) + ": empty batch");
    if (real[s].size(0) != fake[s].size(0)) throw Error(std::string(what) + ": batch size mismatch");
  }
}

torch::Tensor scale_mean(std::vector<torch::Tensor> per_scale) {
  return torch::stack(per_scale).mean();
}

}  // namespace

torch::Tensor lsgan_d_loss(const std::vector<torch::Tensor>& real, const std::vector<torch::Tensor>& fake) {
  check_pair(real, fake, "lsgan_d_loss");
  std::vector<torch::Tensor> v;
  for (std::size_t s = 0; s < real.size(); ++s) {
    v.push_back(0.5 * (real[s] - 1).pow(2).mean() + 0.5 * fake[s].pow(2).mean());
  }
  return scale_mean(std::move(v));
}

torch::Tensor lsgan_g_loss(const std::vector<torch::Tensor>& fake) {
  if (fake.empty()) throw Error("lsgan_g_loss: no scales");
  std::vector<torch::Tensor> v;
  for (const auto& f : fake) {
    if (f.numel() == 0) throw Error("lsgan_g_loss: empty batch");
    v.push_back(0.5 * (f - 1).pow(2).mean());
  }
  return scale_mean(std::move(v));
}

torch::Tensor rela_d_loss(const std::vector<torch::Tensor>& real, const std::vector<torch::Tensor>& fake) {
  check_pair(real, fake, "rela_d_loss");
  std::vector<torch::Tensor> v;
  for (std::size_t s = 0; s < real.size(); ++s) {
    v.push_back(0.5 * (real[s] - fake[s].mean() - 1).pow(2).mean() + 0.5 * (fake[s] - real[s].mean()).pow(2).mean());
  }
  return scale_mean(std::move(v));
}

torch::Tensor rela_g_loss(const std::vector<torch::Tensor>& real, const std::vector<torch::Tensor>& fake) {
  check_pair(real, fake, "rela_g_loss");
  std::vector<torch::Tensor> v;
  for (std::size_t s = 0; s < real.size(); ++s) {
    v.push_back(0.5 * (fake[s] - real[s].mean() - 1).pow(2).mean() + 0.5 * (real[s] - fake[s].mean()).pow(2).mean());
  }
  return scale_mean(std::move(v));
}

torch::Tensor gradient_penalty(const Critic& critic, const torch::Tensor& real, const torch::Tensor& fake,
                               const torch::Tensor& cond, std::optional<torch::Tensor> eps, bool create_graph) {
  if (!real.sizes().equals(fake.sizes())) throw Error("gradient_penalty: real/fake shape mismatch");
  const auto b = real.size(0);
  torch::Tensor e = eps ? *eps : torch::rand({b}, real.options());
  if (e.numel() != b) throw Error("gradient_penalty: eps must have one entry per sample");
  std::vector<int64_t> shape(static_cast<std::size_t>(real.dim()), 1);
  shape[0] = b;
  e = e.reshape(shape);
  auto xhat = (e * real.detach() + (1 - e) * fake.detach()).requires_grad_(true);
  const auto per_scale = critic(xhat, cond);
  if (per_scale.empty()) throw Error("gradient_penalty: critic returned no scales");
  std::vector<torch::Tensor> penalties;
  for (std::size_t s = 0; s < per_scale.size(); ++s) {
    auto grads = torch::autograd::grad({per_scale[s].sum()}, {xhat}, {}, true, create_graph, true)[0];
    if (!grads.defined()) grads = torch::zeros_like(xhat);
    penalties.push_back((grads.reshape({b, -1}).norm(2, 1) - 1).pow(2).mean());
  }
  return scale_mean(std::move(penalties));
}

torch::Tensor feature_matching_loss(const std::vector<std::vector<torch::Tensor>>& real,
                                    const std::vector<std::vector<torch::Tensor>>& fake) {
  if (real.empty() || real.size() != fake.size()) throw Error("feature_matching_loss: scale count mismatch");
  std::vector<torch::Tensor> v;
  for (std::size_t s = 0; s < real.size(); ++s) {
    if (real[s].size() != fake[s].size()) throw Error("feature_matching_loss: layer count mismatch");
    torch::Tensor acc = torch::zeros({}, fake[s].empty() ? torch::TensorOptions() : fake[s][0].options());
    for (std::size_t i = 0; i < real[s].size(); ++i) {
      acc = acc + (real[s][i].detach() - fake[s][i]).abs().mean();
    }
    v.push_back(acc);
  }
  return scale_mean(std::move(v));
}

RandomPyramidExtractor::RandomPyramidExtractor(std::uint64_t seed, std::vector<int> channels) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  int in = 3;
  for (int c : channels) {
    const double std = std::sqrt(2.0 / (in * 9));
    weights_.push_back(torch::randn({c, in, 3, 3}, gen, torch::kFloat32) * std);
    biases_.push_back(torch::zeros({c}));
    in = c;
  }
}

std::vector<torch::Tensor> RandomPyramidExtractor::features(const torch::Tensor& image) {
  std::vector<torch::Tensor> out;
  torch::Tensor h = image;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    const auto opts = h.options();
    h = torch::leaky_relu(torch::conv2d(h, weights_[i].to(opts), biases_[i].to(opts), 2, 1), 0.2);
    out.push_back(h);
  }
  return out;
}

ScriptedExtractor::ScriptedExtractor(const std::string& path) {
  try {
    module_ = torch::jit::load(path);
  } catch (const c10::Error& e) {
    throw Error("cannot load feature extractor '" + path + "': " + e.what_without_backtrace());
  }
  module_.eval();
  for (auto p : module_.parameters()) p.set_requires_grad(false);
}

std::vector<torch::Tensor> ScriptedExtractor::features(const torch::Tensor& image) {
  auto result = module_.forward({image});
  std::vector<torch::Tensor> out;
  if (result.isTensor()) {
    out.push_back(result.toTensor());
  } else if (result.isTuple()) {
    for (const auto& e : result.toTuple()->elements()) out.push_back(e.toTensor());
  } else if (result.isList()) {
    for (const auto& e : result.toList()) out.push_back(e.get().toTensor());
  } else {
    throw Error("feature extractor must return a tensor, tuple or list");
  }
  return out;
}

torch::Tensor perceptual_loss(FeatureExtractor& phi, const torch::Tensor& real, const torch::Tensor& fake) {
  std::vector<torch::Tensor> fr;
  {
    torch::NoGradGuard guard;
    fr = phi.features(real);
  }
  const auto ff = phi.features(fake);
  if (fr.size() != ff.size() || ff.empty()) throw Error("perceptual_loss: extractor layer mismatch");
  torch::Tensor acc = torch::zeros({}, fake.options());
  for (std::size_t i = 0; i < ff.size(); ++i) acc = acc + (fr[i] - ff[i]).abs().mean();
  return acc;
}

torch::Tensor semantic_pose_loss(FeatureExtractor& phi_pose, FeatureExtractor& phi_parse,
                                 const torch::Tensor& real, const torch::Tensor& fake, double w_s) {
  auto term = [&](FeatureExtractor& phi) {
    std::vector<torch::Tensor> fr;
    {
      torch::NoGradGuard guard;
      fr = phi.features(real);
    }
    const auto ff = phi.features(fake);
    torch::Tensor acc = torch::zeros({}, fake.options());
    for (std::size_t i = 0; i < ff.size(); ++i) acc = acc + (fr[i] - ff[i]).abs().mean();
    return acc;
  };
  auto loss = term(phi_pose);
  if (w_s != 0.0) loss = loss + w_s * term(phi_parse);
  return loss;
}

torch::Tensor total_generator_loss(const LossWeights& w, const GeneratorLossTerms& t) {
  torch::Tensor total;
  auto add = [&](double weight, const std::optional<torch::Tensor>& term, const char* name) {
    if (!term) {
      if (weight != 0.0) throw Error(std::string("total_generator_loss: missing component ") + name);
      return;
    }
    auto v = weight * *term;
    total = total.defined() ? total + v : v;
  };
  add(w.rela, t.rela, "rela");
  add(w.fm, t.fm, "fm");
  add(w.vgg, t.vgg, "vgg");
  add(w.sp, t.sp, "sp");
  return total.defined() ? total : torch::zeros({});
}

AuxEncoderImpl::AuxEncoderImpl(int channels, int out_channels) {
  namespace nn = torch::nn;
  trunk = register_module(
      "trunk", nn::Sequential(nn::Conv2d(nn::Conv2dOptions(3, channels, 3).padding(1)), nn::ReLU(),
                              nn::Conv2d(nn::Conv2dOptions(channels, channels, 3).padding(1)), nn::ReLU()));
  head = register_module("head", nn::Conv2d(nn::Conv2dOptions(channels, out_channels, 1)));
}

torch::Tensor AuxEncoderImpl::encode(const torch::Tensor& image) { return trunk->forward(image); }

EncoderExtractor::EncoderExtractor(AuxEncoder encoder) : encoder_(std::move(encoder)) {
  encoder_->eval();
  for (auto& p : encoder_->parameters()) p.set_requires_grad(false);
}

std::vector<torch::Tensor> EncoderExtractor::features(const torch::Tensor& image) {
  return {encoder_->encode(image)};
}

}  // namespace mxf
