#include "motionxfer/nets.hpp"

#include "motionxfer/error.hpp"

namespace nn = torch::nn;

namespace mxf {

void GeneratorSpec::validate() const {
  if (in_channels < 1 || base_channels < 1 || n_down < 0 || n_residual < 0 || n_fine_residual < 0) {
    throw Error("GeneratorSpec: invalid sizes");
  }
}

void DiscriminatorSpec::validate() const {
  if (in_channels < 1 || base_channels < 1 || n_layers < 1 || n_scales < 1) {
    throw Error("DiscriminatorSpec: invalid sizes");
  }
}

nlohmann::json to_json(const GeneratorSpec& s) {
  return {{"in_channels", s.in_channels}, {"base_channels", s.base_channels}, {"n_down", s.n_down},
          {"n_residual", s.n_residual},   {"n_fine_residual", s.n_fine_residual}, {"fine", s.fine}};
}

nlohmann::json to_json(const DiscriminatorSpec& s) {
  return {{"in_channels", s.in_channels}, {"base_channels", s.base_channels},
          {"n_layers", s.n_layers},       {"n_scales", s.n_scales}};
}

GeneratorSpec generator_spec_from_json(const nlohmann::json& j) {
  GeneratorSpec s;
  s.in_channels = j.at("in_channels");
  s.base_channels = j.at("base_channels");
  s.n_down = j.at("n_down");
  s.n_residual = j.at("n_residual");
  s.n_fine_residual = j.at("n_fine_residual");
  s.fine = j.at("fine");
  return s;
}

DiscriminatorSpec discriminator_spec_from_json(const nlohmann::json& j) {
  DiscriminatorSpec s;
  s.in_channels = j.at("in_channels");
  s.base_channels = j.at("base_channels");
  s.n_layers = j.at("n_layers");
  s.n_scales = j.at("n_scales");
  return s;
}

namespace {

nn::Conv2d conv(int in, int out, int k, int stride = 1, int pad = 0) {
  return nn::Conv2d(nn::Conv2dOptions(in, out, k).stride(stride).padding(pad));
}

nn::InstanceNorm2d inorm(int c) { return nn::InstanceNorm2d(nn::InstanceNorm2dOptions(c).affine(true)); }

void append_up(nn::Sequential& seq, int in, int out) {
  seq->push_back(nn::ConvTranspose2d(
      nn::ConvTranspose2dOptions(in, out, 3).stride(2).padding(1).output_padding(1)));
  seq->push_back(inorm(out));
  seq->push_back(nn::ReLU());
}

nn::Sequential output_head(int in) {
  nn::Sequential h;
  h->push_back(nn::ReflectionPad2d(3));
  h->push_back(conv(in, 3, 7));
  return h;
}

}  // namespace

ResidualBlockImpl::ResidualBlockImpl(int c) {
  body = register_module("body", nn::Sequential(nn::ReflectionPad2d(1), conv(c, c, 3), inorm(c), nn::ReLU(),
                                                nn::ReflectionPad2d(1), conv(c, c, 3), inorm(c)));
}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x) { return x + body->forward(x); }

CoarseGeneratorImpl::CoarseGeneratorImpl(const GeneratorSpec& spec) {
  spec.validate();
  nn::Sequential seq;
  seq->push_back(nn::ReflectionPad2d(3));
  seq->push_back(conv(spec.in_channels, spec.base_channels, 7));
  seq->push_back(inorm(spec.base_channels));
  seq->push_back(nn::ReLU());
  int ch = spec.base_channels;
  for (int i = 0; i < spec.n_down; ++i) {
    seq->push_back(conv(ch, ch * 2, 3, 2, 1));
    seq->push_back(inorm(ch * 2));
    seq->push_back(nn::ReLU());
    ch *= 2;
  }
  for (int i = 0; i < spec.n_residual; ++i) seq->push_back(ResidualBlock(ch));
  for (int i = 0; i < spec.n_down; ++i) {
    append_up(seq, ch, ch / 2);
    ch /= 2;
  }
  body = register_module("body", seq);
  head = register_module("head", output_head(ch));
}

torch::Tensor CoarseGeneratorImpl::features(const torch::Tensor& x) { return body->forward(x); }
torch::Tensor CoarseGeneratorImpl::logits(const torch::Tensor& x) { return head->forward(features(x)); }

FineEnhancerImpl::FineEnhancerImpl(const GeneratorSpec& spec) {
  const int c = spec.base_channels;
  // Full-resolution front: fewer channels, one stride-2 step down to g's grid.
  const int cf = std::max(1, c / 2);
  front = register_module(
      "front", nn::Sequential(nn::ReflectionPad2d(3), conv(spec.in_channels, cf, 7), inorm(cf), nn::ReLU(),
                              conv(cf, c, 3, 2, 1), inorm(c), nn::ReLU()));
  nn::Sequential b;
  for (int i = 0; i < spec.n_fine_residual; ++i) b->push_back(ResidualBlock(c));
  append_up(b, c, cf);
  auto last = conv(cf, 3, 7);
  torch::NoGradGuard guard;
  last->weight.zero_();
  last->bias.zero_();
  b->push_back(nn::ReflectionPad2d(3));
  b->push_back(last);
  back = register_module("back", b);
}

torch::Tensor FineEnhancerImpl::residual(const torch::Tensor& x_full, const torch::Tensor& coarse_features) {
  return back->forward(front->forward(x_full) + coarse_features);
}

GeneratorImpl::GeneratorImpl(const GeneratorSpec& spec) : spec_(spec) {
  spec_.validate();
  GeneratorSpec coarse_spec = spec_;
  coarse_spec.fine = false;
  coarse = register_module("coarse", CoarseGenerator(coarse_spec));
  if (spec_.fine) fine = register_module("fine", FineEnhancer(spec_));
}

void GeneratorImpl::enable_fine(int n_fine_residual) {
  if (fine) return;
  spec_.fine = true;
  spec_.n_fine_residual = n_fine_residual;
  fine = register_module("fine", FineEnhancer(spec_));
}

torch::Tensor GeneratorImpl::forward(const torch::Tensor& x) {
  if (x.dim() != 4 || x.size(1) != spec_.in_channels) {
    throw Error("Generator: expected [B, " + std::to_string(spec_.in_channels) + ", H, W] input");
  }
  if (!fine) return coarse->forward(x);
  const auto half = torch::avg_pool2d(x, 2);
  const auto feats = coarse->features(half);
  const auto z = coarse->head->forward(feats);
  const auto up = torch::nn::functional::interpolate(
      z, torch::nn::functional::InterpolateFuncOptions()
             .size(std::vector<int64_t>{x.size(2), x.size(3)})
             .mode(torch::kBilinear)
             .align_corners(false));
  return torch::tanh(up + fine->residual(x, feats));
}

PatchDiscriminatorImpl::PatchDiscriminatorImpl(int in, int base, int n_layers) {
  auto lrelu = [] { return nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)); };
  layers.push_back(nn::Sequential(conv(in, base, 4, 2, 2), lrelu()));
  int ch = base;
  for (int i = 1; i < n_layers; ++i) {
    const int next = std::min(ch * 2, base * 8);
    layers.push_back(nn::Sequential(conv(ch, next, 4, 2, 2), lrelu()));
    ch = next;
  }
  const int next = std::min(ch * 2, base * 8);
  layers.push_back(nn::Sequential(conv(ch, next, 4, 1, 2), lrelu()));
  layers.push_back(nn::Sequential(conv(next, 1, 4, 1, 2)));
  for (std::size_t i = 0; i < layers.size(); ++i) register_module("layer" + std::to_string(i), layers[i]);
}

std::vector<torch::Tensor> PatchDiscriminatorImpl::forward(const torch::Tensor& x) {
  std::vector<torch::Tensor> out;
  out.reserve(layers.size());
  torch::Tensor h = x;
  for (auto& l : layers) {
    h = l->forward(h);
    out.push_back(h);
  }
  return out;
}

MultiScaleDiscriminatorImpl::MultiScaleDiscriminatorImpl(const DiscriminatorSpec& spec) : spec_(spec) {
  spec_.validate();
  for (int s = 0; s < spec_.n_scales; ++s) {
    scales.push_back(register_module("scale" + std::to_string(s),
                                     PatchDiscriminator(spec_.in_channels, spec_.base_channels, spec_.n_layers)));
  }
}

DiscOutput MultiScaleDiscriminatorImpl::forward(const torch::Tensor& image, const torch::Tensor& condition) {
  auto x = torch::cat({image, condition}, 1);
  if (x.size(1) != spec_.in_channels) throw Error("Discriminator: channel mismatch");
  DiscOutput out;
  for (std::size_t s = 0; s < scales.size(); ++s) {
    if (s > 0) {
      x = torch::nn::functional::avg_pool2d(
          x, torch::nn::functional::AvgPool2dFuncOptions(3).stride(2).padding(1).count_include_pad(false));
    }
    out.push_back(scales[s]->forward(x));
  }
  return out;
}

std::vector<torch::Tensor> scores(const DiscOutput& out) {
  std::vector<torch::Tensor> s;
  s.reserve(out.size());
  for (const auto& scale : out) s.push_back(scale.back());
  return s;
}

std::vector<std::vector<torch::Tensor>> intermediate_features(const DiscOutput& out) {
  std::vector<std::vector<torch::Tensor>> f;
  f.reserve(out.size());
  for (const auto& scale : out) f.emplace_back(scale.begin(), scale.end() - 1);
  return f;
}

}  // namespace mxf
