#include <gtest/gtest.h>

#include <cmath>

#include "motionxfer/error.hpp"
#include "motionxfer/losses.hpp"

using namespace mxf;

namespace {

using Scores = std::vector<torch::Tensor>;

Scores rand_scores(int scales, int b, int s, torch::Dtype dt = torch::kFloat32) {
  Scores v;
  for (int i = 0; i < scales; ++i) v.push_back(torch::randn({b, 1, s + i, s + i}, torch::TensorOptions().dtype(dt)));
  return v;
}

// Central differences of a scalar function of one tensor, compared to autograd.
void check_fd(const std::function<torch::Tensor(const torch::Tensor&)>& f, torch::Tensor x) {
  x = x.clone().set_requires_grad(true);
  const auto g = torch::autograd::grad({f(x)}, {x})[0];
  const double h = 1e-6;
  auto flat = x.detach().clone().reshape({-1});
  for (int64_t i = 0; i < flat.numel(); ++i) {
    auto p = flat.clone(), m = flat.clone();
    p[i] += h;
    m[i] -= h;
    const double fd = (f(p.reshape(x.sizes())).item<double>() - f(m.reshape(x.sizes())).item<double>()) / (2 * h);
    const double an = g.reshape({-1})[i].item<double>();
    ASSERT_LE(std::abs(fd - an), 1e-3 * std::max(1.0, std::abs(fd))) << i << ": " << an << " vs " << fd;
  }
}

}  // namespace

TEST(Adversarial, ConstantCriticGivesHalf) {
  for (float c : {-2.0f, 0.0f, 0.7f}) {
    const Scores real{torch::full({3, 1, 4, 4}, c), torch::full({3, 1, 2, 2}, c)};
    const Scores fake{torch::full({3, 1, 4, 4}, c), torch::full({3, 1, 2, 2}, c)};
    EXPECT_NEAR(rela_d_loss(real, fake).item<double>(), 0.5, 1e-7);
    EXPECT_NEAR(rela_g_loss(real, fake).item<double>(), 0.5, 1e-7);
  }
}

TEST(Adversarial, RelativisticOracleAndSymmetry) {
  torch::manual_seed(0);
  const auto real = rand_scores(2, 4, 5, torch::kFloat64), fake = rand_scores(2, 4, 5, torch::kFloat64);
  double acc = 0;
  for (int s = 0; s < 2; ++s) {
    const double mr = real[s].mean().item<double>(), mf = fake[s].mean().item<double>();
    double a = 0, b = 0;
    auto r = real[s].reshape({-1}), f = fake[s].reshape({-1});
    for (int64_t i = 0; i < r.numel(); ++i) {
      a += std::pow(r[i].item<double>() - mf - 1, 2);
      b += std::pow(f[i].item<double>() - mr, 2);
    }
    acc += 0.5 * a / r.numel() + 0.5 * b / f.numel();
  }
  EXPECT_NEAR(rela_d_loss(real, fake).item<double>(), acc / 2, 1e-10);
  EXPECT_NEAR(rela_g_loss(real, fake).item<double>(), rela_d_loss(fake, real).item<double>(), 1e-12);
  EXPECT_THROW(rela_d_loss(real, Scores{fake[0]}), Error);
}

TEST(Adversarial, GradientsMatchFiniteDifferences) {
  torch::manual_seed(1);
  const auto real = rand_scores(1, 2, 3, torch::kFloat64);
  check_fd([&](const torch::Tensor& f) { return rela_d_loss(real, Scores{f}); }, rand_scores(1, 2, 3, torch::kFloat64)[0]);
  check_fd([&](const torch::Tensor& f) { return rela_g_loss(real, Scores{f}); }, rand_scores(1, 2, 3, torch::kFloat64)[0]);
  check_fd([&](const torch::Tensor& f) { return lsgan_g_loss(Scores{f}); }, rand_scores(1, 2, 3, torch::kFloat64)[0]);
}

TEST(GradientPenalty, LinearSumCriticClosedForm) {
  const int b = 3, c = 3, h = 8, w = 8;
  // Score = sum of image entries, so the gradient is all ones.
  Critic lin = [](const torch::Tensor& x, const torch::Tensor&) {
    return Scores{x.sum({1, 2, 3}).reshape({-1, 1, 1, 1})};
  };
  const auto real = torch::randn({b, c, h, w}), fake = torch::randn({b, c, h, w});
  const auto gp = gradient_penalty(lin, real, fake, torch::zeros({b, 1, h, w}));
  EXPECT_NEAR(gp.item<double>(), std::pow(std::sqrt(double(c * h * w)) - 1, 2), 1e-3);
  // A critic with unit-norm gradient per sample has zero penalty.
  Critic unit = [&](const torch::Tensor& x, const torch::Tensor&) {
    return Scores{(x.sum({1, 2, 3}) / std::sqrt(double(c * h * w))).reshape({-1, 1, 1, 1})};
  };
  EXPECT_NEAR(gradient_penalty(unit, real, fake, torch::zeros({b, 1, h, w})).item<double>(), 0.0, 1e-8);
  EXPECT_THROW(gradient_penalty(lin, real, fake, torch::zeros({b, 1, h, w}), torch::rand({b + 1})), Error);
}

TEST(GradientPenalty, QuadraticCriticUsesInterpolation) {
  const int b = 2;
  Critic quad = [](const torch::Tensor& x, const torch::Tensor&) {
    return Scores{x.pow(2).sum({1, 2, 3}).reshape({-1, 1, 1, 1})};
  };
  const auto real = torch::randn({b, 1, 4, 4}, torch::kFloat64), fake = torch::randn({b, 1, 4, 4}, torch::kFloat64);
  const auto eps = torch::tensor({0.25, 0.8}, torch::kFloat64);
  const auto xhat = eps.reshape({b, 1, 1, 1}) * real + (1 - eps.reshape({b, 1, 1, 1})) * fake;
  const auto expect = ((2 * xhat).reshape({b, -1}).norm(2, 1) - 1).pow(2).mean();
  EXPECT_NEAR(gradient_penalty(quad, real, fake, torch::zeros({b, 1, 4, 4}), eps).item<double>(),
              expect.item<double>(), 1e-10);
}

TEST(FeatureLosses, VanishAtEqualityAndMatchOracle) {
  torch::manual_seed(2);
  std::vector<std::vector<torch::Tensor>> a{{torch::randn({2, 4, 5, 5}), torch::randn({2, 8, 3, 3})},
                                            {torch::randn({2, 4, 3, 3})}};
  EXPECT_EQ(feature_matching_loss(a, a).item<double>(), 0.0);
  auto b = a;
  for (auto& s : b)
    for (auto& t : s) t = t + 0.5;
  EXPECT_NEAR(feature_matching_loss(a, b).item<double>(), (0.5 + 0.5 + 0.5) / 2, 1e-6);

  RandomPyramidExtractor phi(7, {4, 4, 4, 4, 4});
  const auto y = torch::rand({1, 3, 32, 32}) * 2 - 1;
  EXPECT_EQ(perceptual_loss(phi, y, y).item<double>(), 0.0);
  EXPECT_GT(perceptual_loss(phi, y, -y).item<double>(), 0.0);
  RandomPyramidExtractor phi2(7, {4, 4, 4, 4, 4});
  EXPECT_EQ(perceptual_loss(phi, y, -y).item<double>(), perceptual_loss(phi2, y, -y).item<double>());
  EXPECT_EQ(phi.features(y).size(), 5u);

  PassThroughExtractor id;
  EXPECT_NEAR(perceptual_loss(id, y, y + 0.25).item<double>(), 0.25, 1e-6);
  EXPECT_NEAR(semantic_pose_loss(id, id, y, y + 0.25, 0.5).item<double>(), 0.25 * 1.5, 1e-6);
  EXPECT_EQ(semantic_pose_loss(id, id, y, y, 0.01).item<double>(), 0.0);
}

TEST(FeatureLosses, GradientsMatchFiniteDifferences) {
  torch::manual_seed(3);
  PassThroughExtractor id;
  const auto y = torch::randn({1, 3, 8, 8}, torch::kFloat64);
  const auto x0 = y + 0.3 * torch::randn({1, 3, 8, 8}, torch::kFloat64);
  check_fd([&](const torch::Tensor& x) { return perceptual_loss(id, y, x); }, x0);
  const std::vector<std::vector<torch::Tensor>> real{{y}};
  check_fd([&](const torch::Tensor& x) { return feature_matching_loss(real, {{x}}); }, x0);
}

TEST(TotalLoss, WeightedSumAndMissingTerms) {
  LossWeights w;
  GeneratorLossTerms t;
  t.rela = torch::tensor(1.0);
  t.fm = torch::tensor(2.0);
  t.vgg = torch::tensor(3.0);
  t.sp = torch::tensor(4.0);
  EXPECT_NEAR(total_generator_loss(w, t).item<double>(), 1 + 10 * (2 + 3 + 4), 1e-6);
  GeneratorLossTerms partial;
  partial.rela = torch::tensor(1.0);
  EXPECT_THROW(total_generator_loss(w, partial), Error);
  LossWeights only_rela = w;
  only_rela.fm = only_rela.vgg = only_rela.sp = 0;
  EXPECT_NEAR(total_generator_loss(only_rela, partial).item<double>(), 1.0, 1e-9);
  EXPECT_EQ(total_generator_loss(LossWeights{0, 0, 0, 0, 10, 0.01}, GeneratorLossTerms{}).item<double>(), 0.0);
}

TEST(LossWeightsJson, RoundTripAndRejection) {
  LossWeights w;
  w.fm = 3;
  const auto back = loss_weights_from_json(to_json(w));
  EXPECT_EQ(back.fm, 3);
  EXPECT_THROW(loss_weights_from_json({{"w_style", 1.0}}), Error);
  EXPECT_THROW(loss_weights_from_json({{"w_fm", -1.0}}), Error);
}

TEST(EncoderExtractor, FreezesParameters) {
  torch::manual_seed(4);
  EncoderExtractor e(AuxEncoder(8, 15));
  for (const auto& p : e.encoder()->parameters()) EXPECT_FALSE(p.requires_grad());
  const auto f = e.features(torch::randn({1, 3, 16, 16}));
  ASSERT_EQ(f.size(), 1u);
  EXPECT_EQ(f[0].size(1), 8);
}
