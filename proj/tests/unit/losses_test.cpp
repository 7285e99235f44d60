#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "midsg/errors.hpp"
#include "midsg/losses.hpp"
#include "midsg/ops.hpp"

using namespace midsg;

namespace {

// realness logit for probability p
double logit(double p) { return std::log(p / (1.0 - p)); }

DiscriminatorOutput constant_output(int batch, double p, int domains = 3) {
  return {ag::Tensor::full({batch}, logit(p)), ag::Tensor::zeros({batch, domains})};
}

}  // namespace

TEST(AdvLoss, DiscriminatorCalibration) {
  EXPECT_NEAR(adv_loss_d(constant_output(4, 0.5), constant_output(4, 0.5)).item(), 2 * std::numbers::ln2, 1e-12);
  EXPECT_NEAR(adv_loss_d(constant_output(4, 0.9), constant_output(4, 0.1)).item(), -2 * std::log(0.9), 1e-12);
}

TEST(AdvLoss, DiscriminatorMinimizedAtPerfectSeparation) {
  double prev = 1e9;
  for (double p : {0.6, 0.8, 0.95, 0.999}) {
    const double v = adv_loss_d(constant_output(2, p), constant_output(2, 1 - p)).item();
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(AdvLoss, GeneratorValues) {
  EXPECT_NEAR(adv_loss_g(constant_output(3, 0.5)).item(), std::numbers::ln2, 1e-12);
  EXPECT_LT(adv_loss_g(constant_output(3, 1 - 1e-9)).item(), 1e-8);
}

TEST(AdvLoss, GeneratorGradientMagnitudes) {
  // d/dp(-ln p) = -1/p; chain through p = sigmoid(l): dl = -(1-p).
  for (double p : {0.1, 0.99}) {
    ag::Tensor l = ag::Tensor::parameter({1}, {logit(p)});
    ag::backward(adv_loss_g({l, ag::Tensor::zeros({1, 3})}));
    const double dloss_dp = l.grad()[0] / (p * (1 - p));
    EXPECT_NEAR(dloss_dp, -1.0 / p, 1e-9);
  }
}

TEST(AdvLoss, SaturatingVariantAgreesAtHalf) {
  const double ns = adv_loss_g(constant_output(2, 0.5), false).item();
  const double sat = adv_loss_g(constant_output(2, 0.5), true).item();
  EXPECT_NEAR(ns, std::numbers::ln2, 1e-12);
  EXPECT_NEAR(sat, -std::numbers::ln2, 1e-12);  // log(1 - D)
}

TEST(DomainLoss, Values) {
  std::vector<int> labels{0, 2};
  ag::Tensor confident = ag::Tensor::from({2, 3}, {800, 0, 0, 0, 0, 800});
  EXPECT_NEAR(domain_loss_real(confident, labels).item(), 0.0, 1e-12);
  EXPECT_NEAR(domain_loss_synth(confident, labels).item(), 0.0, 1e-12);
  ag::Tensor uniform = ag::Tensor::zeros({2, 3});
  EXPECT_NEAR(domain_loss_real(uniform, labels).item(), std::log(3.0), 1e-12);
  EXPECT_NEAR(domain_loss_synth(uniform, labels).item(), std::log(3.0), 1e-12);
  // probability 0.5 on the true label out of two domains
  EXPECT_NEAR(domain_loss_real(ag::Tensor::zeros({1, 2}), std::vector<int>{1}).item(), std::numbers::ln2, 1e-12);
  EXPECT_DOUBLE_EQ(domain_loss_total(0.2, 0.3), 0.5);
}

TEST(DomainLoss, LabelOutOfRange) {
  EXPECT_THROW(domain_loss_real(ag::Tensor::zeros({1, 3}), std::vector<int>{3}), ValidationError);
}

TEST(PixelLosses, Values) {
  ag::Tensor a = ag::Tensor::full({1, 1, 32, 32}, -1.0), b = ag::Tensor::full({1, 1, 32, 32}, 1.0);
  EXPECT_DOUBLE_EQ(recon_loss(a, a).item(), 0.0);
  EXPECT_DOUBLE_EQ(recon_loss(a, b).item(), 4.0);
  ag::Tensor c = ag::Tensor::zeros({1, 1, 32, 32}), d = ag::Tensor::zeros({1, 1, 32, 32});
  d.mutable_values()[17] = 0.5;
  EXPECT_NEAR(recon_loss(c, d).item(), 0.25 / 1024, 1e-15);
  EXPECT_EQ(identity_loss(c, d).item(), recon_loss(c, d).item());
  EXPECT_THROW(recon_loss(c, ag::Tensor::zeros({1, 1, 16, 16})), ValidationError);
}

TEST(PerceptualLoss, ZeroOnlyAtFixedPoint) {
  NetworkConfig nc;
  FeatureExtractor phi(nc);
  Rng rng(1);
  std::vector<double> v(2 * 32 * 32);
  for (double& x : v) x = std::tanh(standard_normal(rng));
  ag::Tensor x = ag::Tensor::from({2, 1, 32, 32}, v);
  EXPECT_EQ(lpips_loss(x, x, phi).item(), 0.0);
  for (double& e : v) e = -e;
  ag::Tensor y = ag::Tensor::from({2, 1, 32, 32}, v);
  EXPECT_GT(lpips_loss(x, y, phi).item(), 0.0);
}

TEST(StyleMixLoss, ScaledByLayers) {
  ag::Tensor a = ag::Tensor::zeros({2, 1, 4, 4});
  ag::Tensor b = ag::Tensor::full({2, 1, 4, 4}, std::sqrt(0.5));
  EXPECT_EQ(style_mix_loss(a, a, 4).item(), 0.0);
  EXPECT_NEAR(style_mix_loss(a, b, 4).item(), 2.0, 1e-12);
  EXPECT_THROW(style_mix_loss(a, b, 0), ValidationError);
}

TEST(PathLength, CenteringReducesPenalty) {
  NetworkConfig nc;
  nc.image_size = 8;
  nc.w_dim = 8;
  nc.latent_dim = 8;
  Rng rng(2);
  Generator g(nc, rng);
  ag::Tensor w = ag::Tensor::zeros({2, 8});
  std::vector<double> dirs(16, 0.0);
  dirs[0] = dirs[9] = 1.0;
  PathLength p = path_length_penalty(g, w, dirs, 0.0);
  EXPECT_GT(p.mean_length, 0.0);
  EXPECT_GE(p.penalty.item(), p.mean_length * p.mean_length - 1e-12);
  PathLength centered = path_length_penalty(g, w, dirs, p.mean_length);
  EXPECT_LE(centered.penalty.item(), p.penalty.item());
  EXPECT_THROW(path_length_penalty(g, w, std::vector<double>(3), 0.0), ValidationError);
}

TEST(TotalLosses, Weighting) {
  LossTerms t;
  for (ag::Tensor* x : {&t.adv_d, &t.domain_real, &t.adv_g, &t.domain_synth, &t.recon, &t.lpips, &t.identity,
                        &t.mix, &t.path})
    *x = ag::Tensor::scalar(0.0);
  t.recon = ag::Tensor::scalar(2.0);
  LossWeights w{0, 0, 3.0, 0, 0, 0, 0};
  TotalLosses r = total_losses(t, w);
  EXPECT_DOUBLE_EQ(r.g_total.item(), 6.0);
  EXPECT_DOUBLE_EQ(r.d_total.item(), 0.0);
  LossWeights zero{0, 0, 0, 0, 0, 0, 0};
  EXPECT_DOUBLE_EQ(total_losses(t, zero).g_total.item(), 0.0);
}

TEST(TotalLosses, ReportMatchesRecomputation) {
  LossTerms t;
  double v = 0.3;
  for (ag::Tensor* x : {&t.adv_d, &t.domain_real, &t.adv_g, &t.domain_synth, &t.recon, &t.lpips, &t.identity,
                        &t.mix, &t.path})
    *x = ag::Tensor::scalar(v += 0.17);
  LossWeights w;
  TotalLosses r = total_losses(t, w);
  const double d = w.adv * t.adv_d.item() + w.domain * t.domain_real.item();
  const double g = w.adv * t.adv_g.item() + w.domain * t.domain_synth.item() + w.recon * t.recon.item() +
                   w.lpips * t.lpips.item() + w.inr * t.identity.item() + w.mix * t.mix.item() +
                   w.path * t.path.item();
  EXPECT_NEAR(r.d_report.total, d, 1e-14);
  EXPECT_NEAR(r.g_report.total, g, 1e-14);
  EXPECT_NEAR(r.g_report.term("lpips"), t.lpips.item(), 0.0);
}

TEST(TotalLosses, NonFiniteAborts) {
  LossTerms t;
  for (ag::Tensor* x : {&t.adv_d, &t.domain_real, &t.adv_g, &t.domain_synth, &t.recon, &t.lpips, &t.identity,
                        &t.mix, &t.path})
    *x = ag::Tensor::scalar(0.1);
  t.lpips = ag::Tensor::scalar(std::nan(""));
  try {
    total_losses(t, LossWeights{}, 12);
    FAIL() << "expected TrainingAborted";
  } catch (const TrainingAborted& e) {
    EXPECT_EQ(e.term(), "lpips");
    EXPECT_EQ(e.step(), 12);
  }
}

TEST(LossWeights, NegativeRejected) {
  LossWeights w;
  w.mix = -1.0;
  EXPECT_THROW(w.validate(), ValidationError);
}
