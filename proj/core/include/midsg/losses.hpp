#pragma once

// Training objectives as differentiable functions from model outputs to
// scalar tensors, plus the weighted aggregation used by the trainer.

#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "midsg/autograd.hpp"
#include "midsg/networks.hpp"

namespace midsg {

struct LossWeights {
  double adv = 1.0;
  double domain = 1.0;
  double recon = 10.0;
  double lpips = 1.0;
  double inr = 5.0;
  double mix = 1.0;
  double path = 2.0;

  void validate() const;
};

// Discriminator side: -[mean log D(y,t) + mean log(1 - D(y_g,t))].
ag::Tensor adv_loss_d(const DiscriminatorOutput& real, const DiscriminatorOutput& fake);

// Generator side. Non-saturating -mean log D(y_g,t) by default; the
// saturating form returns mean log(1 - D(y_g,t)).
ag::Tensor adv_loss_g(const DiscriminatorOutput& fake, bool saturating = false);

// Mean negative log-likelihood of `labels` under softmax(domain_logits).
ag::Tensor domain_loss_real(const ag::Tensor& domain_logits, std::span<const int> source);
ag::Tensor domain_loss_synth(const ag::Tensor& domain_logits, std::span<const int> target);
// L_domain = L_real + L_synthetic.
double domain_loss_total(double real_term, double synth_term);

// Mean squared pixel error between an image batch and its reconstruction.
ag::Tensor recon_loss(const ag::Tensor& x, const ag::Tensor& x_rec);
// Same kernel, applied to translations into each image's own domain.
ag::Tensor identity_loss(const ag::Tensor& x, const ag::Tensor& x_same);
// Sum over phi layers of the per-layer mean squared feature distance.
ag::Tensor lpips_loss(const ag::Tensor& x, const ag::Tensor& x_rec, const FeatureExtractor& phi);
// num_layers * mean squared distance between two translations.
ag::Tensor style_mix_loss(const ag::Tensor& out_1, const ag::Tensor& out_2, int num_layers);

struct PathLength {
  ag::Tensor penalty;       // mean_b (|J_b v_b| - running_mean)^2
  double mean_length = 0.0;
};

// Jacobian-vector products of the synthesis network along unit directions
// in w space, by central differences with step `h`. Lengths are RMS over
// output pixels.
PathLength path_length_penalty(const Generator& generator, const ag::Tensor& w,
                               std::span<const double> directions, double running_mean,
                               double h = 1e-3);

struct LossReport {
  std::vector<std::pair<std::string, double>> terms;  // unweighted values
  double total = 0.0;                                 // sum_i weight_i * term_i

  double term(const std::string& name) const;
  nlohmann::json to_json() const;
};

// Any term may be left undefined (disabled); it then contributes 0.
struct LossTerms {
  ag::Tensor adv_d, domain_real;
  ag::Tensor adv_g, domain_synth, recon, lpips, identity, mix, path;
};

struct TotalLosses {
  ag::Tensor d_total, g_total;
  LossReport d_report, g_report;
};

// D total = adv*adv_d + domain*domain_real
// G total = adv*adv_g + domain*domain_synth + recon*recon + lpips*lpips
//         + inr*identity + mix*mix + path*path
// Throws TrainingAborted naming the first non-finite term.
TotalLosses total_losses(const LossTerms& terms, const LossWeights& weights, long step = -1);

}  // namespace midsg
