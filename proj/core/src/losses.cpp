#include "midsg/losses.hpp"

#include <cmath>

#include "midsg/errors.hpp"
#include "midsg/ops.hpp"

namespace midsg {

using ag::Tensor;

void LossWeights::validate() const {
  for (double w : {adv, domain, recon, lpips, inr, mix, path})
    if (!std::isfinite(w) || w < 0.0)
      throw ValidationError("loss weights must be finite and nonnegative");
}

Tensor adv_loss_d(const DiscriminatorOutput& real, const DiscriminatorOutput& fake) {
  // -log sigmoid(l) = softplus(-l); -log(1 - sigmoid(l)) = softplus(l)
  return ag::add(ag::mean(ag::softplus(ag::scale(real.realness_logit, -1.0))),
                 ag::mean(ag::softplus(fake.realness_logit)));
}

Tensor adv_loss_g(const DiscriminatorOutput& fake, bool saturating) {
  if (saturating) return ag::scale(ag::mean(ag::softplus(fake.realness_logit)), -1.0);
  return ag::mean(ag::softplus(ag::scale(fake.realness_logit, -1.0)));
}

Tensor domain_loss_real(const Tensor& domain_logits, std::span<const int> source) {
  return ag::softmax_nll(domain_logits, source);
}

Tensor domain_loss_synth(const Tensor& domain_logits, std::span<const int> target) {
  return ag::softmax_nll(domain_logits, target);
}

double domain_loss_total(double real_term, double synth_term) { return real_term + synth_term; }

Tensor recon_loss(const Tensor& x, const Tensor& x_rec) { return ag::mse(x_rec, x); }

Tensor identity_loss(const Tensor& x, const Tensor& x_same) { return recon_loss(x, x_same); }

Tensor lpips_loss(const Tensor& x, const Tensor& x_rec, const FeatureExtractor& phi) {
  if (x.shape() != x_rec.shape())
    throw ValidationError("lpips_loss: shape mismatch " + ag::to_string(x.shape()) + " vs " +
                          ag::to_string(x_rec.shape()));
  const auto fx = phi.features(x);
  const auto fr = phi.features(x_rec);
  Tensor total = ag::mse(fr[0], fx[0]);
  for (std::size_t l = 1; l < fx.size(); ++l) total = ag::add(total, ag::mse(fr[l], fx[l]));
  return total;
}

Tensor style_mix_loss(const Tensor& out_1, const Tensor& out_2, int num_layers) {
  if (num_layers < 1) throw ValidationError("style_mix_loss: num_layers must be positive");
  return ag::scale(ag::mse(out_1, out_2), static_cast<double>(num_layers));
}

PathLength path_length_penalty(const Generator& generator, const Tensor& w,
                               std::span<const double> directions, double running_mean,
                               double h) {
  if (w.rank() != 2 || directions.size() != w.numel())
    throw ValidationError("path_length_penalty: one direction per w row required");
  std::vector<double> step(directions.begin(), directions.end());
  for (double& v : step) v *= h;
  const Tensor delta = Tensor::from(w.shape(), std::move(step));
  const int layers = generator.num_layers();
  std::vector<Tensor> plus(static_cast<std::size_t>(layers), ag::add(w, delta));
  std::vector<Tensor> minus(static_cast<std::size_t>(layers), ag::sub(w, delta));
  Tensor jvp = ag::scale(ag::sub(generator.synthesize(plus), generator.synthesize(minus)),
                         0.5 / h);
  Tensor lengths = ag::sqrt(ag::mean_per_sample(ag::square(jvp)));
  double mean_length = 0.0;
  for (double v : lengths.values()) mean_length += v;
  mean_length /= static_cast<double>(lengths.numel());
  Tensor penalty = ag::mean(ag::square(ag::add_scalar(lengths, -running_mean)));
  return {penalty, mean_length};
}

double LossReport::term(const std::string& name) const {
  for (const auto& [n, v] : terms)
    if (n == name) return v;
  throw ValidationError("no loss term named '" + name + "'");
}

nlohmann::json LossReport::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [n, v] : terms) j[n] = v;
  j["total"] = total;
  return j;
}

namespace {

struct Accumulator {
  Tensor total;
  LossReport report;
  long step;

  void add(const char* name, const Tensor& term, double weight) {
    const double value = term.defined() ? term.item() : 0.0;
    if (!std::isfinite(value)) throw TrainingAborted(name, step);
    report.terms.emplace_back(name, value);
    if (!term.defined()) return;
    Tensor weighted = ag::scale(term, weight);
    total = total.defined() ? ag::add(total, weighted) : weighted;
  }

  void finish() {
    if (!total.defined()) total = Tensor::scalar(0.0);
    report.total = total.item();
  }
};

}  // namespace

TotalLosses total_losses(const LossTerms& t, const LossWeights& w, long step) {
  w.validate();
  Accumulator d{Tensor(), {}, step};
  d.add("adv_d", t.adv_d, w.adv);
  d.add("domain_real", t.domain_real, w.domain);
  d.finish();

  Accumulator g{Tensor(), {}, step};
  g.add("adv_g", t.adv_g, w.adv);
  g.add("domain_synth", t.domain_synth, w.domain);
  g.add("recon", t.recon, w.recon);
  g.add("lpips", t.lpips, w.lpips);
  g.add("identity", t.identity, w.inr);
  g.add("mix", t.mix, w.mix);
  g.add("path", t.path, w.path);
  g.finish();
  return {d.total, g.total, d.report, g.report};
}

}  // namespace midsg
