#include "midsg/diffusion.hpp"

#include <algorithm>
#include <cmath>

#include "midsg/errors.hpp"
#include "midsg/ops.hpp"

namespace midsg {

namespace {
int sign(double v) { return (v > 0.0) - (v < 0.0); }
}  // namespace

NoiseSchedule build_schedule(int t_max, double beta_min, double beta_max, double sigma) {
  if (t_max < 1) throw ValidationError("t_max must be at least 1");
  if (!(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0))
    throw ValidationError("betas must satisfy 0 < beta_min <= beta_max < 1");
  if (!(sigma > 0.0)) throw ValidationError("sigma must be positive");
  NoiseSchedule s;
  s.t_max = t_max;
  s.sigma = sigma;
  s.retention.resize(static_cast<std::size_t>(t_max) + 1);
  s.retention[0] = 1.0;
  for (int k = 1; k <= t_max; ++k) {
    const double frac = t_max == 1 ? 0.0 : static_cast<double>(k - 1) / (t_max - 1);
    const double beta = beta_min + (beta_max - beta_min) * frac;
    s.retention[k] = s.retention[k - 1] * (1.0 - beta);
  }
  return s;
}

std::string to_string(TimestepKind kind) {
  return kind == TimestepKind::uniform ? "uniform" : "priority";
}

TimestepKind parse_timestep_kind(const std::string& name) {
  if (name == "uniform") return TimestepKind::uniform;
  if (name == "priority") return TimestepKind::priority;
  throw ValidationError("unknown timestep distribution '" + name + "'");
}

TimestepDistribution TimestepDistribution::make(TimestepKind kind, int t_current) {
  if (t_current < 1) throw ValidationError("timestep support must be at least 1");
  TimestepDistribution d;
  d.kind = kind;
  d.weights.resize(static_cast<std::size_t>(t_current));
  double total = 0.0;
  for (int t = 1; t <= t_current; ++t) {
    d.weights[t - 1] = kind == TimestepKind::uniform ? 1.0 : static_cast<double>(t);
    total += d.weights[t - 1];
  }
  for (double& w : d.weights) w /= total;
  return d;
}

std::vector<int> sample_timesteps(const TimestepDistribution& dist, int count, Rng& rng) {
  if (dist.weights.empty()) throw ValidationError("empty timestep distribution");
  std::vector<int> out(static_cast<std::size_t>(std::max(count, 0)));
  const int n = dist.support();
  if (dist.kind == TimestepKind::uniform) {
    for (int& t : out) t = uniform_int(rng, 1, n);
    return out;
  }
  std::vector<double> cdf(dist.weights.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < cdf.size(); ++i) cdf[i] = (acc += dist.weights[i]);
  for (int& t : out) {
    const double u = uniform01(rng) * acc;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    t = std::min(static_cast<int>(it - cdf.begin()), n - 1) + 1;
  }
  return out;
}

ag::Tensor diffuse(const ag::Tensor& x, std::span<const int> t, const NoiseSchedule& schedule,
                   Rng& rng) {
  if (x.rank() < 1 || t.size() != static_cast<std::size_t>(x.dim(0)))
    throw ValidationError("diffuse: one timestep per sample required");
  std::vector<double> keep(t.size());
  std::vector<double> noise_scale(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < 0 || t[i] > schedule.t_max)
      throw ValidationError("diffuse: timestep " + std::to_string(t[i]) + " outside [0, " +
                            std::to_string(schedule.t_max) + "]");
    const double abar = schedule.alpha_bar(t[i]);
    keep[i] = std::sqrt(abar);
    noise_scale[i] = std::sqrt(1.0 - abar) * schedule.sigma;
  }
  const std::size_t per = x.numel() / t.size();
  std::vector<double> noise(x.numel());
  fill_normal(rng, noise);
  for (std::size_t i = 0; i < t.size(); ++i)
    for (std::size_t k = 0; k < per; ++k) noise[i * per + k] *= noise_scale[i];
  return ag::add(ag::scale_samples(x, keep), ag::Tensor::from(x.shape(), std::move(noise)));
}

double overfit_metric(std::span<const double> realness_on_real) {
  if (realness_on_real.empty()) throw ValidationError("overfit_metric: no outputs");
  double s = 0.0;
  for (double d : realness_on_real) s += sign(d - 0.5);
  return s / static_cast<double>(realness_on_real.size());
}

void AdaptiveDiffusionState::validate() const {
  if (t_min < 1 || t_min > t_max) throw ValidationError("require 1 <= t_min <= t_max");
  if (t_current < t_min || t_current > t_max)
    throw ValidationError("t_current outside [t_min, t_max]");
  if (c_step < 1) throw ValidationError("c_step must be at least 1");
  if (update_interval < 1) throw ValidationError("update_interval must be at least 1");
}

nlohmann::json AdaptiveDiffusionState::to_json() const {
  return {{"t_current", t_current}, {"t_min", t_min},       {"t_max", t_max},
          {"d_target", d_target},   {"c_step", c_step},     {"update_interval", update_interval},
          {"r_d_last", r_d_last},   {"pi_kind", to_string(pi_kind)}};
}

AdaptiveDiffusionState AdaptiveDiffusionState::from_json(const nlohmann::json& j) {
  AdaptiveDiffusionState s;
  s.t_current = j.at("t_current").get<int>();
  s.t_min = j.at("t_min").get<int>();
  s.t_max = j.at("t_max").get<int>();
  s.d_target = j.at("d_target").get<double>();
  s.c_step = j.at("c_step").get<int>();
  s.update_interval = j.at("update_interval").get<int>();
  s.r_d_last = j.at("r_d_last").get<double>();
  s.pi_kind = parse_timestep_kind(j.at("pi_kind").get<std::string>());
  s.validate();
  return s;
}

void update_diffusion_length(AdaptiveDiffusionState& state, double r_d) {
  state.t_current =
      std::clamp(state.t_current + sign(r_d - state.d_target) * state.c_step, state.t_min, state.t_max);
  state.r_d_last = r_d;
}

}  // namespace midsg
