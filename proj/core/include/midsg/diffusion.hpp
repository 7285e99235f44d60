#pragma once

// Forward diffusion used as adaptive instance noise for the discriminator,
// and the self-paced controller of the maximum diffusion timestep.

#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "midsg/autograd.hpp"
#include "midsg/rng.hpp"

namespace midsg {

// Retention coefficients alpha_bar_t for t = 0..t_max; alpha_bar_0 == 1.
struct NoiseSchedule {
  int t_max = 0;
  std::vector<double> retention;
  double sigma = 1.0;

  double alpha_bar(int t) const { return retention.at(static_cast<std::size_t>(t)); }
};

// alpha_bar_t = prod_{k<=t} (1 - beta_k), beta linearly spaced over
// [beta_min, beta_max] across k = 1..t_max.
NoiseSchedule build_schedule(int t_max, double beta_min, double beta_max, double sigma);

enum class TimestepKind { uniform, priority };

std::string to_string(TimestepKind kind);
TimestepKind parse_timestep_kind(const std::string& name);

// Weights pi_t over t = 1..support(); weights[i] belongs to t = i + 1.
struct TimestepDistribution {
  TimestepKind kind = TimestepKind::uniform;
  std::vector<double> weights;

  static TimestepDistribution make(TimestepKind kind, int t_current);
  int support() const { return static_cast<int>(weights.size()); }
};

std::vector<int> sample_timesteps(const TimestepDistribution& dist, int count, Rng& rng);

// y_i = sqrt(abar_{t_i}) x_i + sqrt(1 - abar_{t_i}) sigma eps_i. Differentiable
// in x; eps is drawn from rng in element order.
ag::Tensor diffuse(const ag::Tensor& x, std::span<const int> t, const NoiseSchedule& schedule,
                   Rng& rng);

// Mean of sign(D - 0.5) over discriminator realness on diffused reals,
// with sign(0) = 0.
double overfit_metric(std::span<const double> realness_on_real);

struct AdaptiveDiffusionState {
  int t_current = 4;
  int t_min = 4;
  int t_max = 64;
  double d_target = 0.6;
  int c_step = 1;
  int update_interval = 4;
  double r_d_last = 0.0;
  TimestepKind pi_kind = TimestepKind::uniform;

  void validate() const;
  TimestepDistribution distribution() const { return TimestepDistribution::make(pi_kind, t_current); }

  nlohmann::json to_json() const;
  static AdaptiveDiffusionState from_json(const nlohmann::json& j);
};

// t <- clamp(t + sign(r_d - d_target) * C, t_min, t_max); records r_d.
void update_diffusion_length(AdaptiveDiffusionState& state, double r_d);

}  // namespace midsg
