#include "gradcheck.hpp"

#include <cmath>

#include "midsg/rng.hpp"

namespace midsg::testing {

GradCheckResult check_gradients(const NamedParams& params, const std::function<ag::Tensor()>& loss,
                                int samples, std::uint64_t seed, double h, double min_grad,
                                double kink_tolerance) {
  for (const auto& [name, p] : params) {
    ag::Tensor t = p;
    t.zero_grad();
  }
  ag::Tensor value = loss();
  ag::backward(value);

  std::vector<std::pair<std::size_t, std::size_t>> candidates;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& p = params[k].second;
    if (!p.requires_grad()) continue;
    auto g = p.grad();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (std::abs(g[i]) > min_grad) candidates.emplace_back(k, i);
  }
  Rng rng(seed);
  for (int i = static_cast<int>(candidates.size()) - 1; i > 0; --i)
    std::swap(candidates[static_cast<std::size_t>(i)], candidates[static_cast<std::size_t>(uniform_int(rng, 0, i))]);

  GradCheckResult result;
  for (auto [k, i] : candidates) {
    if (result.checked >= samples) break;
    ag::Tensor p = params[k].second;
    const double analytic = p.grad()[i];
    auto w = p.mutable_values();
    const double saved = w[i];
    auto central = [&](double step) {
      ag::NoGradGuard guard;
      w[i] = saved + step;
      const double plus = loss().item();
      w[i] = saved - step;
      const double minus = loss().item();
      w[i] = saved;
      return (plus - minus) / (2.0 * step);
    };
    const double numeric = central(h);
    // A leaky-relu kink inside [x-h, x+h] makes the two step sizes disagree.
    const double finer = central(0.1 * h);
    if (std::abs(numeric - finer) > kink_tolerance * std::max(std::abs(numeric), std::abs(finer))) {
      ++result.skipped_kinks;
      continue;
    }
    const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-12});
    ++result.checked;
    if (rel > result.max_rel_error) {
      result.max_rel_error = rel;
      result.worst = params[k].first + "[" + std::to_string(i) + "]";
    }
  }
  return result;
}

}  // namespace midsg::testing
