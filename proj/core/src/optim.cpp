#include "midsg/optim.hpp"

#include <cmath>

#include "midsg/errors.hpp"

namespace midsg {

Adam::Adam(NamedParams params, AdamConfig config) : params_(std::move(params)), config_(config) {
  if (!(config_.lr > 0.0) || config_.beta1 < 0.0 || config_.beta1 >= 1.0 ||
      config_.beta2 < 0.0 || config_.beta2 >= 1.0)
    throw ValidationError("invalid Adam hyperparameters");
  for (const auto& [name, p] : params_) {
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

void Adam::zero_grad() {
  for (auto& [name, p] : params_) p.zero_grad();
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& p = params_[k].second;
    const auto g = p.grad();
    if (g.empty()) continue;
    auto w = p.mutable_values();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
      w[i] -= config_.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + config_.eps);
    }
  }
}

std::map<std::string, std::vector<double>> Adam::export_moments(const std::string& prefix) const {
  std::map<std::string, std::vector<double>> out;
  for (std::size_t k = 0; k < params_.size(); ++k) {
    out[prefix + params_[k].first + ".m"] = m_[k];
    out[prefix + params_[k].first + ".v"] = v_[k];
  }
  return out;
}

void Adam::import_moments(const std::map<std::string, std::vector<double>>& arrays,
                          const std::string& prefix, long t) {
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto m = arrays.find(prefix + params_[k].first + ".m");
    auto v = arrays.find(prefix + params_[k].first + ".v");
    if (m == arrays.end() || v == arrays.end() || m->second.size() != m_[k].size() ||
        v->second.size() != v_[k].size())
      throw ValidationError("optimizer state missing or mismatched for " + params_[k].first);
    m_[k] = m->second;
    v_[k] = v->second;
  }
  t_ = t;
}

}  // namespace midsg
