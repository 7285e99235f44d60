#pragma once

#include <map>
#include <string>
#include <vector>

#include "midsg/networks.hpp"

namespace midsg {

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.0;
  double beta2 = 0.99;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(NamedParams params, AdamConfig config);

  void zero_grad();
  // Parameters without an accumulated gradient are left untouched.
  void step();

  long steps() const { return t_; }
  const NamedParams& params() const { return params_; }

  // First/second moment arrays keyed by parameter name.
  std::map<std::string, std::vector<double>> export_moments(const std::string& prefix) const;
  void import_moments(const std::map<std::string, std::vector<double>>& arrays,
                      const std::string& prefix, long t);

 private:
  NamedParams params_;
  AdamConfig config_;
  std::vector<std::vector<double>> m_, v_;
  long t_ = 0;
};

}  // namespace midsg
