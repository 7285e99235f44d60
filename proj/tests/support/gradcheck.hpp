#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "midsg/networks.hpp"

namespace midsg::testing {

struct GradCheckResult {
  int checked = 0;
  double max_rel_error = 0.0;
  std::string worst;  // "<param>[index]"
  int skipped_kinks = 0;
};

// Compares analytic gradients of `loss` with central differences on up to
// `samples` randomly chosen trainable entries whose analytic gradient
// magnitude exceeds `min_grad`.
GradCheckResult check_gradients(const NamedParams& params, const std::function<ag::Tensor()>& loss,
                                int samples, std::uint64_t seed, double h = 1e-5,
                                double min_grad = 1e-5, double kink_tolerance = 1e-3);

}  // namespace midsg::testing
