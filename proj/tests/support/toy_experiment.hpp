#pragma once

#include <filesystem>
#include <vector>

#include "domain_oracle.hpp"
#include "midsg/config.hpp"
#include "midsg/networks.hpp"
#include "midsg/toy_data.hpp"

namespace midsg::testing {

struct TranslationMetrics {
  std::vector<double> fid;        // per target domain, corpus vs real train images
  double target_rate = 0.0;       // cross-domain translations classified as their target
  double identity_mse = 0.0;      // mean per-image MSE of s -> s translations
};

struct ToyExperiment {
  DatasetSplit split;
  ImageBatch test;                // all held-out images
  DomainOracle oracle;
  double oracle_accuracy = 0.0;   // on held-out reals
  double interdomain_mse = 0.0;   // index-paired real images of different domains
};

// Renders the dataset (if absent), splits it and fits the oracle.
ToyExperiment prepare_toy_experiment(const std::filesystem::path& data_dir, int per_domain,
                                     std::uint64_t seed);

TranslationMetrics measure_translations(const ModelBundle& bundle, const ToyExperiment& exp);

}  // namespace midsg::testing
