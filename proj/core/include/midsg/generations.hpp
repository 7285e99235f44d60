#pragma once

// Successive retraining: generation 1 learns from real data, generation k
// from the synthetic corpus of generation k-1 only.

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "midsg/config.hpp"
#include "midsg/eval.hpp"
#include "midsg/pad.hpp"

namespace midsg {

struct GenerationsOptions {
  PadDetectorConfig detector;
  int corpus_per_domain = 0;  // 0: match the real training count of each domain
  RealismOptions realism{0, 0, 0};
  bool progress = false;
};

struct GenerationRow {
  int generation = 0;
  std::string train_data;
  std::string checkpoint;
  std::string corpus;
  RealismReport realism;     // corpus vs held-out real images
  PadArmResult augmented;    // detector trained on real + this corpus
};

struct GenerationsReport {
  PadArmResult baseline;     // detector trained on real images only
  std::vector<double> fdr_targets;
  std::vector<GenerationRow> rows;

  nlohmann::json to_json() const;
  std::string to_markdown() const;
};

// Writes a per-domain corpus of translations under `out_root` (with a
// manifest naming the domains) from the sources, cycling through them.
void write_synthetic_corpus(const ModelBundle& bundle, const std::vector<Sample>& sources,
                            const std::vector<DomainLabel>& domains,
                            const std::vector<int>& per_domain_count,
                            const std::filesystem::path& out_root);

GenerationsReport generations_harness(const TrainConfig& base, int k,
                                      const GenerationsOptions& options = {});

}  // namespace midsg
