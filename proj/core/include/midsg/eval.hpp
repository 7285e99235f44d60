#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "midsg/fid.hpp"
#include "midsg/pad.hpp"
#include "midsg/toy_data.hpp"

namespace midsg {

// Published full-scale figures, carried in reports for comparison only.
inline constexpr double kPublishedGenerationFid[] = {19.71, 20.36, 31.64, 49.25, 80.74};
struct AblationReference {
  const char* component;
  double fid_increase_percent;
};
inline constexpr AblationReference kPublishedAblations[] = {
    {"style mixing", 9.79}, {"path length regularization", 8.12}, {"multi-domain discriminator", 20.70}};

// Images of a corpus root grouped by domain name: one group per
// subdirectory, or a single group "all" when the root holds PNGs directly.
std::map<std::string, std::vector<Sample>> domain_folders(const std::filesystem::path& root);

// phi matching the images: default widths, given seed.
FeatureExtractor make_phi(int channels, int image_size, std::uint64_t seed = 0);

struct Histogram {
  double lo = 0.0, hi = 0.0;
  std::vector<int> counts;
};

struct DomainFid {
  std::string domain;
  double fid = 0.0;
  long n_real = 0, n_synth = 0;
  std::vector<double> bootstrap;  // FIDs of resampled synthetic sets
  Histogram histogram;
};

struct RealismReport {
  std::vector<DomainFid> domains;
  double average = 0.0;  // mean of the per-domain FIDs

  nlohmann::json to_json() const;
  std::string to_markdown() const;
  std::string histogram_svg() const;
};

struct RealismOptions {
  int bootstrap = 50;
  int bins = 20;
  std::uint64_t seed = 0;
};

struct DomainCorpus {
  std::string domain;
  std::vector<Sample> real, synth;
};

RealismReport realism_report(const std::vector<DomainCorpus>& corpora, const FeatureExtractor& phi,
                             const RealismOptions& options = {});
// Domains present under both roots.
RealismReport realism_report(const std::filesystem::path& real_root,
                             const std::filesystem::path& synth_root, const FeatureExtractor& phi,
                             const RealismOptions& options = {});

// Writes <out> (JSON), <out stem>.md and <out stem>_hist.svg.
void write_realism_report(const RealismReport& report, const std::filesystem::path& out);

}  // namespace midsg
