#pragma once

#include <span>
#include <utility>
#include <vector>

namespace midsg {

// Higher scores mean "more likely an attack".
struct ScoreSet {
  std::vector<double> bonafide_scores;
  std::vector<double> pa_scores;

  void validate() const;
};

inline constexpr double kDefaultFdrTargetValues[] = {0.01, 0.02, 0.05};
inline constexpr std::span<const double> kDefaultFdrTargets{kDefaultFdrTargetValues};

// For each target f: tau is the smallest candidate threshold (observed scores
// and +inf) with frac(bonafide >= tau) <= f; TDR = frac(PA >= tau).
std::vector<double> tdr_at_fdr(const ScoreSet& scores,
                               std::span<const double> fdr_targets = kDefaultFdrTargets);

// (FDR, TDR) at every candidate threshold, ascending in FDR.
std::vector<std::pair<double, double>> roc_curve(const ScoreSet& scores);

}  // namespace midsg
