#include "midsg/roc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "midsg/errors.hpp"

namespace midsg {

namespace {

// Number of entries of an ascending array that are >= tau.
std::size_t count_at_least(const std::vector<double>& sorted, double tau) {
  return static_cast<std::size_t>(sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), tau));
}

std::vector<double> candidates(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> c(a);
  c.insert(c.end(), b.begin(), b.end());
  c.push_back(std::numeric_limits<double>::infinity());
  std::sort(c.begin(), c.end());
  c.erase(std::unique(c.begin(), c.end()), c.end());
  return c;
}

}  // namespace

void ScoreSet::validate() const {
  if (bonafide_scores.empty() || pa_scores.empty())
    throw ValidationError("ScoreSet: both populations must be nonempty");
  for (const auto* v : {&bonafide_scores, &pa_scores})
    for (double s : *v)
      if (!std::isfinite(s)) throw ValidationError("ScoreSet: non-finite score");
}

std::vector<double> tdr_at_fdr(const ScoreSet& scores, std::span<const double> fdr_targets) {
  scores.validate();
  std::vector<double> bona(scores.bonafide_scores), pa(scores.pa_scores);
  std::sort(bona.begin(), bona.end());
  std::sort(pa.begin(), pa.end());
  const auto cand = candidates(bona, pa);
  const double nb = static_cast<double>(bona.size()), np = static_cast<double>(pa.size());

  std::vector<double> out;
  for (double f : fdr_targets) {
    if (!(f >= 0.0 && f <= 1.0)) throw ValidationError("tdr_at_fdr: FDR target outside [0, 1]");
    // The bonafide fraction is nonincreasing in tau: bisect for the first pass.
    auto it = std::partition_point(cand.begin(), cand.end(), [&](double tau) {
      return static_cast<double>(count_at_least(bona, tau)) / nb > f;
    });
    out.push_back(static_cast<double>(count_at_least(pa, *it)) / np);
  }
  return out;
}

std::vector<std::pair<double, double>> roc_curve(const ScoreSet& scores) {
  scores.validate();
  std::vector<double> bona(scores.bonafide_scores), pa(scores.pa_scores);
  std::sort(bona.begin(), bona.end());
  std::sort(pa.begin(), pa.end());
  const auto cand = candidates(bona, pa);
  std::vector<std::pair<double, double>> curve;
  for (auto it = cand.rbegin(); it != cand.rend(); ++it)
    curve.emplace_back(static_cast<double>(count_at_least(bona, *it)) / static_cast<double>(bona.size()),
                       static_cast<double>(count_at_least(pa, *it)) / static_cast<double>(pa.size()));
  return curve;
}

}  // namespace midsg
