#pragma once

// Brute-force TDR@FDR: sweep every candidate threshold in increasing order
// and count with plain loops.

#include <algorithm>
#include <limits>
#include <vector>

namespace midsg::testing {

inline double brute_force_tdr(const std::vector<double>& bona, const std::vector<double>& pa, double f) {
  std::vector<double> cand(bona);
  cand.insert(cand.end(), pa.begin(), pa.end());
  cand.push_back(std::numeric_limits<double>::infinity());
  std::sort(cand.begin(), cand.end());
  for (double tau : cand) {
    long fb = 0;
    for (double b : bona) fb += b >= tau;
    if (static_cast<double>(fb) / static_cast<double>(bona.size()) <= f) {
      long tp = 0;
      for (double p : pa) tp += p >= tau;
      return static_cast<double>(tp) / static_cast<double>(pa.size());
    }
  }
  return 0.0;
}

}  // namespace midsg::testing
