#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "vlad/errors.hpp"

namespace vlad {

struct LatencyStats {
  double mean = 0.0;
  double p50 = 0.0;
  double p95 = 0.0;
};

/// Nearest-rank percentile of an ascending list: element ceil(p/100 * N).
inline double nearest_rank(const std::vector<double>& sorted, double pct) {
  const auto n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(pct * n / 100.0));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

/// Samples in seconds.
inline LatencyStats latency_stats(std::vector<double> samples) {
  if (samples.empty()) throw ValidationError("latency_stats: empty input");
  double sum = 0.0;
  for (double s : samples) sum += s;
  std::sort(samples.begin(), samples.end());
  return {sum / static_cast<double>(samples.size()), nearest_rank(samples, 50.0), nearest_rank(samples, 95.0)};
}

}  // namespace vlad
