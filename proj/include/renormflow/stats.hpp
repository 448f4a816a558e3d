#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>

namespace renormflow {

inline double mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) /
         static_cast<double>(xs.size());
}

// Unbiased sample variance; 0 for fewer than two values.
inline double sample_variance(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return ss / static_cast<double>(xs.size() - 1);
}

// Standard error of the mean of an autocorrelated series by non-overlapping
// batch means with floor(sqrt(n)) batches of equal length. Trailing samples
// that do not fill a batch are dropped from the variance estimate only.
inline double batch_means_se(std::span<const double> xs) {
  const std::size_t n = xs.size();
  if (n < 4) {
    return n < 2 ? 0.0 : std::sqrt(sample_variance(xs) / static_cast<double>(n));
  }
  const auto batches = static_cast<std::size_t>(std::sqrt(static_cast<double>(n)));
  const std::size_t len = n / batches;
  double sum = 0.0;
  double sumsq = 0.0;
  for (std::size_t b = 0; b < batches; ++b) {
    const double m = mean(xs.subspan(b * len, len));
    sum += m;
    sumsq += m * m;
  }
  const double bm = sum / static_cast<double>(batches);
  const double var =
      (sumsq - static_cast<double>(batches) * bm * bm) / static_cast<double>(batches - 1);
  return std::sqrt(std::max(0.0, var) / static_cast<double>(batches));
}

}  // namespace renormflow
