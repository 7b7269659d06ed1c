#pragma once

#include <cstddef>
#include <span>

namespace qrt {

/// Mean excited population over m shots together with the unbiased sample
/// variance of the per-shot estimates (zero when m == 1).
struct PopulationEstimate {
  double mean = 0.0;
  double variance = 0.0;
  std::size_t m = 0;
};

/// Throws Error(kData) on an empty span.
PopulationEstimate summarize(std::span<const double> per_shot);

}  // namespace qrt
