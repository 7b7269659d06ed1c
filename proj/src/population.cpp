#include "qrt/population.hpp"

#include "qrt/error.hpp"

namespace qrt {

PopulationEstimate summarize(std::span<const double> per_shot) {
  if (per_shot.empty()) {
    throw Error(ErrorKind::kData, "population: no shots to summarize");
  }
  const double n = static_cast<double>(per_shot.size());
  double sum = 0.0;
  for (double v : per_shot) sum += v;
  const double mean = sum / n;
  double ss = 0.0;
  for (double v : per_shot) ss += (v - mean) * (v - mean);
  const double variance = per_shot.size() > 1 ? ss / (n - 1.0) : 0.0;
  return {mean, variance, per_shot.size()};
}

}  // namespace qrt
