#pragma once

#include <span>

#include "qrt/demodulation.hpp"
#include "qrt/population.hpp"
#include "qrt/signal_model.hpp"

namespace qrt::raw {

/// Linear discriminant between the labelled ground and excited IQ clouds.
/// The boundary is the perpendicular bisector of the two centroids.
struct Discriminant {
  IQPoint mu_g;
  IQPoint mu_e;
  IQPoint axis;      // unit vector from mu_g towards mu_e
  double threshold;  // projection of the centroid midpoint onto axis
  double sigma_g;    // projected standard deviation of the ground cloud
  double sigma_e;

  /// Signed coordinate of p along the discriminant axis.
  double project(const IQPoint& p) const { return p.i * axis.i + p.q * axis.q; }
};

/// Centroids are arithmetic means. Throws Error(kData) if either cloud has
/// fewer than two points or the centroids coincide.
Discriminant calibrate(std::span<const IQPoint> ground, std::span<const IQPoint> excited);

/// Excited above the threshold, Ground below; a point exactly on the
/// threshold is Ground.
Eigenstate classify(const Discriminant& d, const IQPoint& p);

/// Fraction of points assigned Excited, with the sample variance of the
/// per-shot {0, 1} assignments. Throws Error(kData) on an empty list.
PopulationEstimate population(const Discriminant& d, std::span<const IQPoint> points);

}  // namespace qrt::raw
