#include "qrt/raw_readout.hpp"

#include <cmath>
#include <vector>

#include "qrt/error.hpp"

namespace qrt::raw {

namespace {

IQPoint centroid(std::span<const IQPoint> points) {
  IQPoint c;
  for (const auto& p : points) {
    c.i += p.i;
    c.q += p.q;
  }
  c.i /= static_cast<double>(points.size());
  c.q /= static_cast<double>(points.size());
  return c;
}

double projected_std(std::span<const IQPoint> points, const Discriminant& d, double centre) {
  double ss = 0.0;
  for (const auto& p : points) {
    const double r = d.project(p) - centre;
    ss += r * r;
  }
  return std::sqrt(ss / static_cast<double>(points.size() - 1));
}

}  // namespace

Discriminant calibrate(std::span<const IQPoint> ground, std::span<const IQPoint> excited) {
  if (ground.size() < 2 || excited.size() < 2) {
    throw Error(ErrorKind::kData, "raw readout: each calibration cloud needs at least 2 points");
  }
  Discriminant d{};
  d.mu_g = centroid(ground);
  d.mu_e = centroid(excited);
  const double di = d.mu_e.i - d.mu_g.i;
  const double dq = d.mu_e.q - d.mu_g.q;
  const double separation = std::hypot(di, dq);
  if (!(separation > 0.0)) {
    throw Error(ErrorKind::kData,
                "raw readout: ground and excited centroids coincide; states are indistinguishable");
  }
  d.axis = {di / separation, dq / separation};
  const double proj_g = d.project(d.mu_g);
  const double proj_e = d.project(d.mu_e);
  d.threshold = 0.5 * (proj_g + proj_e);
  d.sigma_g = projected_std(ground, d, proj_g);
  d.sigma_e = projected_std(excited, d, proj_e);
  return d;
}

Eigenstate classify(const Discriminant& d, const IQPoint& p) {
  return d.project(p) > d.threshold ? Eigenstate::kExcited : Eigenstate::kGround;
}

PopulationEstimate population(const Discriminant& d, std::span<const IQPoint> points) {
  std::vector<double> bits;
  bits.reserve(points.size());
  for (const auto& p : points) {
    bits.push_back(classify(d, p) == Eigenstate::kExcited ? 1.0 : 0.0);
  }
  return summarize(bits);
}

}  // namespace qrt::raw
