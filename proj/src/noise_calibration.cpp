#include "qrt/noise_calibration.hpp"

#include <cmath>
#include <vector>

#include <fmt/format.h>

#include "qrt/demodulation.hpp"
#include "qrt/error.hpp"
#include "qrt/parallel.hpp"
#include "qrt/raw_readout.hpp"
#include "qrt/seeding.hpp"

namespace qrt {

namespace {

constexpr std::size_t kMinCalibrationShots = 2000;
constexpr double kAcceptance = 0.01;
constexpr double kBisectionTolerance = 0.0025;

struct CalibrationCloud {
  IQPoint clean;
  std::vector<IQPoint> unit_offsets;  // demodulated noise at sigma = 1
};

CalibrationCloud make_cloud(Eigenstate state, const SystemParams& params,
                            const ReadoutConfig& config, std::uint64_t seed, std::size_t count) {
  CalibrationCloud cloud;
  cloud.clean = demodulate(synthesize_shot(state, params, config, NoiseModel{0.0}, 0),
                           config.omega_if_mhz, config.sample_rate_hz);
  cloud.unit_offsets.resize(count);
  parallel_for(count, [&](std::size_t k) {
    const auto w = synthesize_shot(state, params, config, NoiseModel{1.0}, derive_seed(seed, k));
    const auto p = demodulate(w, config.omega_if_mhz, config.sample_rate_hz);
    cloud.unit_offsets[k] = {p.i - cloud.clean.i, p.q - cloud.clean.q};
  });
  return cloud;
}

std::vector<IQPoint> at_sigma(const CalibrationCloud& cloud, double sigma) {
  std::vector<IQPoint> pts(cloud.unit_offsets.size());
  for (std::size_t k = 0; k < pts.size(); ++k) {
    pts[k] = {cloud.clean.i + sigma * cloud.unit_offsets[k].i,
              cloud.clean.q + sigma * cloud.unit_offsets[k].q};
  }
  return pts;
}

double fidelity(const CalibrationCloud& ground, const CalibrationCloud& excited, double sigma) {
  const auto g = at_sigma(ground, sigma);
  const auto e = at_sigma(excited, sigma);
  const auto d = raw::calibrate(g, e);
  std::size_t e_given_g = 0;
  std::size_t g_given_e = 0;
  for (const auto& p : g) e_given_g += raw::classify(d, p) == Eigenstate::kExcited;
  for (const auto& p : e) g_given_e += raw::classify(d, p) == Eigenstate::kGround;
  return 1.0 - 0.5 * (static_cast<double>(g_given_e) / static_cast<double>(e.size()) +
                      static_cast<double>(e_given_g) / static_cast<double>(g.size()));
}

}  // namespace

double raw_fidelity_at_sigma(double sigma, const SystemParams& params,
                             const ReadoutConfig& config, std::uint64_t seed,
                             std::size_t shots_per_state) {
  params.validate();
  config.validate();
  NoiseModel{sigma}.validate();
  const auto ground = make_cloud(Eigenstate::kGround, params, config,
                                 derive_seed(seed, "calibration-ground"), shots_per_state);
  const auto excited = make_cloud(Eigenstate::kExcited, params, config,
                                  derive_seed(seed, "calibration-excited"), shots_per_state);
  return fidelity(ground, excited, sigma);
}

NoiseCalibration calibrate_noise_to_fidelity(double target_fidelity, const SystemParams& params,
                                             const ReadoutConfig& config, std::uint64_t seed,
                                             std::size_t shots_per_state) {
  params.validate();
  config.validate();
  if (!(target_fidelity > 0.5 && target_fidelity < 1.0)) {
    throw Error(ErrorKind::kConfig,
                fmt::format("calibrate-noise: target fidelity {} outside (0.5, 1)",
                            target_fidelity));
  }
  if (shots_per_state < kMinCalibrationShots) {
    throw Error(ErrorKind::kConfig,
                fmt::format("calibrate-noise: need at least {} shots per state, got {}",
                            kMinCalibrationShots, shots_per_state));
  }

  const auto ground = make_cloud(Eigenstate::kGround, params, config,
                                 derive_seed(seed, "calibration-ground"), shots_per_state);
  const auto excited = make_cloud(Eigenstate::kExcited, params, config,
                                  derive_seed(seed, "calibration-excited"), shots_per_state);

  const double separation =
      std::hypot(excited.clean.i - ground.clean.i, excited.clean.q - ground.clean.q);
  if (!(separation > 0.0)) {
    throw Error(ErrorKind::kConfig,
                "calibrate-noise: noiseless ground and excited responses coincide "
                "(chi = 0 or degenerate readout); no sigma reaches the target");
  }

  NoiseCalibration result;
  result.shots_per_state = shots_per_state;

  // Bracket: at sigma = separation the demodulated clouds overlap heavily
  // (per-axis spread ~ sigma/sqrt(N)); grow until below target.
  double lo = 0.0;
  double hi = separation;
  while (fidelity(ground, excited, hi) >= target_fidelity) {
    lo = hi;
    hi *= 2.0;
    if (++result.iterations > 200) {
      throw Error(ErrorKind::kNumerical, "calibrate-noise: could not bracket the target sigma");
    }
  }

  double best_sigma = hi;
  double best_fidelity = fidelity(ground, excited, hi);
  for (int it = 0; it < 100; ++it, ++result.iterations) {
    const double mid = 0.5 * (lo + hi);
    const double f = fidelity(ground, excited, mid);
    if (std::abs(f - target_fidelity) < std::abs(best_fidelity - target_fidelity)) {
      best_sigma = mid;
      best_fidelity = f;
    }
    if (std::abs(f - target_fidelity) <= kBisectionTolerance) break;
    if (f > target_fidelity) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  if (std::abs(best_fidelity - target_fidelity) > kAcceptance) {
    throw Error(ErrorKind::kNumerical,
                fmt::format("calibrate-noise: best fidelity {:.4f} misses target {:.4f}",
                            best_fidelity, target_fidelity));
  }
  result.noise = NoiseModel{best_sigma};
  result.measured_fidelity = best_fidelity;
  return result;
}

}  // namespace qrt
