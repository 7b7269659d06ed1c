#pragma once

#include <cstddef>
#include <cstdint>

#include "qrt/signal_model.hpp"

namespace qrt {

struct NoiseCalibration {
  NoiseModel noise;
  double measured_fidelity = 0.0;  // raw F_A on the calibration set at noise.sigma
  std::size_t shots_per_state = 0;
  int iterations = 0;
};

/// Finds the noise sigma at which raw readout reaches assignment fidelity
/// `target_fidelity` (within +-0.01) on a synthetic calibration set of
/// `shots_per_state` shots per eigenstate.
///
/// Each calibration shot is synthesized once at unit sigma. Demodulation is
/// linear, so its IQ point at any sigma is clean + sigma * (unit - clean),
/// which lets the bisection reuse the same noise draws at every trial sigma.
///
/// Throws Error(kConfig) when the target is outside (0.5, 1), when fewer
/// than 2000 shots per state are requested, or when the noiseless states are
/// indistinguishable; Error(kNumerical) when bisection cannot get within
/// 0.01 of the target.
NoiseCalibration calibrate_noise_to_fidelity(double target_fidelity, const SystemParams& params,
                                             const ReadoutConfig& config, std::uint64_t seed,
                                             std::size_t shots_per_state = 2000);

/// Raw-readout F_A of a calibration set at a given sigma (same construction
/// as above). Exposed for monotonicity checks.
double raw_fidelity_at_sigma(double sigma, const SystemParams& params,
                             const ReadoutConfig& config, std::uint64_t seed,
                             std::size_t shots_per_state);

}  // namespace qrt
