#pragma once

#include <span>
#include <vector>

#include "qrt/signal_model.hpp"

namespace qrt {

/// DC component of a shot on the IQ plane.
struct IQPoint {
  double i = 0.0;
  double q = 0.0;

  friend bool operator==(const IQPoint&, const IQPoint&) = default;
};

/// Digital demodulation of both quadrature branches to DC:
///
///   I = (1/N) sum_n [B_I(n) cos(w n Ts) + B_Q(n) sin(w n Ts)]
///   Q = (1/N) sum_n [B_Q(n) cos(w n Ts) - B_I(n) sin(w n Ts)]
///
/// A noiseless tone A cos/sin(w n Ts + theta) over whole IF periods maps to
/// (A cos theta, A sin theta). Throws Error(kStructural) when the I and Q
/// sequences differ in length or are empty.
IQPoint demodulate(const Waveform& w, double omega_if_mhz, double sample_rate_hz);

/// Element-wise demodulate, order preserved. Errors name the failing index.
std::vector<IQPoint> demodulate_batch(std::span<const Waveform> shots, double omega_if_mhz,
                                      double sample_rate_hz);

/// Convenience overload over the waveforms of a record list.
std::vector<IQPoint> demodulate_records(std::span<const ShotRecord> records,
                                        const ReadoutConfig& config);

}  // namespace qrt
