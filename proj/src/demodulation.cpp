#include "qrt/demodulation.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "qrt/error.hpp"
#include "qrt/parallel.hpp"

namespace qrt {

namespace {

// Reference tone for one window length; shared by every shot of a batch.
struct ReferenceTone {
  std::vector<double> cos_table;
  std::vector<double> sin_table;

  ReferenceTone(std::size_t n, double omega_if_mhz, double sample_rate_hz)
      : cos_table(n), sin_table(n) {
    const double step = 2.0 * std::numbers::pi * omega_if_mhz * 1e6 / sample_rate_hz;
    for (std::size_t k = 0; k < n; ++k) {
      cos_table[k] = std::cos(step * static_cast<double>(k));
      sin_table[k] = std::sin(step * static_cast<double>(k));
    }
  }

  IQPoint project(const Waveform& w) const {
    double i_acc = 0.0;
    double q_acc = 0.0;
    const std::size_t n = cos_table.size();
    for (std::size_t k = 0; k < n; ++k) {
      const double bi = w.i_samples[k];
      const double bq = w.q_samples[k];
      i_acc += bi * cos_table[k] + bq * sin_table[k];
      q_acc += bq * cos_table[k] - bi * sin_table[k];
    }
    const double scale = 1.0 / static_cast<double>(n);
    return {i_acc * scale, q_acc * scale};
  }
};

void check_shape(const Waveform& w) {
  if (w.i_samples.size() != w.q_samples.size()) {
    throw Error(ErrorKind::kStructural,
                fmt::format("demodulate: I has {} samples but Q has {}", w.i_samples.size(),
                            w.q_samples.size()));
  }
  if (w.i_samples.empty()) {
    throw Error(ErrorKind::kStructural, "demodulate: empty waveform");
  }
}

template <typename Get>
std::vector<IQPoint> demodulate_each(std::size_t count, Get&& get, double omega_if_mhz,
                                     double sample_rate_hz) {
  std::vector<IQPoint> points(count);
  if (count == 0) return points;
  const std::size_t n = get(0).size();
  for (std::size_t k = 0; k < count; ++k) {
    try {
      check_shape(get(k));
      if (get(k).size() != n) {
        throw Error(ErrorKind::kStructural,
                    fmt::format("demodulate: length {} differs from batch length {}",
                                get(k).size(), n));
      }
    } catch (const Error& e) {
      throw Error(e.kind(), fmt::format("shot {}: {}", k, e.what()));
    }
  }
  const ReferenceTone tone(n, omega_if_mhz, sample_rate_hz);
  parallel_for(count, [&](std::size_t k) { points[k] = tone.project(get(k)); });
  return points;
}

}  // namespace

IQPoint demodulate(const Waveform& w, double omega_if_mhz, double sample_rate_hz) {
  check_shape(w);
  return ReferenceTone(w.size(), omega_if_mhz, sample_rate_hz).project(w);
}

std::vector<IQPoint> demodulate_batch(std::span<const Waveform> shots, double omega_if_mhz,
                                      double sample_rate_hz) {
  return demodulate_each(
      shots.size(), [&](std::size_t k) -> const Waveform& { return shots[k]; }, omega_if_mhz,
      sample_rate_hz);
}

std::vector<IQPoint> demodulate_records(std::span<const ShotRecord> records,
                                        const ReadoutConfig& config) {
  return demodulate_each(
      records.size(), [&](std::size_t k) -> const Waveform& { return records[k].waveform; },
      config.omega_if_mhz, config.sample_rate_hz);
}

}  // namespace qrt
