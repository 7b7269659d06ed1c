#include <cmath>

#include <gtest/gtest.h>

#include "qrt/demodulation.hpp"
#include "qrt/error.hpp"
#include "qrt/noise_calibration.hpp"

using namespace qrt;

namespace {

ReadoutConfig ci_readout() {
  ReadoutConfig c;
  c.n_samples = 256;
  c.omega_if_mhz = 62.5;
  return c;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Noiseless IQ separation of the two states.
double separation(const ReadoutConfig& c) {
  const auto g = demodulate(synthesize_shot(Eigenstate::kGround, {}, c, {}, 0), c.omega_if_mhz,
                            c.sample_rate_hz);
  const auto e = demodulate(synthesize_shot(Eigenstate::kExcited, {}, c, {}, 0), c.omega_if_mhz,
                            c.sample_rate_hz);
  return std::hypot(e.i - g.i, e.q - g.q);
}

}  // namespace

TEST(NoiseCalibration, LowSnrTarget) {
  const auto cal = calibrate_noise_to_fidelity(0.801, {}, ci_readout(), 17);
  EXPECT_GE(cal.measured_fidelity, 0.791);
  EXPECT_LE(cal.measured_fidelity, 0.811);
  EXPECT_EQ(cal.shots_per_state, 2000u);
  EXPECT_GT(cal.noise.sigma, 0.0);
  EXPECT_DOUBLE_EQ(raw_fidelity_at_sigma(cal.noise.sigma, {}, ci_readout(), 17, 2000),
                   cal.measured_fidelity);
}

TEST(NoiseCalibration, HighSnrTarget) {
  const auto cal = calibrate_noise_to_fidelity(0.973, {}, ci_readout(), 17);
  EXPECT_GE(cal.measured_fidelity, 0.963);
  EXPECT_LE(cal.measured_fidelity, 0.983);
}

TEST(NoiseCalibration, SigmaAgreesWithAnalyticSpread) {
  // Demodulated spread per axis is sigma / sqrt(N); F_A = Phi(d sqrt(N) / (2 sigma)).
  const auto c = ci_readout();
  const auto cal = calibrate_noise_to_fidelity(0.801, {}, c, 3);
  const double predicted =
      normal_cdf(separation(c) * std::sqrt(double(c.n_samples)) / (2.0 * cal.noise.sigma));
  EXPECT_NEAR(predicted, 0.801, 0.02);
}

TEST(NoiseCalibration, NoiselessIsPerfect) {
  EXPECT_DOUBLE_EQ(raw_fidelity_at_sigma(0.0, {}, ci_readout(), 1, 2000), 1.0);
}

TEST(NoiseCalibration, FidelityNonIncreasingInSigma) {
  double previous = 1.0;
  for (double sigma = 0.0; sigma <= 1.0; sigma += 0.05) {
    const double f = raw_fidelity_at_sigma(sigma, {}, ci_readout(), 99, 2000);
    EXPECT_LE(f, previous + 0.01) << "sigma " << sigma;
    previous = f;
  }
  EXPECT_LT(previous, 0.7);
}

TEST(NoiseCalibration, RejectsBadRequests) {
  auto kind = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::kNumerical;  // sentinel: nothing thrown
  };
  EXPECT_EQ(kind([] { calibrate_noise_to_fidelity(1.0, {}, ci_readout(), 1); }),
            ErrorKind::kConfig);
  EXPECT_EQ(kind([] { calibrate_noise_to_fidelity(0.5, {}, ci_readout(), 1); }),
            ErrorKind::kConfig);
  EXPECT_EQ(kind([] { calibrate_noise_to_fidelity(0.8, {}, ci_readout(), 1, 100); }),
            ErrorKind::kConfig);
}

TEST(NoiseCalibration, Deterministic) {
  const auto a = calibrate_noise_to_fidelity(0.9, {}, ci_readout(), 5);
  const auto b = calibrate_noise_to_fidelity(0.9, {}, ci_readout(), 5);
  EXPECT_EQ(a.noise.sigma, b.noise.sigma);
  EXPECT_EQ(a.measured_fidelity, b.measured_fidelity);
}
