#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "qrt/demodulation.hpp"
#include "qrt/error.hpp"
#include "qrt/seeding.hpp"

using namespace qrt;

namespace {

constexpr double kPi = std::numbers::pi;

Waveform tone(double amplitude, double theta, std::size_t n, double step) {
  Waveform w;
  for (std::size_t k = 0; k < n; ++k) {
    w.i_samples.push_back(amplitude * std::cos(step * k + theta));
    w.q_samples.push_back(amplitude * std::sin(step * k + theta));
  }
  return w;
}

Waveform random_waveform(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g(0.0, 1.0);
  Waveform w;
  for (std::size_t k = 0; k < n; ++k) {
    w.i_samples.push_back(g(rng));
    w.q_samples.push_back(g(rng));
  }
  return w;
}

}  // namespace

TEST(Demodulate, RecoversToneOverWholePeriods) {
  const double step = 2.0 * kPi * 50e6 / 2e9;
  for (double a : {0.01, 0.125, 1.0, 3.0}) {
    for (int k = 0; k < 12; ++k) {
      const double theta = -kPi + 2.0 * kPi * k / 12.0;
      const auto p = demodulate(tone(a, theta, 2000, step), 50.0, 2e9);
      EXPECT_NEAR(p.i, a * std::cos(theta), 1e-12);
      EXPECT_NEAR(p.q, a * std::sin(theta), 1e-12);
    }
  }
}

TEST(Demodulate, ZeroWaveformIsOrigin) {
  Waveform w{std::vector<double>(256, 0.0), std::vector<double>(256, 0.0)};
  EXPECT_EQ(demodulate(w, 62.5, 2e9), (IQPoint{0.0, 0.0}));
}

TEST(Demodulate, IsLinear) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> coef(-3.0, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    const auto w1 = random_waveform(rng, 256);
    const auto w2 = random_waveform(rng, 256);
    const double a = coef(rng), b = coef(rng);
    Waveform mix = w1;
    for (std::size_t k = 0; k < 256; ++k) {
      mix.i_samples[k] = a * w1.i_samples[k] + b * w2.i_samples[k];
      mix.q_samples[k] = a * w1.q_samples[k] + b * w2.q_samples[k];
    }
    const auto p1 = demodulate(w1, 62.5, 2e9);
    const auto p2 = demodulate(w2, 62.5, 2e9);
    const auto pm = demodulate(mix, 62.5, 2e9);
    EXPECT_NEAR(pm.i, a * p1.i + b * p2.i, 1e-12);
    EXPECT_NEAR(pm.q, a * p1.q + b * p2.q, 1e-12);
  }
}

TEST(Demodulate, PhaseShiftRotatesPoint) {
  const double step = 2.0 * kPi * 62.5e6 / 2e9;
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> angle(-kPi, kPi);
  for (int trial = 0; trial < 50; ++trial) {
    const double theta = angle(rng), phi = angle(rng);
    const auto p = demodulate(tone(0.4, theta, 256, step), 62.5, 2e9);
    const auto r = demodulate(tone(0.4, theta + phi, 256, step), 62.5, 2e9);
    EXPECT_NEAR(r.i, p.i * std::cos(phi) - p.q * std::sin(phi), 1e-12);
    EXPECT_NEAR(r.q, p.i * std::sin(phi) + p.q * std::cos(phi), 1e-12);
  }
}

TEST(Demodulate, WhiteNoiseSpreadShrinksWithWindow) {
  // Per-axis standard deviation of demodulated white noise is sigma / sqrt(N).
  const std::size_t n = 256;
  const double sigma = 0.5;
  std::mt19937_64 rng(21);
  std::normal_distribution<double> g(0.0, sigma);
  const int shots = 4000;
  double si = 0.0, sq = 0.0;
  for (int s = 0; s < shots; ++s) {
    Waveform w;
    for (std::size_t k = 0; k < n; ++k) {
      w.i_samples.push_back(g(rng));
      w.q_samples.push_back(g(rng));
    }
    const auto p = demodulate(w, 62.5, 2e9);
    si += p.i * p.i;
    sq += p.q * p.q;
  }
  const double expected = sigma / std::sqrt(double(n));
  EXPECT_NEAR(std::sqrt(si / shots), expected, 0.05 * expected);
  EXPECT_NEAR(std::sqrt(sq / shots), expected, 0.05 * expected);
}

TEST(Demodulate, ShapeErrors) {
  Waveform bad{std::vector<double>(10, 0.0), std::vector<double>(9, 0.0)};
  try {
    demodulate(bad, 62.5, 2e9);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kStructural);
  }
  EXPECT_THROW(demodulate(Waveform{}, 62.5, 2e9), Error);
}

TEST(DemodulateBatch, MatchesSingleShotsInOrder) {
  std::mt19937_64 rng(4);
  std::vector<Waveform> shots;
  for (int k = 0; k < 37; ++k) shots.push_back(random_waveform(rng, 64));
  const auto batch = demodulate_batch(shots, 62.5, 2e9);
  ASSERT_EQ(batch.size(), shots.size());
  for (std::size_t k = 0; k < shots.size(); ++k) {
    EXPECT_EQ(batch[k], demodulate(shots[k], 62.5, 2e9));
  }
  EXPECT_TRUE(demodulate_batch({}, 62.5, 2e9).empty());
}

TEST(DemodulateBatch, ErrorNamesFailingShot) {
  std::mt19937_64 rng(4);
  std::vector<Waveform> shots;
  for (int k = 0; k < 5; ++k) shots.push_back(random_waveform(rng, 64));
  shots[3].q_samples.pop_back();
  try {
    demodulate_batch(shots, 62.5, 2e9);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kStructural);
    EXPECT_NE(std::string(e.what()).find("shot 3"), std::string::npos) << e.what();
  }
}

TEST(DemodulateRecords, UsesReadoutSettings) {
  ReadoutConfig c;
  c.n_samples = 256;
  c.omega_if_mhz = 62.5;
  std::vector<ShotRecord> records;
  for (std::uint64_t s = 0; s < 6; ++s) {
    records.push_back({synthesize_shot(Eigenstate::kGround, {}, c, NoiseModel{0.1}, s),
                       Eigenstate::kGround, std::nullopt, s});
  }
  const auto pts = demodulate_records(records, c);
  for (std::size_t k = 0; k < records.size(); ++k) {
    EXPECT_EQ(pts[k], demodulate(records[k].waveform, 62.5, 2e9));
  }
}
