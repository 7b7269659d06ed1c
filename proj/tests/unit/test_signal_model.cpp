#include <cmath>
#include <cstdlib>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "qrt/demodulation.hpp"
#include "qrt/error.hpp"
#include "qrt/seeding.hpp"
#include "qrt/signal_model.hpp"

using namespace qrt;

namespace {

ReadoutConfig small_readout() {
  ReadoutConfig c;
  c.n_samples = 256;
  c.omega_if_mhz = 62.5;
  return c;
}

}  // namespace

TEST(DispersiveShift, DefaultDevice) {
  // 85^2 / (5331 - 3842) MHz
  EXPECT_NEAR(dispersive_shift(SystemParams{}), 7225.0 / 1489.0, 1e-12);
  EXPECT_NEAR(dispersive_shift(SystemParams{}), 4.852, 1e-3);
}

TEST(DispersiveShift, SignFollowsDetuning) {
  SystemParams p;
  std::swap(p.omega_r_ghz, p.omega_q_ghz);
  EXPECT_LT(dispersive_shift(p), 0.0);
}

TEST(DispersiveShift, ZeroDetuningIsConfigError) {
  SystemParams p;
  p.omega_q_ghz = p.omega_r_ghz;
  try {
    dispersive_shift(p);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
  }
}

TEST(SystemParams, DefaultsAreDispersive) {
  SystemParams p;
  EXPECT_NO_THROW(p.validate());
  EXPECT_TRUE(p.dispersive_regime());
  p.kappa_mhz = 0.0;
  EXPECT_THROW(p.validate(), Error);
}

TEST(ResonatorResponse, MatchesLorentzianByHand) {
  const SystemParams p;
  const ReadoutConfig c;
  const double chi = 7225.0 / 1489.0;
  for (auto state : {Eigenstate::kGround, Eigenstate::kExcited}) {
    const double centre = 5331.0 + (state == Eigenstate::kExcited ? chi : -chi);
    const double x = 2.0 * (5331.0 - centre) / 1.1;
    const auto r = resonator_response(p, c, state);
    EXPECT_NEAR(r.amplitude, 0.125 / std::sqrt(1.0 + x * x), 1e-14);
    EXPECT_NEAR(r.phase, -std::atan(x), 1e-14);
  }
}

TEST(ResonatorResponse, ProbeAtBareResonanceIsSymmetric) {
  const auto g = resonator_response(SystemParams{}, ReadoutConfig{}, Eigenstate::kGround);
  const auto e = resonator_response(SystemParams{}, ReadoutConfig{}, Eigenstate::kExcited);
  EXPECT_NEAR(g.amplitude, e.amplitude, 1e-12);
  EXPECT_NEAR(g.phase, -e.phase, 1e-12);
  EXPECT_GT(std::abs(g.phase - e.phase), 1.0);
}

TEST(ReadoutConfig, RequiresWholeIfPeriods) {
  ReadoutConfig c;
  EXPECT_DOUBLE_EQ(c.window_periods(), 50.0);
  EXPECT_NO_THROW(c.validate());
  c.n_samples = 2001;
  EXPECT_THROW(c.validate(), Error);
  EXPECT_NO_THROW(small_readout().validate());
  EXPECT_DOUBLE_EQ(small_readout().window_periods(), 8.0);
}

TEST(ReadoutConfig, RejectsUndersampling) {
  ReadoutConfig c;
  c.sample_rate_hz = 80e6;
  c.n_samples = 8;
  EXPECT_THROW(c.validate(), Error);
}

TEST(SynthesizeShot, NoiselessToneMatchesModel) {
  const SystemParams p;
  const auto c = small_readout();
  const auto r = resonator_response(p, c, Eigenstate::kExcited);
  const auto w = synthesize_shot(Eigenstate::kExcited, p, c, NoiseModel{0.0}, 99);
  ASSERT_EQ(w.size(), 256u);
  const double step = 2.0 * std::numbers::pi * 62.5e6 / 2e9;
  for (std::size_t n = 0; n < w.size(); ++n) {
    EXPECT_NEAR(w.i_samples[n], r.amplitude * std::cos(step * n + r.phase), 1e-15);
    EXPECT_NEAR(w.q_samples[n], r.amplitude * std::sin(step * n + r.phase), 1e-15);
  }
}

TEST(SynthesizeShot, LoPhaseRotatesTone) {
  const SystemParams p;
  auto c = small_readout();
  c.theta_lo = 0.7;
  const auto r = resonator_response(p, c, Eigenstate::kGround);
  const auto w = synthesize_shot(Eigenstate::kGround, p, c, NoiseModel{}, 1);
  EXPECT_NEAR(w.i_samples[0], r.amplitude * std::cos(r.phase - 0.7), 1e-15);
  EXPECT_NEAR(w.q_samples[0], r.amplitude * std::sin(r.phase - 0.7), 1e-15);
}

TEST(SynthesizeShot, SameSeedIsBitIdentical) {
  const auto c = small_readout();
  const auto a = synthesize_shot(Eigenstate::kGround, {}, c, NoiseModel{0.3}, 42);
  const auto b = synthesize_shot(Eigenstate::kGround, {}, c, NoiseModel{0.3}, 42);
  const auto d = synthesize_shot(Eigenstate::kGround, {}, c, NoiseModel{0.3}, 43);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, d);
}

TEST(SynthesizeShot, NoiseHasRequestedSpread) {
  const ReadoutConfig c;  // 2000 samples
  const double sigma = 0.25;
  const auto clean = synthesize_shot(Eigenstate::kGround, {}, c, NoiseModel{}, 0);
  double sum = 0.0, sq = 0.0;
  std::size_t count = 0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto w = synthesize_shot(Eigenstate::kGround, {}, c, NoiseModel{sigma}, s);
    for (std::size_t n = 0; n < w.size(); ++n) {
      for (double r : {w.i_samples[n] - clean.i_samples[n], w.q_samples[n] - clean.q_samples[n]}) {
        sum += r;
        sq += r * r;
        ++count;
      }
    }
  }
  const double mean = sum / count;
  const double sd = std::sqrt(sq / count - mean * mean);
  EXPECT_NEAR(mean, 0.0, 5.0 * sigma / std::sqrt(count));
  EXPECT_NEAR(sd, sigma, 0.02 * sigma);
}

TEST(PhaseSeparation, DistinctWithChiCoincidentWithout) {
  const auto c = small_readout();
  SystemParams p;
  auto demod = [&](Eigenstate s) {
    return demodulate(synthesize_shot(s, p, c, NoiseModel{}, 0), c.omega_if_mhz, c.sample_rate_hz);
  };
  const auto g = demod(Eigenstate::kGround);
  const auto e = demod(Eigenstate::kExcited);
  EXPECT_GT(std::hypot(g.i - e.i, g.q - e.q), 0.02);

  p.g_mhz = 0.0;  // chi = 0
  const auto g0 = demod(Eigenstate::kGround);
  const auto e0 = demod(Eigenstate::kExcited);
  EXPECT_EQ(g0, e0);
}

TEST(Collapse, DeterministicLimits) {
  for (std::uint64_t s = 0; s < 200; ++s) {
    EXPECT_EQ(sample_collapsed_state(0.0, s), Eigenstate::kGround);
    EXPECT_EQ(sample_collapsed_state(1.0, s), Eigenstate::kExcited);
  }
  EXPECT_THROW(sample_collapsed_state(1.5, 0), Error);
}

TEST(Collapse, FrequencyMatchesProbability) {
  const int n = 20000;
  int excited = 0;
  for (int k = 0; k < n; ++k) {
    excited += sample_collapsed_state(0.3, derive_seed(5, k)) == Eigenstate::kExcited;
  }
  const double sd = std::sqrt(0.3 * 0.7 / n);
  EXPECT_NEAR(excited / double(n), 0.3, 4.0 * sd);
}

TEST(QubitState, Constructors) {
  EXPECT_EQ(QubitState::ground().p_excited(), 0.0);
  EXPECT_EQ(QubitState::excited().eigenstate(), Eigenstate::kExcited);
  EXPECT_FALSE(QubitState::superposition(0.5).is_eigenstate());
  EXPECT_THROW(QubitState::superposition(0.5).eigenstate(), Error);
  EXPECT_THROW(QubitState::superposition(-0.1), Error);
}

TEST(RabiPopulation, PlainSine) {
  RabiConfig r;
  EXPECT_DOUBLE_EQ(rabi_population(0.0, r), 0.0);
  EXPECT_NEAR(rabi_population(50.0, r), 1.0, 1e-15);  // pi pulse at t = pi / omega
  EXPECT_NEAR(rabi_population(100.0, r), 0.0, 1e-15);
  EXPECT_NEAR(rabi_population(25.0, r), 0.5, 1e-15);
}

TEST(RabiPopulation, EnvelopeDecaysToHalf) {
  RabiConfig r;
  r.envelope_t2_ns = 30.0;
  EXPECT_NEAR(rabi_population(0.0, r), 0.0, 1e-15);
  EXPECT_NEAR(rabi_population(5000.0, r), 0.5, 1e-12);
}

TEST(RabiPopulation, AlwaysInUnitInterval) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> t(0.0, 1000.0), w(1e-4, 2.0), env(0.1, 500.0);
  std::bernoulli_distribution use_env(0.5);
  for (int k = 0; k < 5000; ++k) {
    RabiConfig r;
    r.omega_rabi = w(rng);
    if (use_env(rng)) r.envelope_t2_ns = env(rng);
    const double p = rabi_population(t(rng), r);
    ASSERT_GE(p, 0.0);
    ASSERT_LE(p, 1.0);
  }
}

TEST(RabiConfig, TimeGridIsInclusive) {
  RabiConfig r;
  const auto t = r.times();
  ASSERT_EQ(t.size(), 40u);
  EXPECT_EQ(t.front(), 0.0);
  EXPECT_NEAR(t.back(), 200.0, 1e-12);
  r.n_steps = 1;
  EXPECT_THROW(r.validate(), Error);
}

TEST(LabeledShots, RecordsCarryDerivedSeeds) {
  const auto c = small_readout();
  const NoiseModel noise{0.1};
  const auto shots = synthesize_labeled_shots(Eigenstate::kExcited, 5, {}, c, noise, 77);
  ASSERT_EQ(shots.size(), 5u);
  for (std::size_t k = 0; k < shots.size(); ++k) {
    EXPECT_EQ(shots[k].seed, derive_seed(77, k));
    EXPECT_EQ(shots[k].label, Eigenstate::kExcited);
    EXPECT_FALSE(shots[k].time_step_ns);
    EXPECT_EQ(shots[k].waveform, synthesize_shot(Eigenstate::kExcited, {}, c, noise, shots[k].seed));
  }
}

TEST(LabeledShots, ThreadCountDoesNotChangeOutput) {
  const auto c = small_readout();
  setenv("QRT_THREADS", "1", 1);
  const auto serial = synthesize_labeled_shots(Eigenstate::kGround, 64, {}, c, NoiseModel{0.2}, 3);
  setenv("QRT_THREADS", "4", 1);
  const auto parallel = synthesize_labeled_shots(Eigenstate::kGround, 64, {}, c, NoiseModel{0.2}, 3);
  unsetenv("QRT_THREADS");
  EXPECT_EQ(serial, parallel);
}

TEST(StateShots, SuperpositionRecordsAreUntagged) {
  const auto c = small_readout();
  const auto shots =
      synthesize_state_shots(QubitState::superposition(0.5), 20, {}, c, NoiseModel{0.1}, 8);
  ASSERT_EQ(shots.size(), 20u);
  for (const auto& s : shots) EXPECT_FALSE(s.label);
}

TEST(RabiStep, TracesRegenerateFromTheirSeeds) {
  const auto c = small_readout();
  RabiConfig r;
  r.shots_per_step = 12;
  const NoiseModel noise{0.05};
  const std::uint32_t step = 7;
  const auto records = synthesize_rabi_step(r, step, {}, c, noise, 1234);
  ASSERT_EQ(records.size(), 12u);
  const double t = r.times()[step];
  const double p = rabi_population(t, r);
  for (std::size_t j = 0; j < records.size(); ++j) {
    EXPECT_EQ(records[j].seed, derive_seed(1234, step, j));
    ASSERT_TRUE(records[j].time_step_ns);
    EXPECT_DOUBLE_EQ(*records[j].time_step_ns, t);
    EXPECT_FALSE(records[j].label);
    const auto state = sample_collapsed_state(p, derive_seed(records[j].seed, 1));
    EXPECT_EQ(records[j].waveform, synthesize_shot(state, {}, c, noise, records[j].seed));
  }
  EXPECT_THROW(synthesize_rabi_step(r, 40, {}, c, noise, 1), Error);
}

TEST(RabiDataset, StepMajorOrder) {
  auto c = small_readout();
  c.n_samples = 32;
  c.omega_if_mhz = 62.5;
  RabiConfig r;
  r.n_steps = 3;
  r.shots_per_step = 4;
  const auto all = synthesize_rabi_dataset(r, {}, c, NoiseModel{0.1}, 9);
  ASSERT_EQ(all.size(), 12u);
  for (std::uint32_t s = 0; s < 3; ++s) {
    const auto step = synthesize_rabi_step(r, s, {}, c, NoiseModel{0.1}, 9);
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(all[s * 4 + j], step[j]);
  }
}
