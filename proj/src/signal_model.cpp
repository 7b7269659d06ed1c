#include "qrt/signal_model.hpp"

#include <cmath>
#include <random>
#include <string>

#include <fmt/format.h>

#include "qrt/error.hpp"
#include "qrt/parallel.hpp"
#include "qrt/seeding.hpp"

namespace qrt {

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw Error(ErrorKind::kConfig, message);
}

}  // namespace

bool SystemParams::dispersive_regime() const {
  return std::abs(g_mhz / detuning_mhz()) < 0.1;
}

void SystemParams::validate() const {
  require(std::isfinite(omega_r_ghz) && std::isfinite(omega_q_ghz),
          "system: frequencies must be finite");
  require(omega_r_ghz != omega_q_ghz, "system: omega_r must differ from omega_q (zero detuning)");
  require(g_mhz > 0.0, "system: coupling g must be positive");
  require(kappa_mhz > 0.0, "system: linewidth kappa must be positive");
  require(t1_us > 0.0 && t2_us > 0.0, "system: T1 and T2 must be positive");
}

double ReadoutConfig::window_periods() const {
  return static_cast<double>(n_samples) * omega_if_mhz * 1e6 / sample_rate_hz;
}

void ReadoutConfig::validate() const {
  require(n_samples >= 2, "readout: n_samples must be at least 2");
  require(omega_if_mhz > 0.0, "readout: omega_if must be positive");
  require(sample_rate_hz > 2.0 * omega_if_mhz * 1e6,
          "readout: sample_rate must exceed twice the intermediate frequency");
  const double periods = window_periods();
  const double whole = std::round(periods);
  require(whole >= 1.0 && std::abs(periods - whole) <= 1e-9 * std::max(1.0, periods),
          fmt::format("readout: window holds {} IF periods; an integer number is required",
                      periods));
  require(std::isfinite(s0) && std::isfinite(l0) && std::isfinite(theta_lo),
          "readout: amplitudes and LO phase must be finite");
}

void NoiseModel::validate() const {
  require(std::isfinite(sigma) && sigma >= 0.0, "noise: sigma must be finite and >= 0");
}

QubitState QubitState::superposition(double p_excited) {
  require(p_excited >= 0.0 && p_excited <= 1.0, "state: p_excited must lie in [0, 1]");
  return QubitState(p_excited, Kind::kSuperposition);
}

Eigenstate QubitState::eigenstate() const {
  if (kind_ == Kind::kSuperposition) {
    throw Error(ErrorKind::kConfig, "state: superposition has no definite eigenstate");
  }
  return kind_ == Kind::kExcited ? Eigenstate::kExcited : Eigenstate::kGround;
}

std::vector<double> RabiConfig::times() const {
  std::vector<double> t(n_steps);
  const double dt = t_total_ns / static_cast<double>(n_steps - 1);
  for (std::uint32_t k = 0; k < n_steps; ++k) t[k] = dt * k;
  return t;
}

void RabiConfig::validate() const {
  require(n_steps >= 2, "rabi: n_steps must be at least 2");
  require(t_total_ns > 0.0, "rabi: t_total must be positive");
  require(omega_rabi > 0.0, "rabi: omega_rabi must be positive");
  require(!envelope_t2_ns || *envelope_t2_ns > 0.0, "rabi: envelope_t2 must be positive");
  require(shots_per_step >= 1, "rabi: shots_per_step must be at least 1");
}

double dispersive_shift(const SystemParams& params) {
  const double detuning = params.detuning_mhz();
  if (detuning == 0.0) {
    throw Error(ErrorKind::kConfig, "system: zero detuning");
  }
  return params.g_mhz * params.g_mhz / detuning;
}

ResonatorResponse resonator_response(const SystemParams& params, const ReadoutConfig& config,
                                     Eigenstate state) {
  const double chi = dispersive_shift(params);
  const double centre_mhz =
      params.omega_r_ghz * 1e3 + (state == Eigenstate::kExcited ? chi : -chi);
  const double x = 2.0 * (config.omega_ro_ghz * 1e3 - centre_mhz) / params.kappa_mhz;
  const double scale = config.s0 * config.l0 / 8.0;
  return {scale / std::sqrt(1.0 + x * x), -std::atan(x)};
}

Waveform synthesize_shot(Eigenstate state, const SystemParams& params,
                         const ReadoutConfig& config, const NoiseModel& noise,
                         std::uint64_t seed) {
  const auto response = resonator_response(params, config, state);
  const double theta = response.phase - config.theta_lo;
  const double step = config.phase_step();
  const std::size_t n = config.n_samples;

  Waveform w;
  w.i_samples.resize(n);
  w.q_samples.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double angle = step * static_cast<double>(k) + theta;
    w.i_samples[k] = response.amplitude * std::cos(angle);
    w.q_samples[k] = response.amplitude * std::sin(angle);
  }
  if (noise.sigma > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, noise.sigma);
    for (double& v : w.i_samples) v += gauss(rng);
    for (double& v : w.q_samples) v += gauss(rng);
  }
  return w;
}

Eigenstate sample_collapsed_state(double p_excited, std::uint64_t seed) {
  require(p_excited >= 0.0 && p_excited <= 1.0, "collapse: p_excited must lie in [0, 1]");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  return uniform(rng) < p_excited ? Eigenstate::kExcited : Eigenstate::kGround;
}

double rabi_population(double t_ns, const RabiConfig& rabi) {
  const double c = std::cos(rabi.omega_rabi * t_ns);
  if (!rabi.envelope_t2_ns) {
    const double s = std::sin(0.5 * rabi.omega_rabi * t_ns);
    return s * s;
  }
  return 0.5 * (1.0 - std::exp(-t_ns / *rabi.envelope_t2_ns) * c);
}

std::vector<ShotRecord> synthesize_labeled_shots(Eigenstate state, std::size_t count,
                                                 const SystemParams& params,
                                                 const ReadoutConfig& config,
                                                 const NoiseModel& noise,
                                                 std::uint64_t base_seed) {
  params.validate();
  config.validate();
  noise.validate();
  std::vector<ShotRecord> records(count);
  parallel_for(count, [&](std::size_t k) {
    const std::uint64_t seed = derive_seed(base_seed, k);
    records[k].waveform = synthesize_shot(state, params, config, noise, seed);
    records[k].label = state;
    records[k].seed = seed;
  });
  return records;
}

std::vector<ShotRecord> synthesize_state_shots(const QubitState& state, std::size_t count,
                                               const SystemParams& params,
                                               const ReadoutConfig& config,
                                               const NoiseModel& noise,
                                               std::uint64_t base_seed) {
  params.validate();
  config.validate();
  noise.validate();
  std::vector<ShotRecord> records(count);
  parallel_for(count, [&](std::size_t k) {
    const std::uint64_t seed = derive_seed(base_seed, k);
    const Eigenstate collapsed = sample_collapsed_state(state.p_excited(), derive_seed(seed, 1));
    records[k].waveform = synthesize_shot(collapsed, params, config, noise, seed);
    records[k].seed = seed;
  });
  return records;
}

std::vector<ShotRecord> synthesize_rabi_step(const RabiConfig& rabi, std::uint32_t step,
                                             const SystemParams& params,
                                             const ReadoutConfig& config,
                                             const NoiseModel& noise, std::uint64_t base_seed) {
  rabi.validate();
  params.validate();
  config.validate();
  noise.validate();
  if (step >= rabi.n_steps) {
    throw Error(ErrorKind::kConfig, fmt::format("rabi: step {} out of range", step));
  }
  const double t = rabi.times()[step];
  const double p = rabi_population(t, rabi);
  std::vector<ShotRecord> records(rabi.shots_per_step);
  parallel_for(records.size(), [&](std::size_t j) {
    const std::uint64_t seed = derive_seed(base_seed, step, j);
    const Eigenstate collapsed = sample_collapsed_state(p, derive_seed(seed, 1));
    records[j].waveform = synthesize_shot(collapsed, params, config, noise, seed);
    records[j].time_step_ns = t;
    records[j].seed = seed;
  });
  return records;
}

std::vector<ShotRecord> synthesize_rabi_dataset(const RabiConfig& rabi,
                                                const SystemParams& params,
                                                const ReadoutConfig& config,
                                                const NoiseModel& noise,
                                                std::uint64_t base_seed) {
  std::vector<ShotRecord> all;
  all.reserve(static_cast<std::size_t>(rabi.n_steps) * rabi.shots_per_step);
  for (std::uint32_t k = 0; k < rabi.n_steps; ++k) {
    auto step = synthesize_rabi_step(rabi, k, params, config, noise, base_seed);
    std::move(step.begin(), step.end(), std::back_inserter(all));
  }
  return all;
}

}  // namespace qrt
