#pragma once

#include <cstdint>
#include <numbers>
#include <optional>
#include <vector>

namespace qrt {

/// Device constants of the qubit-resonator system. Frequencies are plain
/// (cyclic) frequencies; ratios such as chi/kappa are unit-free.
struct SystemParams {
  double omega_r_ghz = 5.331;  // bare resonator frequency
  double omega_q_ghz = 3.842;  // qubit frequency
  double g_mhz = 85.0;         // qubit-resonator coupling
  double kappa_mhz = 1.1;      // resonator linewidth
  double t1_us = 26.0;
  double t2_us = 5.0;

  /// Detuning omega_r - omega_q in MHz.
  double detuning_mhz() const { return (omega_r_ghz - omega_q_ghz) * 1e3; }

  /// g/|detuning| < 0.1. Parameters outside this regime are accepted, but
  /// the dispersive approximation is then questionable.
  bool dispersive_regime() const;

  /// Throws Error(kConfig) on zero detuning or non-positive g, kappa, T1, T2.
  void validate() const;
};

/// Heterodyne chain and ADC settings.
struct ReadoutConfig {
  double omega_ro_ghz = 5.331;  // probe frequency
  double omega_if_mhz = 50.0;   // |probe - LO|
  double sample_rate_hz = 2e9;
  std::uint32_t n_samples = 2000;  // points per quadrature per shot
  double s0 = 1.0;                 // probe amplitude
  double l0 = 1.0;                 // LO amplitude
  double theta_lo = 0.0;           // LO phase offset, radians

  /// Number of IF periods spanned by one acquisition window.
  double window_periods() const;

  /// IF angular step per sample, radians.
  double phase_step() const {
    return 2.0 * std::numbers::pi * omega_if_mhz * 1e6 / sample_rate_hz;
  }

  /// Requires n_samples >= 2, sample_rate above the IF Nyquist rate and an
  /// integer number of IF periods in the window. Throws Error(kConfig).
  void validate() const;
};

struct NoiseModel {
  double sigma = 0.0;  // per-sample, per-quadrature standard deviation

  void validate() const;
};

enum class Eigenstate : std::uint8_t { kGround = 0, kExcited = 1 };

/// Ground, Excited, or a superposition given by its excited population.
class QubitState {
 public:
  static QubitState ground() { return QubitState(0.0, Kind::kGround); }
  static QubitState excited() { return QubitState(1.0, Kind::kExcited); }
  /// Throws Error(kConfig) unless 0 <= p_excited <= 1.
  static QubitState superposition(double p_excited);

  double p_excited() const { return p_excited_; }
  bool is_eigenstate() const { return kind_ != Kind::kSuperposition; }
  /// Only valid when is_eigenstate().
  Eigenstate eigenstate() const;

 private:
  enum class Kind { kGround, kExcited, kSuperposition };
  QubitState(double p, Kind kind) : p_excited_(p), kind_(kind) {}

  double p_excited_;
  Kind kind_;
};

/// One shot: the discrete I and Q sequences B_I(n), B_Q(n).
struct Waveform {
  std::vector<double> i_samples;
  std::vector<double> q_samples;

  std::size_t size() const { return i_samples.size(); }
  friend bool operator==(const Waveform&, const Waveform&) = default;
};

struct ShotRecord {
  Waveform waveform;
  std::optional<Eigenstate> label;      // absent for blind test shots
  std::optional<double> time_step_ns;   // Rabi drive duration, if any
  std::uint64_t seed = 0;               // regenerates the waveform

  friend bool operator==(const ShotRecord&, const ShotRecord&) = default;
};

struct RabiConfig {
  std::uint32_t n_steps = 40;
  double t_total_ns = 200.0;
  /// Rabi angular frequency in rad/ns; the default gives two full
  /// oscillations across t_total_ns.
  double omega_rabi = 4.0 * std::numbers::pi / 200.0;
  std::optional<double> envelope_t2_ns;  // decoherence envelope, off by default
  std::uint32_t shots_per_step = 600;    // traces, i.e. shots per time step

  /// Evenly spaced drive durations from 0 to t_total_ns inclusive.
  std::vector<double> times() const;

  void validate() const;
};

/// Dispersive shift chi = g^2 / (omega_r - omega_q), in MHz. Carries the sign
/// of the detuning.
double dispersive_shift(const SystemParams& params);

struct ResonatorResponse {
  double amplitude;  // scaled by S0*L0/8
  double phase;      // radians, before the LO phase offset
};

/// Steady-state transmission of a single-pole resonator centred at
/// omega_r - chi (ground) or omega_r + chi (excited), probed at omega_ro:
///
///   A = S0*L0/8 / sqrt(1 + x^2),  theta = -atan(x),  x = 2(omega_ro - omega_c)/kappa
ResonatorResponse resonator_response(const SystemParams& params, const ReadoutConfig& config,
                                     Eigenstate state);

/// B_I(n) = A cos(w_if n Ts + theta) + N_I(n), B_Q(n) = A sin(w_if n Ts + theta) + N_Q(n)
/// with theta = theta_state - theta_lo. Noise comes from a generator seeded
/// with `seed` only, so equal seeds give bit-identical waveforms.
Waveform synthesize_shot(Eigenstate state, const SystemParams& params,
                         const ReadoutConfig& config, const NoiseModel& noise,
                         std::uint64_t seed);

/// Projective collapse: Excited with probability p_excited.
Eigenstate sample_collapsed_state(double p_excited, std::uint64_t seed);

/// Excited population after a drive of duration t_ns:
/// sin^2(omega t / 2), or (1 - exp(-t/T) cos(omega t)) / 2 with the envelope.
double rabi_population(double t_ns, const RabiConfig& rabi);

/// `count` labelled shots of one eigenstate. Shot k uses
/// derive_seed(base_seed, k) and stores that seed in its record.
std::vector<ShotRecord> synthesize_labeled_shots(Eigenstate state, std::size_t count,
                                                 const SystemParams& params,
                                                 const ReadoutConfig& config,
                                                 const NoiseModel& noise,
                                                 std::uint64_t base_seed);

/// Shots for a superposition: each shot collapses independently and is then
/// synthesized from the collapsed eigenstate. Records are untagged.
std::vector<ShotRecord> synthesize_state_shots(const QubitState& state, std::size_t count,
                                               const SystemParams& params,
                                               const ReadoutConfig& config,
                                               const NoiseModel& noise,
                                               std::uint64_t base_seed);

/// The shots_per_step untagged records of Rabi time step `step`. Trace j's
/// record seed is derive_seed(base_seed, step, j); its collapse is drawn from
/// derive_seed(record_seed, 1) and its waveform from the record seed.
std::vector<ShotRecord> synthesize_rabi_step(const RabiConfig& rabi, std::uint32_t step,
                                             const SystemParams& params,
                                             const ReadoutConfig& config,
                                             const NoiseModel& noise, std::uint64_t base_seed);

/// All Rabi records, step-major (step 0 traces first).
std::vector<ShotRecord> synthesize_rabi_dataset(const RabiConfig& rabi,
                                                const SystemParams& params,
                                                const ReadoutConfig& config,
                                                const NoiseModel& noise,
                                                std::uint64_t base_seed);

}  // namespace qrt
