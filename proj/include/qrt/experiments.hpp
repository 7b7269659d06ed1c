#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qrt/discriminators.hpp"
#include "qrt/neural.hpp"
#include "qrt/population.hpp"
#include "qrt/raw_readout.hpp"
#include "qrt/signal_model.hpp"

namespace qrt::experiments {

enum class Backend { kRaw, kFnn, kTrmnn };

inline constexpr std::array<Backend, 3> kAllBackends{Backend::kRaw, Backend::kFnn,
                                                     Backend::kTrmnn};

std::string_view to_string(Backend backend);
/// Accepts "raw", "fnn", "trmnn"; throws Error(kConfig) otherwise.
Backend parse_backend(std::string_view name);

// ---------------------------------------------------------------------------
// Assignment fidelity

struct ConfusionCounts {
  std::size_t n_g_given_g = 0;
  std::size_t n_e_given_g = 0;
  std::size_t n_g_given_e = 0;
  std::size_t n_e_given_e = 0;

  std::size_t total_g() const { return n_g_given_g + n_e_given_g; }
  std::size_t total_e() const { return n_g_given_e + n_e_given_e; }
  void add(Eigenstate prepared, Eigenstate assigned);
};

/// F_A = 1 - [P(g|e) + P(e|g)] / 2. Throws Error(kData) if either prepared
/// state has no shots.
double assignment_fidelity(const ConfusionCounts& counts);

/// Backends calibrated or trained on the same labelled shots.
struct TrainedBackends {
  ReadoutConfig readout;  // demodulation settings for the raw backend
  std::optional<raw::Discriminant> raw;
  std::optional<FnnModel> fnn;
  std::optional<TrmnnModule> trmnn;

  bool has(Backend backend) const;
  std::vector<Backend> available() const;
};

struct BackendTrainingOptions {
  nn::NetworkConfig topology;  // input_dim is taken from the data
  nn::TrainConfig train;
  std::uint64_t fnn_init_seed = 1;
  std::uint64_t trmnn_init_seed = 2;
  std::string qubit_id = "q0";
};

struct TrainingReports {
  std::optional<nn::TrainReport> fnn;
  std::optional<nn::TrainReport> trmnn;
};

/// Raw readout is calibrated on the demodulated training shots; the neural
/// backends are trained on the waveforms themselves.
TrainedBackends train_backends(std::span<const ShotRecord> train_set, const ReadoutConfig& readout,
                               std::span<const Backend> which,
                               const BackendTrainingOptions& options,
                               TrainingReports* reports = nullptr);

/// Per-shot excited-state estimates: raw readout gives {0, 1} assignments,
/// the FNN its softmax probability, the TRMNN probability_estimate() of its
/// scores. Throws Error(kConfig) if the backend is not available.
std::vector<double> per_shot_estimates(const TrainedBackends& backends, Backend backend,
                                       std::span<const ShotRecord> shots);

/// Hard assignment from a per-shot estimate: Excited iff estimate > 0.5.
Eigenstate assign(double estimate);

struct AssignmentRow {
  Backend backend;
  ConfusionCounts counts;
  double fidelity;
};

/// Confusion counts and F_A per backend on labelled test shots.
std::vector<AssignmentRow> evaluate_assignment(const TrainedBackends& backends,
                                               std::span<const Backend> which,
                                               std::span<const ShotRecord> test_set);

/// per_state Ground shots (stream derive_seed(seed, "ground")) followed by
/// per_state Excited shots (stream derive_seed(seed, "excited")).
std::vector<ShotRecord> labelled_dataset(std::size_t per_state, const SystemParams& params,
                                         const ReadoutConfig& readout, const NoiseModel& noise,
                                         std::uint64_t seed);

struct AssignmentOptions {
  std::size_t train_shots_per_state = 4000;
  std::size_t test_shots_per_state = 1000;
  BackendTrainingOptions training;
};

struct AssignmentExperiment {
  TrainedBackends backends;
  TrainingReports reports;
  std::vector<AssignmentRow> rows;
};

/// Synthesizes independent training and held-out test sets from
/// derive_seed(seed, "train") and derive_seed(seed, "test"),
/// trains the requested backends and scores them on the test set.
AssignmentExperiment run_assignment_experiment(const SystemParams& params,
                                               const ReadoutConfig& readout,
                                               const NoiseModel& noise,
                                               std::span<const Backend> which,
                                               const AssignmentOptions& options,
                                               std::uint64_t seed);

// ---------------------------------------------------------------------------
// Rabi tomography

/// Per-trace estimates for each backend, indexed [step][trace].
struct RabiEstimates {
  std::vector<double> times;
  std::map<Backend, std::vector<std::vector<double>>> per_trace;
};

struct RabiCurve {
  Backend backend;
  std::size_t m;  // traces averaged per time step
  std::vector<double> times;
  std::vector<double> means;
  std::vector<double> variances;  // per-step sample variance across the m traces
};

/// Synthesizes the Rabi traces step by step (never holding more than one
/// step in memory) and evaluates every requested backend on them.
RabiEstimates estimate_rabi(const TrainedBackends& backends, std::span<const Backend> which,
                            const RabiConfig& rabi, const SystemParams& params,
                            const ReadoutConfig& readout, const NoiseModel& noise,
                            std::uint64_t seed);

/// Same, for one time step's records; appended to `estimates`.
void add_rabi_step(RabiEstimates& estimates, const TrainedBackends& backends,
                   std::span<const Backend> which, double time_ns,
                   std::span<const ShotRecord> step_records);

/// Curves over the first M traces for every M. Throws Error(kConfig) if an
/// M exceeds the available traces or is zero.
std::vector<RabiCurve> rabi_curves(const RabiEstimates& estimates,
                                   std::span<const std::size_t> m_values);

std::vector<RabiCurve> run_rabi_experiment(const TrainedBackends& backends,
                                           std::span<const Backend> which,
                                           const RabiConfig& rabi,
                                           std::span<const std::size_t> m_values,
                                           const SystemParams& params,
                                           const ReadoutConfig& readout, const NoiseModel& noise,
                                           std::uint64_t seed);

// ---------------------------------------------------------------------------
// Sine fit and Rabi fidelity

struct SineParams {
  double amplitude = 0.0;
  double omega = 0.0;  // rad per time unit
  double phase = 0.0;
  double offset = 0.0;
};

struct SineFit {
  SineParams params;
  std::vector<double> fitted;
  bool converged = false;
  int iterations = 0;
};

/// Least-squares fit of y = A sin(omega t + phase) + offset by damped
/// Gauss-Newton (Levenberg-Marquardt). Starting point: omega from the
/// dominant DFT bin of the mean-removed data, offset = mean, A = (max-min)/2,
/// phase from the sine/cosine projections. Stops when the relative cost
/// change drops below 1e-10 (converged) or after 200 iterations (not).
/// The result has A >= 0 and phase in (-pi, pi]. Requires >= 8 points.
SineFit fit_sine(std::span<const double> t, std::span<const double> y);
SineFit fit_sine(const RabiCurve& curve);

/// One undamped Gauss-Newton step from `start`.
SineParams refine_sine(const SineParams& start, std::span<const double> t,
                       std::span<const double> y);

/// Coefficient of determination 1 - sum (y-f)^2 / sum (y-mean(y))^2.
/// Throws Error(kStructural) on length mismatch or fewer than two points and
/// Error(kData) when y is constant.
double rabi_fidelity(std::span<const double> y, std::span<const double> f);

struct RabiFidelityCell {
  Backend backend;
  std::size_t m;
  std::optional<double> rabi_fidelity;  // empty for a constant curve
  SineFit fit;
};

std::vector<RabiFidelityCell> rabi_fidelity_table(std::span<const RabiCurve> curves);

// ---------------------------------------------------------------------------
// Variance

struct VarianceEntry {
  Backend backend;
  std::size_t m;
  double mean_variance;  // temporal mean of the per-step variances
  double normalized;     // mean_variance / normalization
};

struct VarianceReport {
  double normalization = 1.0;
  std::vector<VarianceEntry> entries;
};

/// Temporally averaged variances. Without an explicit normalization the raw
/// curve with the largest M is the unit. Throws Error(kData) if the curves do
/// not share a time grid or no normalization can be chosen.
VarianceReport variance_report(std::span<const RabiCurve> curves,
                               std::optional<double> normalization = std::nullopt);

// ---------------------------------------------------------------------------
// Superposition sweep

struct SweepPoint {
  double p_excited;
  std::map<Backend, PopulationEstimate> estimates;
};

/// For each p, `shots_per_point` collapsed shots of the superposition and
/// each backend's population estimate.
std::vector<SweepPoint> run_superposition_sweep(const TrainedBackends& backends,
                                                std::span<const Backend> which,
                                                std::span<const double> p_values,
                                                std::size_t shots_per_point,
                                                const SystemParams& params,
                                                const ReadoutConfig& readout,
                                                const NoiseModel& noise, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Report files. Floats are written with 12 significant digits.

void write_assignment_json(const std::filesystem::path& path, std::span<const AssignmentRow> rows,
                           std::optional<double> noise_sigma = std::nullopt);
void write_rabi_fidelity_json(const std::filesystem::path& path,
                              std::span<const RabiFidelityCell> cells);
/// Columns: backend, M, t_ns, mean, variance.
void write_rabi_curves_csv(const std::filesystem::path& path, std::span<const RabiCurve> curves);
void write_variance_json(const std::filesystem::path& path, const VarianceReport& report);

}  // namespace qrt::experiments
