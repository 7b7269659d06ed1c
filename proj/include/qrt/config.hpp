#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "qrt/experiments.hpp"
#include "qrt/neural.hpp"
#include "qrt/signal_model.hpp"

namespace qrt::cli {

enum class Scale { kCi, kPaper };

std::string_view to_string(Scale scale);
/// "ci" or "paper"; throws Error(kConfig) otherwise.
Scale parse_scale(std::string_view name);

/// Every random stream of a run.
struct Seeds {
  std::uint64_t calibration = 0;
  std::uint64_t train_set = 0;
  std::uint64_t test_set = 0;
  std::uint64_t rabi = 0;
  std::uint64_t sweep = 0;
  std::uint64_t fnn_init = 0;
  std::uint64_t trmnn_init = 0;
  std::uint64_t shuffle = 0;

  friend bool operator==(const Seeds&, const Seeds&) = default;
};

/// Children of one run seed, one per named stream.
Seeds derive_seeds(std::uint64_t run_seed);

struct RunConfig {
  Scale scale = Scale::kPaper;
  SystemParams system;
  ReadoutConfig readout;

  // Noise: a fixed sigma, or calibration of raw readout to target_fidelity.
  std::optional<double> noise_sigma;
  double target_fidelity = 0.801;
  std::size_t calibration_shots = 2000;

  std::size_t train_shots_per_state = 4000;
  std::size_t test_shots_per_state = 1000;

  RabiConfig rabi;
  std::vector<std::size_t> m_values{10, 50, 100, 600};

  std::vector<std::size_t> hidden_dims{900, 250, 50};
  nn::TrainConfig train;
  std::vector<experiments::Backend> backends{experiments::kAllBackends.begin(),
                                             experiments::kAllBackends.end()};
  std::string qubit_id = "q0";

  std::vector<double> sweep_p{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::size_t sweep_shots = 200;

  std::uint64_t seed = 20240101;
  Seeds seeds = derive_seeds(20240101);

  std::filesystem::path output_dir = "qrt_out";

  /// Checks every nested invariant; throws Error(kConfig).
  void validate() const;

  nn::NetworkConfig topology(std::uint64_t init_seed) const;
  experiments::BackendTrainingOptions training_options() const;
};

/// Defaults of a scale. Paper: 2000 samples at 2 GS/s with a 50 MHz IF,
/// 4000/1000 shots per state, hidden layers [900, 250, 50]. CI: 256 samples
/// with a 62.5 MHz IF (8 whole periods), 1000/1000 shots per state, hidden
/// layers [128, 64, 16]. Both: 600 Rabi traces over 40 steps.
RunConfig preset(Scale scale);

/// Parses TOML text. A top-level `scale` key picks the preset whose values
/// are then overridden key by key. Unknown keys, wrong types and invalid
/// values raise Error(kConfig) with "source:line:" prefixes where the
/// location is known. Without a [seeds] table every stream is derived from
/// `seed`.
RunConfig parse_config(std::string_view text, std::string_view source_name,
                       std::optional<Scale> default_scale = std::nullopt);
RunConfig load_config(const std::filesystem::path& path,
                      std::optional<Scale> default_scale = std::nullopt);

/// Replaces the run seed and re-derives every stream from it.
void override_seed(RunConfig& config, std::uint64_t seed);

nlohmann::json to_json(const RunConfig& config);

}  // namespace qrt::cli
