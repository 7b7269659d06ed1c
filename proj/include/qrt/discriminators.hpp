#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "qrt/neural.hpp"
#include "qrt/population.hpp"
#include "qrt/signal_model.hpp"

namespace qrt {

/// Raw output-layer scores of a TRMNN module: resemblance of a waveform to
/// the ground and excited training references.
struct SimilarityPair {
  double ground = 0.0;
  double excited = 0.0;
};

/// Softmax discriminator over the whole waveform.
struct FnnModel {
  nn::Network network;
  nn::InputNormalization normalization;
};

/// One per-qubit module. Same topology as the FNN, but inference exposes the
/// raw scores and converts them with probability_estimate() instead of a
/// softmax.
struct TrmnnModule {
  std::string qubit_id;
  nn::Network network;
  nn::InputNormalization normalization;
  std::string dataset_hash;  // provenance of the training data, may be empty
};

/// qubit_id -> module. Modules never share parameters.
class ModuleRegistry {
 public:
  /// Inserts or replaces; returns true when an existing module was replaced.
  bool register_module(TrmnnModule module);

  bool contains(const std::string& qubit_id) const { return modules_.count(qubit_id) != 0; }
  /// Throws Error(kData) for an unknown id.
  const TrmnnModule& at(const std::string& qubit_id) const;
  TrmnnModule& at(const std::string& qubit_id);
  std::size_t size() const { return modules_.size(); }
  std::vector<std::string> ids() const;

 private:
  std::map<std::string, TrmnnModule> modules_;
};

/// Global mean/std of all I samples and of all Q samples.
nn::InputNormalization compute_normalization(std::span<const ShotRecord> records);

/// Writes the standardized [I_0..I_{n-1}, Q_0..Q_{n-1}] layout into `out`.
void encode_waveform(const Waveform& w, const nn::InputNormalization& norm,
                     Eigen::Ref<Eigen::VectorXd> out);

struct NeuralTraining {
  nn::TrainReport report;
  std::vector<std::string> warnings;
};

struct FnnTraining : NeuralTraining {
  FnnModel model;
};

struct TrmnnTraining : NeuralTraining {
  bool replaced = false;  // an existing module for the same qubit was replaced
};

/// Trains a softmax discriminator on Ground/Excited records. The topology's
/// input_dim is replaced by 2 * n_samples of the data. Throws Error(kData)
/// on untagged records or a single-class dataset; warns beyond a 60/40
/// class imbalance.
FnnTraining train_fnn(std::span<const ShotRecord> dataset, nn::NetworkConfig topology,
                      const nn::TrainConfig& train);

/// Softmax probability of Excited. Throws Error(kStructural) if the waveform
/// length does not match the network input.
double fnn_infer_shot(const FnnModel& model, const Waveform& w);

/// Trains a module the same way as the FNN (softmax inside the loss only) and
/// registers it under qubit_id, replacing any previous module with a warning.
TrmnnTraining train_trmnn(ModuleRegistry& registry, const std::string& qubit_id,
                          std::span<const ShotRecord> dataset, nn::NetworkConfig topology,
                          const nn::TrainConfig& train);

/// Raw (softmax-free) output scores.
SimilarityPair trmnn_similarity(const TrmnnModule& module, const Waveform& w);

/// Non-saturating head: clamp both scores at zero and take
/// excited / (ground + excited); 0.5 when both clamped scores are zero.
double probability_estimate(const SimilarityPair& pair);

// Batched inference. Matches the per-shot functions up to matrix-product rounding.
std::vector<double> fnn_probabilities(const FnnModel& model, std::span<const ShotRecord> shots);
std::vector<double> fnn_probabilities(const FnnModel& model, std::span<const Waveform> shots);
std::vector<SimilarityPair> trmnn_similarities(const TrmnnModule& module,
                                               std::span<const ShotRecord> shots);
std::vector<SimilarityPair> trmnn_similarities(const TrmnnModule& module,
                                               std::span<const Waveform> shots);
std::vector<double> trmnn_probabilities(const TrmnnModule& module,
                                        std::span<const ShotRecord> shots);

/// Mean and unbiased sample variance of per-shot probability estimates.
/// Throws Error(kData) on an empty list.
PopulationEstimate infer_batch(const FnnModel& model, std::span<const Waveform> shots);
PopulationEstimate infer_batch(const TrmnnModule& module, std::span<const Waveform> shots);

// Registry manifest: {"modules": {"<qubit_id>": {"model": "<file>",
// "dataset_sha256": "<hex>"}}}, model paths relative to the manifest.
void save_registry(const std::filesystem::path& manifest, const ModuleRegistry& registry);
ModuleRegistry load_registry(const std::filesystem::path& manifest);

}  // namespace qrt
