#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

// Dense feed-forward networks with ReLU hidden layers, a linear output layer,
// softmax + categorical cross-entropy training and Adam. All arithmetic is
// 64-bit. Batches are stored column-wise: one column per sample.
namespace qrt::nn {

enum class Activation : std::uint8_t { kRelu = 0 };

struct NetworkConfig {
  std::size_t input_dim = 4000;  // 2000 I samples followed by 2000 Q samples
  std::vector<std::size_t> hidden_dims{900, 250, 50};
  std::size_t output_dim = 2;
  Activation activation = Activation::kRelu;
  std::uint64_t init_seed = 0;

  /// Throws Error(kConfig) if any dimension is zero.
  void validate() const;
  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

struct DenseLayer {
  Eigen::MatrixXd weights;  // fan_out x fan_in
  Eigen::VectorXd bias;     // fan_out
};

struct Network {
  NetworkConfig config;
  std::vector<DenseLayer> layers;  // hidden layers in order, then the output layer

  std::size_t input_dim() const { return config.input_dim; }
  std::size_t output_dim() const { return config.output_dim; }
  std::size_t parameter_count() const;
};

/// Same shapes as Network::layers.
struct Gradients {
  std::vector<DenseLayer> layers;
};

/// He-uniform weights, U(-sqrt(6/fan_in), sqrt(6/fan_in)), drawn from
/// init_seed; zero biases.
Network init_network(const NetworkConfig& config);

/// Zero-valued tensors shaped like the network's parameters.
Gradients zero_gradients(const Network& net);

/// Logits for one input: affine+ReLU through the hidden layers, then a plain
/// affine output layer. Throws Error(kStructural) on a dimension mismatch.
Eigen::VectorXd forward(const Network& net, const Eigen::VectorXd& x);

/// Logits for a batch (input_dim x B) as an output_dim x B matrix.
Eigen::MatrixXd forward_batch(const Network& net, const Eigen::MatrixXd& inputs);

/// Max-subtracted softmax.
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);
/// Column-wise softmax of a logit matrix.
Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits);

/// -sum(label * log(p)) with p clipped to [1e-12, 1].
double cross_entropy_loss(const Eigen::VectorXd& probabilities, const Eigen::VectorXd& one_hot);

/// Softmax cross-entropy loss of one sample.
double sample_loss(const Network& net, const Eigen::VectorXd& x, const Eigen::VectorXd& one_hot);

/// Exact gradient of the softmax cross-entropy of one sample.
Gradients backward(const Network& net, const Eigen::VectorXd& x, const Eigen::VectorXd& one_hot);

/// Mean loss and mean gradient over a batch. `one_hot` is output_dim x B.
/// Gradients are written into `grads`, which is resized as needed.
double backward_batch(const Network& net, const Eigen::MatrixXd& inputs,
                      const Eigen::MatrixXd& one_hot, Gradients& grads);

struct TrainConfig {
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t batch_size = 64;
  std::size_t max_epochs = 50;
  double validation_fraction = 0.2;
  std::size_t early_stop_patience = 5;  // epochs without validation-loss improvement
  std::uint64_t shuffle_seed = 0;

  void validate() const;
};

struct AdamState {
  std::vector<DenseLayer> first_moment;
  std::vector<DenseLayer> second_moment;
  std::size_t step = 0;  // number of updates applied so far
};

AdamState make_adam_state(const Network& net);

/// One bias-corrected Adam update; increments state.step before use, so the
/// first call runs with t = 1.
void adam_step(Network& net, const Gradients& grads, AdamState& state, const TrainConfig& config);

struct TrainReport {
  std::vector<double> train_loss;  // mean mini-batch loss per epoch
  std::vector<double> validation_loss;
  std::vector<double> validation_accuracy;
  std::size_t epochs = 0;
  std::size_t best_epoch = 0;  // 1-based epoch of the returned snapshot
  bool stopped_early = false;
};

struct TrainResult {
  Network network;
  TrainReport report;
};

struct DataSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// Class-stratified split: round(fraction * N) validation samples, shared
/// out across classes in proportion to their counts.
DataSplit stratified_split(std::span<const int> labels, std::size_t n_classes,
                           double validation_fraction, std::uint64_t seed);

/// Mini-batch Adam on softmax cross-entropy with early stopping on the
/// validation loss. Returns the snapshot with the lowest validation loss.
///
/// `inputs` is input_dim x N; labels are class indices in [0, output_dim).
/// Throws Error(kData) with fewer than 10 samples or when any class is absent.
TrainResult train(Network net, const Eigen::MatrixXd& inputs, std::span<const int> labels,
                  const TrainConfig& config);

/// Standardization applied to waveforms before they enter a network: one
/// mean/std pair for all I samples and one for all Q samples.
struct InputNormalization {
  double i_mean = 0.0;
  double i_std = 1.0;
  double q_mean = 0.0;
  double q_std = 1.0;

  friend bool operator==(const InputNormalization&, const InputNormalization&) = default;
};

struct StoredModel {
  Network network;
  InputNormalization normalization;
};

// Model file, little-endian:
//   "QRTM" | version u16 | input_dim u32 | output_dim u32 | n_hidden u32
//   | hidden dims u32[n_hidden] | activation u8 | init_seed u64
//   | i_mean, i_std, q_mean, q_std f64
//   | per layer: weights f64[fan_out * fan_in] row-major, bias f64[fan_out]
inline constexpr std::uint16_t kModelFormatVersion = 1;

void save_model(const std::filesystem::path& path, const Network& net,
                const InputNormalization& normalization);
StoredModel load_model(const std::filesystem::path& path);

}  // namespace qrt::nn
