#include "qrt/neural.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "qrt/detail/binary_io.hpp"
#include "qrt/error.hpp"
#include "qrt/seeding.hpp"

namespace qrt::nn {

namespace {

constexpr double kProbabilityFloor = 1e-12;
constexpr std::string_view kModelMagic = "QRTM";

void check_input_rows(const Network& net, Eigen::Index rows) {
  if (static_cast<std::size_t>(rows) != net.input_dim()) {
    throw Error(ErrorKind::kStructural,
                fmt::format("network expects {} inputs, got {}", net.input_dim(), rows));
  }
}

// Affine map of every column: W * a + b.
Eigen::MatrixXd affine(const DenseLayer& layer, const Eigen::MatrixXd& a) {
  Eigen::MatrixXd z = layer.weights * a;
  z.colwise() += layer.bias;
  return z;
}

// Hidden activations of every layer (ReLU outputs), input excluded.
std::vector<Eigen::MatrixXd> hidden_activations(const Network& net,
                                                const Eigen::MatrixXd& inputs) {
  std::vector<Eigen::MatrixXd> acts;
  acts.reserve(net.layers.size() - 1);
  for (std::size_t l = 0; l + 1 < net.layers.size(); ++l) {
    const Eigen::MatrixXd& in = l == 0 ? inputs : acts.back();
    acts.push_back(affine(net.layers[l], in).cwiseMax(0.0));
  }
  return acts;
}

double column_loss(const Eigen::MatrixXd& probabilities, const Eigen::MatrixXd& one_hot,
                   Eigen::Index col) {
  double loss = 0.0;
  for (Eigen::Index r = 0; r < probabilities.rows(); ++r) {
    const double y = one_hot(r, col);
    if (y != 0.0) loss -= y * std::log(std::clamp(probabilities(r, col), kProbabilityFloor, 1.0));
  }
  return loss;
}

std::vector<DenseLayer> zeros_shaped(const Network& net) {
  std::vector<DenseLayer> out;
  out.reserve(net.layers.size());
  for (const auto& layer : net.layers) {
    out.push_back({Eigen::MatrixXd::Zero(layer.weights.rows(), layer.weights.cols()),
                   Eigen::VectorXd::Zero(layer.bias.size())});
  }
  return out;
}

Eigen::MatrixXd gather_columns(const Eigen::MatrixXd& source, std::span<const std::size_t> idx) {
  Eigen::MatrixXd out(source.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) {
    out.col(static_cast<Eigen::Index>(j)) = source.col(static_cast<Eigen::Index>(idx[j]));
  }
  return out;
}

Eigen::MatrixXd one_hot_columns(std::span<const int> labels, std::span<const std::size_t> idx,
                                std::size_t n_classes) {
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_classes),
                                            static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) {
    y(labels[idx[j]], static_cast<Eigen::Index>(j)) = 1.0;
  }
  return y;
}

struct Evaluation {
  double loss;
  double accuracy;
};

Evaluation evaluate(const Network& net, const Eigen::MatrixXd& inputs,
                    const Eigen::MatrixXd& one_hot) {
  constexpr Eigen::Index kChunk = 512;
  double loss = 0.0;
  std::size_t correct = 0;
  const Eigen::Index n = inputs.cols();
  for (Eigen::Index start = 0; start < n; start += kChunk) {
    const Eigen::Index len = std::min(kChunk, n - start);
    const Eigen::MatrixXd probs = softmax_columns(forward_batch(net, inputs.middleCols(start, len)));
    const Eigen::MatrixXd y = one_hot.middleCols(start, len);
    for (Eigen::Index c = 0; c < len; ++c) {
      loss += column_loss(probs, y, c);
      Eigen::Index predicted = 0;
      Eigen::Index truth = 0;
      probs.col(c).maxCoeff(&predicted);
      y.col(c).maxCoeff(&truth);
      correct += predicted == truth;
    }
  }
  return {loss / static_cast<double>(n), static_cast<double>(correct) / static_cast<double>(n)};
}

}  // namespace

void NetworkConfig::validate() const {
  if (input_dim == 0 || output_dim == 0) {
    throw Error(ErrorKind::kConfig, "network: input and output dimensions must be >= 1");
  }
  for (auto h : hidden_dims) {
    if (h == 0) throw Error(ErrorKind::kConfig, "network: hidden layer widths must be >= 1");
  }
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  return n;
}

Network init_network(const NetworkConfig& config) {
  config.validate();
  Network net;
  net.config = config;
  std::mt19937_64 rng(config.init_seed);
  std::size_t fan_in = config.input_dim;
  auto add_layer = [&](std::size_t fan_out) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> uniform(-bound, bound);
    DenseLayer layer{Eigen::MatrixXd(fan_out, fan_in), Eigen::VectorXd::Zero(fan_out)};
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = uniform(rng);
    }
    net.layers.push_back(std::move(layer));
    fan_in = fan_out;
  };
  for (auto h : config.hidden_dims) add_layer(h);
  add_layer(config.output_dim);
  return net;
}

Gradients zero_gradients(const Network& net) { return {zeros_shaped(net)}; }

Eigen::VectorXd forward(const Network& net, const Eigen::VectorXd& x) {
  return forward_batch(net, x);
}

Eigen::MatrixXd forward_batch(const Network& net, const Eigen::MatrixXd& inputs) {
  check_input_rows(net, inputs.rows());
  const auto acts = hidden_activations(net, inputs);
  return affine(net.layers.back(), acts.empty() ? inputs : acts.back());
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const Eigen::ArrayXd e = (logits.array() - logits.maxCoeff()).exp();
  return (e / e.sum()).matrix();
}

Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) out.col(c) = softmax(logits.col(c));
  return out;
}

double cross_entropy_loss(const Eigen::VectorXd& probabilities, const Eigen::VectorXd& one_hot) {
  if (probabilities.size() != one_hot.size()) {
    throw Error(ErrorKind::kStructural, "cross entropy: size mismatch");
  }
  return column_loss(probabilities, one_hot, 0);
}

double sample_loss(const Network& net, const Eigen::VectorXd& x, const Eigen::VectorXd& one_hot) {
  return cross_entropy_loss(softmax(forward(net, x)), one_hot);
}

Gradients backward(const Network& net, const Eigen::VectorXd& x, const Eigen::VectorXd& one_hot) {
  Gradients g;
  backward_batch(net, x, one_hot, g);
  return g;
}

double backward_batch(const Network& net, const Eigen::MatrixXd& inputs,
                      const Eigen::MatrixXd& one_hot, Gradients& grads) {
  check_input_rows(net, inputs.rows());
  if (one_hot.rows() != static_cast<Eigen::Index>(net.output_dim()) ||
      one_hot.cols() != inputs.cols() || inputs.cols() == 0) {
    throw Error(ErrorKind::kStructural, "backward: label matrix does not match the batch");
  }
  if (grads.layers.size() != net.layers.size()) grads.layers = zeros_shaped(net);

  const auto acts = hidden_activations(net, inputs);
  const Eigen::MatrixXd probs =
      softmax_columns(affine(net.layers.back(), acts.empty() ? inputs : acts.back()));

  const double inv_batch = 1.0 / static_cast<double>(inputs.cols());
  double loss = 0.0;
  for (Eigen::Index c = 0; c < inputs.cols(); ++c) loss += column_loss(probs, one_hot, c);

  // d(mean loss)/d(logits) for softmax + cross-entropy.
  Eigen::MatrixXd delta = (probs - one_hot) * inv_batch;
  for (std::size_t l = net.layers.size(); l-- > 0;) {
    const Eigen::MatrixXd& in = l == 0 ? inputs : acts[l - 1];
    grads.layers[l].weights.noalias() = delta * in.transpose();
    grads.layers[l].bias = delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd upstream = net.layers[l].weights.transpose() * delta;
      delta = (acts[l - 1].array() > 0.0).select(upstream.array(), 0.0).matrix();
    }
  }
  return loss * inv_batch;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw Error(ErrorKind::kConfig, "train: learning_rate must be > 0");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw Error(ErrorKind::kConfig, "train: validation_fraction must lie in (0, 1)");
  }
  if (batch_size == 0) throw Error(ErrorKind::kConfig, "train: batch_size must be >= 1");
  if (max_epochs == 0) throw Error(ErrorKind::kConfig, "train: max_epochs must be >= 1");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw Error(ErrorKind::kConfig, "train: Adam betas must lie in [0, 1)");
  }
  if (!(adam_epsilon > 0.0)) throw Error(ErrorKind::kConfig, "train: adam_epsilon must be > 0");
}

AdamState make_adam_state(const Network& net) {
  return {zeros_shaped(net), zeros_shaped(net), 0};
}

void adam_step(Network& net, const Gradients& grads, AdamState& state, const TrainConfig& config) {
  if (grads.layers.size() != net.layers.size() ||
      state.first_moment.size() != net.layers.size()) {
    throw Error(ErrorKind::kStructural, "adam: state does not match the network");
  }
  ++state.step;
  const double b1 = config.adam_beta1;
  const double b2 = config.adam_beta2;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(b1, t);
  const double correction2 = 1.0 - std::pow(b2, t);
  const double lr = config.learning_rate;
  const double eps = config.adam_epsilon;

  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    m.array() = b1 * m.array() + (1.0 - b1) * g.array();
    v.array() = b2 * v.array() + (1.0 - b2) * g.array().square();
    param.array() -=
        lr * (m.array() / correction1) / ((v.array() / correction2).sqrt() + eps);
  };
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    update(net.layers[l].weights, grads.layers[l].weights, state.first_moment[l].weights,
           state.second_moment[l].weights);
    update(net.layers[l].bias, grads.layers[l].bias, state.first_moment[l].bias,
           state.second_moment[l].bias);
  }
}

DataSplit stratified_split(std::span<const int> labels, std::size_t n_classes,
                           double validation_fraction, std::uint64_t seed) {
  std::vector<std::vector<std::size_t>> by_class(n_classes);
  for (std::size_t k = 0; k < labels.size(); ++k) {
    if (labels[k] < 0 || static_cast<std::size_t>(labels[k]) >= n_classes) {
      throw Error(ErrorKind::kData, fmt::format("label {} out of range", labels[k]));
    }
    by_class[labels[k]].push_back(k);
  }
  const double n = static_cast<double>(labels.size());
  const auto n_val = static_cast<std::size_t>(std::llround(validation_fraction * n));

  // Largest-remainder apportionment of n_val across classes.
  std::vector<std::size_t> quota(n_classes);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    const double ideal = static_cast<double>(n_val) * static_cast<double>(by_class[c].size()) / n;
    quota[c] = static_cast<std::size_t>(std::floor(ideal));
    assigned += quota[c];
    remainders.emplace_back(-(ideal - std::floor(ideal)), c);
  }
  std::sort(remainders.begin(), remainders.end());
  for (std::size_t r = 0; assigned < n_val; ++r, ++assigned) ++quota[remainders[r].second];

  DataSplit split;
  std::mt19937_64 rng(seed);
  for (std::size_t c = 0; c < n_classes; ++c) {
    auto idx = by_class[c];
    std::shuffle(idx.begin(), idx.end(), rng);
    split.validation.insert(split.validation.end(), idx.begin(), idx.begin() + quota[c]);
    split.train.insert(split.train.end(), idx.begin() + quota[c], idx.end());
  }
  std::sort(split.validation.begin(), split.validation.end());
  std::sort(split.train.begin(), split.train.end());
  return split;
}

TrainResult train(Network net, const Eigen::MatrixXd& inputs, std::span<const int> labels,
                  const TrainConfig& config) {
  config.validate();
  check_input_rows(net, inputs.rows());
  if (static_cast<std::size_t>(inputs.cols()) != labels.size()) {
    throw Error(ErrorKind::kStructural, "train: input columns and labels differ in count");
  }
  if (labels.size() < 10) {
    throw Error(ErrorKind::kData, "train: at least 10 samples are required");
  }
  const std::size_t n_classes = net.output_dim();
  std::vector<std::size_t> class_counts(n_classes, 0);
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= n_classes) {
      throw Error(ErrorKind::kData, fmt::format("train: label {} out of range", y));
    }
    ++class_counts[y];
  }
  if (std::any_of(class_counts.begin(), class_counts.end(), [](auto c) { return c == 0; })) {
    throw Error(ErrorKind::kData, "train: every class must be present in the dataset");
  }

  const auto split = stratified_split(labels, n_classes, config.validation_fraction,
                                      derive_seed(config.shuffle_seed, "split"));
  const Eigen::MatrixXd val_inputs = gather_columns(inputs, split.validation);
  const Eigen::MatrixXd val_labels = one_hot_columns(labels, split.validation, n_classes);

  TrainResult result{net, {}};
  auto& report = result.report;
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  AdamState adam = make_adam_state(net);
  Gradients grads = zero_gradients(net);
  std::vector<std::size_t> order = split.train;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::mt19937_64 rng(derive_seed(config.shuffle_seed, epoch));
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t len = std::min(config.batch_size, order.size() - start);
      const std::span<const std::size_t> batch(order.data() + start, len);
      const double loss = backward_batch(net, gather_columns(inputs, batch),
                                         one_hot_columns(labels, batch, n_classes), grads);
      adam_step(net, grads, adam, config);
      loss_sum += loss * static_cast<double>(len);
    }
    const auto val = evaluate(net, val_inputs, val_labels);
    report.train_loss.push_back(loss_sum / static_cast<double>(order.size()));
    report.validation_loss.push_back(val.loss);
    report.validation_accuracy.push_back(val.accuracy);
    report.epochs = epoch;

    if (val.loss < best_loss) {
      best_loss = val.loss;
      result.network = net;
      report.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.early_stop_patience) {
      report.stopped_early = epoch < config.max_epochs;
      break;
    }
  }
  return result;
}

void save_model(const std::filesystem::path& path, const Network& net,
                const InputNormalization& normalization) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kData, fmt::format("cannot write model {}", path.string()));
  const auto& cfg = net.config;
  out.write(kModelMagic.data(), kModelMagic.size());
  detail::write_le(out, kModelFormatVersion);
  detail::write_le(out, static_cast<std::uint32_t>(cfg.input_dim));
  detail::write_le(out, static_cast<std::uint32_t>(cfg.output_dim));
  detail::write_le(out, static_cast<std::uint32_t>(cfg.hidden_dims.size()));
  for (auto h : cfg.hidden_dims) detail::write_le(out, static_cast<std::uint32_t>(h));
  detail::write_le(out, static_cast<std::uint8_t>(cfg.activation));
  detail::write_le(out, cfg.init_seed);
  detail::write_le(out, normalization.i_mean);
  detail::write_le(out, normalization.i_std);
  detail::write_le(out, normalization.q_mean);
  detail::write_le(out, normalization.q_std);
  for (const auto& layer : net.layers) {
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w = layer.weights;
    detail::write_doubles(out, std::span<const double>(w.data(), static_cast<std::size_t>(w.size())));
    detail::write_doubles(out, std::span<const double>(layer.bias.data(),
                                                       static_cast<std::size_t>(layer.bias.size())));
  }
  out.flush();
  if (!out) throw Error(ErrorKind::kData, fmt::format("write failed for {}", path.string()));
}

StoredModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  const std::string name = path.string();
  if (!in) throw Error(ErrorKind::kData, fmt::format("cannot open model {}", name));
  detail::expect_magic(in, kModelMagic, name);
  const auto version = detail::read_le<std::uint16_t>(in, "model version");
  if (version != kModelFormatVersion) {
    throw Error(ErrorKind::kData, fmt::format("{}: unsupported model version {}", name, version));
  }
  NetworkConfig cfg;
  cfg.input_dim = detail::read_le<std::uint32_t>(in, "input_dim");
  cfg.output_dim = detail::read_le<std::uint32_t>(in, "output_dim");
  const auto n_hidden = detail::read_le<std::uint32_t>(in, "hidden count");
  if (n_hidden > 64) throw Error(ErrorKind::kData, fmt::format("{}: implausible depth", name));
  cfg.hidden_dims.resize(n_hidden);
  for (auto& h : cfg.hidden_dims) h = detail::read_le<std::uint32_t>(in, "hidden dim");
  const auto activation = detail::read_le<std::uint8_t>(in, "activation");
  if (activation != static_cast<std::uint8_t>(Activation::kRelu)) {
    throw Error(ErrorKind::kData, fmt::format("{}: unknown activation {}", name, activation));
  }
  cfg.init_seed = detail::read_le<std::uint64_t>(in, "init_seed");
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::kData, fmt::format("{}: {}", name, e.what()));
  }

  StoredModel model;
  model.normalization.i_mean = detail::read_le<double>(in, "normalization");
  model.normalization.i_std = detail::read_le<double>(in, "normalization");
  model.normalization.q_mean = detail::read_le<double>(in, "normalization");
  model.normalization.q_std = detail::read_le<double>(in, "normalization");

  model.network.config = cfg;
  std::size_t fan_in = cfg.input_dim;
  auto read_layer = [&](std::size_t fan_out) {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w(fan_out, fan_in);
    detail::read_doubles(in, std::span<double>(w.data(), static_cast<std::size_t>(w.size())),
                         "weights");
    Eigen::VectorXd b(fan_out);
    detail::read_doubles(in, std::span<double>(b.data(), fan_out), "bias");
    model.network.layers.push_back({w, b});
    fan_in = fan_out;
  };
  for (auto h : cfg.hidden_dims) read_layer(h);
  read_layer(cfg.output_dim);
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorKind::kData, fmt::format("{}: trailing bytes after model", name));
  }
  return model;
}

}  // namespace qrt::nn
