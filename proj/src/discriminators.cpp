#include "qrt/discriminators.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <regex>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "qrt/error.hpp"

namespace qrt {

namespace {

constexpr Eigen::Index kInferenceChunk = 512;

void check_length(const nn::Network& net, const Waveform& w) {
  if (w.i_samples.size() != w.q_samples.size() || 2 * w.size() != net.input_dim()) {
    throw Error(ErrorKind::kStructural,
                fmt::format("waveform has {}/{} samples but the network expects {} per quadrature",
                            w.i_samples.size(), w.q_samples.size(), net.input_dim() / 2));
  }
}

// Logits (output_dim x count) for waveforms addressed by get(k).
template <typename Get>
Eigen::MatrixXd batch_logits(const nn::Network& net, const nn::InputNormalization& norm,
                             std::size_t count, Get&& get) {
  const auto dim = static_cast<Eigen::Index>(net.input_dim());
  Eigen::MatrixXd logits(static_cast<Eigen::Index>(net.output_dim()),
                         static_cast<Eigen::Index>(count));
  for (Eigen::Index start = 0; start < static_cast<Eigen::Index>(count); start += kInferenceChunk) {
    const Eigen::Index len = std::min(kInferenceChunk, static_cast<Eigen::Index>(count) - start);
    Eigen::MatrixXd inputs(dim, len);
    for (Eigen::Index c = 0; c < len; ++c) {
      const Waveform& w = get(static_cast<std::size_t>(start + c));
      check_length(net, w);
      encode_waveform(w, norm, inputs.col(c));
    }
    logits.middleCols(start, len) = nn::forward_batch(net, inputs);
  }
  return logits;
}

auto record_getter(std::span<const ShotRecord> shots) {
  return [shots](std::size_t k) -> const Waveform& { return shots[k].waveform; };
}

auto waveform_getter(std::span<const Waveform> shots) {
  return [shots](std::size_t k) -> const Waveform& { return shots[k]; };
}

std::vector<double> excited_softmax(const Eigen::MatrixXd& logits) {
  std::vector<double> p(static_cast<std::size_t>(logits.cols()));
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    p[static_cast<std::size_t>(c)] = nn::softmax(logits.col(c))(1);
  }
  return p;
}

std::vector<SimilarityPair> to_pairs(const Eigen::MatrixXd& logits) {
  std::vector<SimilarityPair> pairs(static_cast<std::size_t>(logits.cols()));
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    pairs[static_cast<std::size_t>(c)] = {logits(0, c), logits(1, c)};
  }
  return pairs;
}

struct PreparedData {
  Eigen::MatrixXd inputs;
  std::vector<int> labels;
  nn::InputNormalization normalization;
  std::vector<std::string> warnings;
};

PreparedData prepare(std::span<const ShotRecord> dataset) {
  if (dataset.empty()) throw Error(ErrorKind::kData, "training set is empty");
  PreparedData data;
  std::size_t excited = 0;
  for (std::size_t k = 0; k < dataset.size(); ++k) {
    if (!dataset[k].label) {
      throw Error(ErrorKind::kData,
                  fmt::format("training record {} carries no Ground/Excited label", k));
    }
    excited += *dataset[k].label == Eigenstate::kExcited;
  }
  const std::size_t ground = dataset.size() - excited;
  if (excited == 0 || ground == 0) {
    throw Error(ErrorKind::kData, "training set holds a single class; both states are required");
  }
  const double minority =
      static_cast<double>(std::min(excited, ground)) / static_cast<double>(dataset.size());
  if (minority < 0.4) {
    data.warnings.push_back(fmt::format(
        "training set is unbalanced ({} ground / {} excited)", ground, excited));
    spdlog::warn(data.warnings.back());
  }

  data.normalization = compute_normalization(dataset);
  const std::size_t n = dataset.front().waveform.size();
  data.inputs.resize(static_cast<Eigen::Index>(2 * n), static_cast<Eigen::Index>(dataset.size()));
  data.labels.resize(dataset.size());
  for (std::size_t k = 0; k < dataset.size(); ++k) {
    const auto& w = dataset[k].waveform;
    if (w.i_samples.size() != n || w.q_samples.size() != n) {
      throw Error(ErrorKind::kStructural,
                  fmt::format("training record {} has a different waveform length", k));
    }
    encode_waveform(w, data.normalization, data.inputs.col(static_cast<Eigen::Index>(k)));
    data.labels[k] = static_cast<int>(*dataset[k].label);
  }
  return data;
}

nn::TrainResult fit(const PreparedData& data, nn::NetworkConfig topology,
                    const nn::TrainConfig& train) {
  topology.input_dim = static_cast<std::size_t>(data.inputs.rows());
  topology.output_dim = 2;
  return nn::train(nn::init_network(topology), data.inputs, data.labels, train);
}

}  // namespace

bool ModuleRegistry::register_module(TrmnnModule module) {
  const std::string id = module.qubit_id;
  const bool replaced = modules_.erase(id) > 0;
  modules_.emplace(id, std::move(module));
  return replaced;
}

const TrmnnModule& ModuleRegistry::at(const std::string& qubit_id) const {
  const auto it = modules_.find(qubit_id);
  if (it == modules_.end()) {
    throw Error(ErrorKind::kData, fmt::format("no module registered for qubit '{}'", qubit_id));
  }
  return it->second;
}

TrmnnModule& ModuleRegistry::at(const std::string& qubit_id) {
  return const_cast<TrmnnModule&>(std::as_const(*this).at(qubit_id));
}

std::vector<std::string> ModuleRegistry::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : modules_) out.push_back(id);
  return out;
}

nn::InputNormalization compute_normalization(std::span<const ShotRecord> records) {
  double si = 0.0, sq = 0.0, si2 = 0.0, sq2 = 0.0;
  std::size_t n = 0;
  for (const auto& r : records) {
    for (double v : r.waveform.i_samples) {
      si += v;
      si2 += v * v;
    }
    for (double v : r.waveform.q_samples) {
      sq += v;
      sq2 += v * v;
    }
    n += r.waveform.size();
  }
  if (n == 0) return {};
  const double dn = static_cast<double>(n);
  auto stddev = [dn](double s, double s2) {
    const double var = std::max(0.0, s2 / dn - (s / dn) * (s / dn));
    return var > 0.0 ? std::sqrt(var) : 1.0;
  };
  return {si / dn, stddev(si, si2), sq / dn, stddev(sq, sq2)};
}

void encode_waveform(const Waveform& w, const nn::InputNormalization& norm,
                     Eigen::Ref<Eigen::VectorXd> out) {
  const auto n = static_cast<Eigen::Index>(w.size());
  if (out.size() != 2 * n || w.q_samples.size() != w.i_samples.size()) {
    throw Error(ErrorKind::kStructural, "encode: waveform does not match the input layout");
  }
  const double inv_i = 1.0 / norm.i_std;
  const double inv_q = 1.0 / norm.q_std;
  for (Eigen::Index k = 0; k < n; ++k) {
    out(k) = (w.i_samples[static_cast<std::size_t>(k)] - norm.i_mean) * inv_i;
    out(n + k) = (w.q_samples[static_cast<std::size_t>(k)] - norm.q_mean) * inv_q;
  }
}

FnnTraining train_fnn(std::span<const ShotRecord> dataset, nn::NetworkConfig topology,
                      const nn::TrainConfig& train) {
  auto data = prepare(dataset);
  auto trained = fit(data, std::move(topology), train);
  FnnTraining out;
  out.model = {std::move(trained.network), data.normalization};
  out.report = std::move(trained.report);
  out.warnings = std::move(data.warnings);
  return out;
}

double fnn_infer_shot(const FnnModel& model, const Waveform& w) {
  return fnn_probabilities(model, std::span<const Waveform>(&w, 1)).front();
}

TrmnnTraining train_trmnn(ModuleRegistry& registry, const std::string& qubit_id,
                          std::span<const ShotRecord> dataset, nn::NetworkConfig topology,
                          const nn::TrainConfig& train) {
  static const std::regex kIdPattern("[A-Za-z0-9_-]+");
  if (!std::regex_match(qubit_id, kIdPattern)) {
    throw Error(ErrorKind::kConfig,
                fmt::format("qubit id '{}' must match [A-Za-z0-9_-]+", qubit_id));
  }
  auto data = prepare(dataset);
  auto trained = fit(data, std::move(topology), train);
  TrmnnTraining out;
  out.report = std::move(trained.report);
  out.warnings = std::move(data.warnings);
  out.replaced = registry.register_module(
      TrmnnModule{qubit_id, std::move(trained.network), data.normalization, {}});
  if (out.replaced) {
    out.warnings.push_back(fmt::format("replaced existing module for qubit '{}'", qubit_id));
    spdlog::warn(out.warnings.back());
  }
  return out;
}

SimilarityPair trmnn_similarity(const TrmnnModule& module, const Waveform& w) {
  return trmnn_similarities(module, std::span<const Waveform>(&w, 1)).front();
}

double probability_estimate(const SimilarityPair& pair) {
  const double g = std::max(pair.ground, 0.0);
  const double e = std::max(pair.excited, 0.0);
  const double total = g + e;
  if (total == 0.0) return 0.5;
  return e / total;
}

std::vector<double> fnn_probabilities(const FnnModel& model, std::span<const ShotRecord> shots) {
  return excited_softmax(
      batch_logits(model.network, model.normalization, shots.size(), record_getter(shots)));
}

std::vector<double> fnn_probabilities(const FnnModel& model, std::span<const Waveform> shots) {
  return excited_softmax(
      batch_logits(model.network, model.normalization, shots.size(), waveform_getter(shots)));
}

std::vector<SimilarityPair> trmnn_similarities(const TrmnnModule& module,
                                               std::span<const ShotRecord> shots) {
  return to_pairs(
      batch_logits(module.network, module.normalization, shots.size(), record_getter(shots)));
}

std::vector<SimilarityPair> trmnn_similarities(const TrmnnModule& module,
                                               std::span<const Waveform> shots) {
  return to_pairs(
      batch_logits(module.network, module.normalization, shots.size(), waveform_getter(shots)));
}

std::vector<double> trmnn_probabilities(const TrmnnModule& module,
                                        std::span<const ShotRecord> shots) {
  const auto pairs = trmnn_similarities(module, shots);
  std::vector<double> p(pairs.size());
  std::transform(pairs.begin(), pairs.end(), p.begin(), probability_estimate);
  return p;
}

PopulationEstimate infer_batch(const FnnModel& model, std::span<const Waveform> shots) {
  if (shots.empty()) throw Error(ErrorKind::kData, "infer_batch: no shots");
  return summarize(fnn_probabilities(model, shots));
}

PopulationEstimate infer_batch(const TrmnnModule& module, std::span<const Waveform> shots) {
  if (shots.empty()) throw Error(ErrorKind::kData, "infer_batch: no shots");
  const auto pairs = trmnn_similarities(module, shots);
  std::vector<double> p(pairs.size());
  std::transform(pairs.begin(), pairs.end(), p.begin(), probability_estimate);
  return summarize(p);
}

void save_registry(const std::filesystem::path& manifest, const ModuleRegistry& registry) {
  const auto dir = manifest.parent_path();
  nlohmann::json modules = nlohmann::json::object();
  for (const auto& id : registry.ids()) {
    const auto& module = registry.at(id);
    const std::string file = fmt::format("trmnn_{}.qrtm", id);
    nn::save_model(dir / file, module.network, module.normalization);
    modules[id] = {{"model", file}, {"dataset_sha256", module.dataset_hash}};
  }
  std::ofstream out(manifest, std::ios::trunc);
  if (!out) throw Error(ErrorKind::kData, fmt::format("cannot write {}", manifest.string()));
  out << nlohmann::json{{"modules", modules}}.dump(2) << '\n';
}

ModuleRegistry load_registry(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw Error(ErrorKind::kData, fmt::format("cannot open {}", manifest.string()));
  ModuleRegistry registry;
  try {
    const auto j = nlohmann::json::parse(in);
    for (const auto& [id, entry] : j.at("modules").items()) {
      auto stored = nn::load_model(manifest.parent_path() / entry.at("model").get<std::string>());
      registry.register_module(TrmnnModule{id, std::move(stored.network), stored.normalization,
                                           entry.at("dataset_sha256").get<std::string>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kData, fmt::format("{}: {}", manifest.string(), e.what()));
  }
  return registry;
}

}  // namespace qrt
