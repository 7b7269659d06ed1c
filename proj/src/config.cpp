#include "qrt/config.hpp"

#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <toml.hpp>

#include "qrt/error.hpp"
#include "qrt/json_io.hpp"
#include "qrt/seeding.hpp"

namespace qrt::cli {

std::string_view to_string(Scale scale) { return scale == Scale::kCi ? "ci" : "paper"; }

Scale parse_scale(std::string_view name) {
  if (name == "ci") return Scale::kCi;
  if (name == "paper") return Scale::kPaper;
  throw Error(ErrorKind::kConfig, fmt::format("unknown scale '{}' (expected ci or paper)", name));
}

Seeds derive_seeds(std::uint64_t run_seed) {
  return {derive_seed(run_seed, "calibration"), derive_seed(run_seed, "train-set"),
          derive_seed(run_seed, "test-set"),    derive_seed(run_seed, "rabi"),
          derive_seed(run_seed, "sweep"),       derive_seed(run_seed, "fnn-init"),
          derive_seed(run_seed, "trmnn-init"),  derive_seed(run_seed, "shuffle")};
}

void RunConfig::validate() const {
  system.validate();
  readout.validate();
  rabi.validate();
  train.validate();
  if (noise_sigma) NoiseModel{*noise_sigma}.validate();
  if (!noise_sigma && !(target_fidelity > 0.5 && target_fidelity < 1.0)) {
    throw Error(ErrorKind::kConfig,
                fmt::format("noise.target_fidelity must be in (0.5, 1), got {}", target_fidelity));
  }
  if (calibration_shots < 2000) {
    throw Error(ErrorKind::kConfig, "noise.calibration_shots must be at least 2000");
  }
  if (train_shots_per_state < 5 || test_shots_per_state < 1) {
    throw Error(ErrorKind::kConfig, "dataset sizes too small");
  }
  for (auto m : m_values) {
    if (m == 0 || m > rabi.shots_per_step) {
      throw Error(ErrorKind::kConfig, fmt::format("rabi.m_values: {} is outside [1, {}]", m,
                                                  rabi.shots_per_step));
    }
  }
  if (hidden_dims.empty()) throw Error(ErrorKind::kConfig, "network.hidden must not be empty");
  for (auto h : hidden_dims) {
    if (h == 0) throw Error(ErrorKind::kConfig, "network.hidden: layer widths must be positive");
  }
  if (backends.empty()) throw Error(ErrorKind::kConfig, "backends must not be empty");
  for (double p : sweep_p) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw Error(ErrorKind::kConfig, fmt::format("sweep.p_values: {} is outside [0, 1]", p));
    }
  }
  if (sweep_shots == 0) throw Error(ErrorKind::kConfig, "sweep.shots_per_point must be positive");
  if (qubit_id.empty() ||
      qubit_id.find_first_not_of("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-") !=
          std::string::npos) {
    throw Error(ErrorKind::kConfig, fmt::format("invalid qubit_id '{}'", qubit_id));
  }
}

nn::NetworkConfig RunConfig::topology(std::uint64_t init_seed) const {
  nn::NetworkConfig t;
  t.input_dim = 2 * static_cast<std::size_t>(readout.n_samples);
  t.hidden_dims = hidden_dims;
  t.output_dim = 2;
  t.init_seed = init_seed;
  return t;
}

experiments::BackendTrainingOptions RunConfig::training_options() const {
  experiments::BackendTrainingOptions o;
  o.topology = topology(0);
  o.train = train;
  o.train.shuffle_seed = seeds.shuffle;
  o.fnn_init_seed = seeds.fnn_init;
  o.trmnn_init_seed = seeds.trmnn_init;
  o.qubit_id = qubit_id;
  return o;
}

RunConfig preset(Scale scale) {
  RunConfig c;
  c.scale = scale;
  if (scale == Scale::kCi) {
    c.readout.n_samples = 256;
    c.readout.omega_if_mhz = 62.5;
    c.train_shots_per_state = 1000;
    c.test_shots_per_state = 1000;
    c.hidden_dims = {128, 64, 16};
    c.output_dir = "qrt_out_ci";
  }
  return c;
}

void override_seed(RunConfig& config, std::uint64_t seed) {
  config.seed = seed;
  config.seeds = derive_seeds(seed);
}

namespace {

// Reads one TOML table, remembers which keys were consumed and rejects the
// rest.
class TableReader {
 public:
  TableReader(const toml::table& table, std::string prefix, std::string_view source)
      : table_(table), prefix_(std::move(prefix)), source_(source) {}

  [[noreturn]] void fail(const toml::node& node, const std::string& key,
                         std::string_view what) const {
    throw Error(ErrorKind::kConfig, fmt::format("{}:{}: {}: {}", source_,
                                                node.source().begin.line, key, what));
  }

  std::string qualified(std::string_view key) const {
    return prefix_.empty() ? std::string(key) : prefix_ + "." + std::string(key);
  }

  const toml::node* find(std::string_view key) {
    seen_.insert(std::string(key));
    return table_.get(key);
  }

  void read(std::string_view key, double& out) {
    if (const auto* n = find(key)) out = as_double(*n, qualified(key));
  }

  void read(std::string_view key, std::optional<double>& out) {
    if (const auto* n = find(key)) out = as_double(*n, qualified(key));
  }

  template <typename U>
    requires std::is_unsigned_v<U>
  void read(std::string_view key, U& out) {
    if (const auto* n = find(key)) out = as_unsigned<U>(*n, qualified(key));
  }

  void read(std::string_view key, std::string& out) {
    if (const auto* n = find(key)) {
      const auto* s = n->as_string();
      if (!s) fail(*n, qualified(key), "expected a string");
      out = s->get();
    }
  }

  template <typename T>
  void read(std::string_view key, std::vector<T>& out) {
    const auto* n = find(key);
    if (!n) return;
    const auto* arr = n->as_array();
    if (!arr) fail(*n, qualified(key), "expected an array");
    std::vector<T> values;
    for (const auto& el : *arr) {
      if constexpr (std::is_same_v<T, double>) {
        values.push_back(as_double(el, qualified(key)));
      } else if constexpr (std::is_same_v<T, std::string>) {
        const auto* s = el.as_string();
        if (!s) fail(el, qualified(key), "expected an array of strings");
        values.push_back(s->get());
      } else {
        values.push_back(as_unsigned<T>(el, qualified(key)));
      }
    }
    out = std::move(values);
  }

  /// Nested table, or nullptr when absent.
  const toml::table* table(std::string_view key) {
    const auto* n = find(key);
    if (!n) return nullptr;
    const auto* t = n->as_table();
    if (!t) fail(*n, qualified(key), "expected a table");
    return t;
  }

  void finish() const {
    for (const auto& [k, v] : table_) {
      if (!seen_.count(std::string(k.str()))) {
        throw Error(ErrorKind::kConfig, fmt::format("{}:{}: unknown key '{}'", source_,
                                                    k.source().begin.line, qualified(k.str())));
      }
    }
  }

 private:
  double as_double(const toml::node& n, const std::string& key) const {
    if (const auto* f = n.as_floating_point()) return f->get();
    if (const auto* i = n.as_integer()) return static_cast<double>(i->get());
    fail(n, key, "expected a number");
  }

  template <typename U>
  U as_unsigned(const toml::node& n, const std::string& key) const {
    const auto* i = n.as_integer();
    if (!i) fail(n, key, "expected an integer");
    const std::int64_t v = i->get();
    if (v < 0 || static_cast<std::uint64_t>(v) > std::numeric_limits<U>::max()) {
      fail(n, key, fmt::format("{} is out of range", v));
    }
    return static_cast<U>(v);
  }

  const toml::table& table_;
  std::string prefix_;
  std::string_view source_;
  std::set<std::string> seen_;
};

}  // namespace

RunConfig parse_config(std::string_view text, std::string_view source_name,
                       std::optional<Scale> default_scale) {
  toml::table root;
  try {
    root = toml::parse(text, source_name);
  } catch (const toml::parse_error& e) {
    throw Error(ErrorKind::kConfig, fmt::format("{}:{}:{}: {}", source_name,
                                                e.source().begin.line, e.source().begin.column,
                                                e.description()));
  }

  TableReader top(root, "", source_name);
  std::string scale_name(to_string(default_scale.value_or(Scale::kPaper)));
  top.read("scale", scale_name);
  RunConfig c;
  try {
    c = preset(parse_scale(scale_name));
  } catch (const Error& e) {
    throw Error(ErrorKind::kConfig, fmt::format("{}: scale: {}", source_name, e.what()));
  }

  std::string output_dir = c.output_dir.string();
  top.read("output_dir", output_dir);
  c.output_dir = output_dir;
  top.read("seed", c.seed);
  c.seeds = derive_seeds(c.seed);
  top.read("qubit_id", c.qubit_id);

  std::vector<std::string> backend_names;
  top.read("backends", backend_names);
  if (const auto* n = root.get("backends")) {
    c.backends.clear();
    for (const auto& name : backend_names) {
      try {
        c.backends.push_back(experiments::parse_backend(name));
      } catch (const Error& e) {
        top.fail(*n, "backends", e.what());
      }
    }
  }

  if (const auto* t = top.table("system")) {
    TableReader r(*t, "system", source_name);
    r.read("omega_r_ghz", c.system.omega_r_ghz);
    r.read("omega_q_ghz", c.system.omega_q_ghz);
    r.read("g_mhz", c.system.g_mhz);
    r.read("kappa_mhz", c.system.kappa_mhz);
    r.read("t1_us", c.system.t1_us);
    r.read("t2_us", c.system.t2_us);
    r.finish();
  }
  if (const auto* t = top.table("readout")) {
    TableReader r(*t, "readout", source_name);
    r.read("omega_ro_ghz", c.readout.omega_ro_ghz);
    r.read("omega_if_mhz", c.readout.omega_if_mhz);
    r.read("sample_rate_hz", c.readout.sample_rate_hz);
    r.read("n_samples", c.readout.n_samples);
    r.read("s0", c.readout.s0);
    r.read("l0", c.readout.l0);
    r.read("theta_lo", c.readout.theta_lo);
    r.finish();
  }
  if (const auto* t = top.table("noise")) {
    TableReader r(*t, "noise", source_name);
    r.read("sigma", c.noise_sigma);
    r.read("target_fidelity", c.target_fidelity);
    r.read("calibration_shots", c.calibration_shots);
    r.finish();
  }
  if (const auto* t = top.table("dataset")) {
    TableReader r(*t, "dataset", source_name);
    r.read("train_shots_per_state", c.train_shots_per_state);
    r.read("test_shots_per_state", c.test_shots_per_state);
    r.finish();
  }
  if (const auto* t = top.table("rabi")) {
    TableReader r(*t, "rabi", source_name);
    r.read("n_steps", c.rabi.n_steps);
    r.read("t_total_ns", c.rabi.t_total_ns);
    r.read("omega_rabi", c.rabi.omega_rabi);
    r.read("envelope_t2_ns", c.rabi.envelope_t2_ns);
    r.read("traces", c.rabi.shots_per_step);
    r.read("m_values", c.m_values);
    r.finish();
  }
  if (const auto* t = top.table("network")) {
    TableReader r(*t, "network", source_name);
    r.read("hidden", c.hidden_dims);
    r.finish();
  }
  if (const auto* t = top.table("train")) {
    TableReader r(*t, "train", source_name);
    r.read("learning_rate", c.train.learning_rate);
    r.read("beta1", c.train.adam_beta1);
    r.read("beta2", c.train.adam_beta2);
    r.read("epsilon", c.train.adam_epsilon);
    r.read("batch_size", c.train.batch_size);
    r.read("max_epochs", c.train.max_epochs);
    r.read("validation_fraction", c.train.validation_fraction);
    r.read("patience", c.train.early_stop_patience);
    r.finish();
  }
  if (const auto* t = top.table("sweep")) {
    TableReader r(*t, "sweep", source_name);
    r.read("p_values", c.sweep_p);
    r.read("shots_per_point", c.sweep_shots);
    r.finish();
  }
  if (const auto* t = top.table("seeds")) {
    TableReader r(*t, "seeds", source_name);
    r.read("calibration", c.seeds.calibration);
    r.read("train_set", c.seeds.train_set);
    r.read("test_set", c.seeds.test_set);
    r.read("rabi", c.seeds.rabi);
    r.read("sweep", c.seeds.sweep);
    r.read("fnn_init", c.seeds.fnn_init);
    r.read("trmnn_init", c.seeds.trmnn_init);
    r.read("shuffle", c.seeds.shuffle);
    r.finish();
  }
  top.finish();

  try {
    c.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::kConfig, fmt::format("{}: {}", source_name, e.what()));
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path, std::optional<Scale> default_scale) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kConfig, fmt::format("cannot read config {}", path.string()));
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.string(), default_scale);
}

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json backends = nlohmann::json::array();
  for (auto b : c.backends) backends.push_back(experiments::to_string(b));
  nlohmann::json sweep_p = nlohmann::json::array();
  for (double p : c.sweep_p) sweep_p.push_back(round_sig12(p));
  return {
      {"scale", to_string(c.scale)},
      {"system", c.system},
      {"readout", c.readout},
      {"noise",
       {{"sigma", c.noise_sigma ? nlohmann::json(round_sig12(*c.noise_sigma)) : nlohmann::json()},
        {"target_fidelity", round_sig12(c.target_fidelity)},
        {"calibration_shots", c.calibration_shots}}},
      {"dataset",
       {{"train_shots_per_state", c.train_shots_per_state},
        {"test_shots_per_state", c.test_shots_per_state}}},
      {"rabi", c.rabi},
      {"m_values", c.m_values},
      {"network", {{"hidden", c.hidden_dims}}},
      {"train",
       {{"learning_rate", c.train.learning_rate},
        {"beta1", c.train.adam_beta1},
        {"beta2", c.train.adam_beta2},
        {"epsilon", c.train.adam_epsilon},
        {"batch_size", c.train.batch_size},
        {"max_epochs", c.train.max_epochs},
        {"validation_fraction", c.train.validation_fraction},
        {"patience", c.train.early_stop_patience}}},
      {"backends", backends},
      {"qubit_id", c.qubit_id},
      {"sweep", {{"p_values", sweep_p}, {"shots_per_point", c.sweep_shots}}},
      {"seed", c.seed},
      {"seeds",
       {{"calibration", c.seeds.calibration},
        {"train_set", c.seeds.train_set},
        {"test_set", c.seeds.test_set},
        {"rabi", c.seeds.rabi},
        {"sweep", c.seeds.sweep},
        {"fnn_init", c.seeds.fnn_init},
        {"trmnn_init", c.seeds.trmnn_init},
        {"shuffle", c.seeds.shuffle}}},
  };
}

}  // namespace qrt::cli
