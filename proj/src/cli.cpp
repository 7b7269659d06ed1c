#include "qrt/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "qrt/config.hpp"
#include "qrt/dataset_io.hpp"
#include "qrt/demodulation.hpp"
#include "qrt/discriminators.hpp"
#include "qrt/experiments.hpp"
#include "qrt/json_io.hpp"
#include "qrt/noise_calibration.hpp"
#include "qrt/raw_readout.hpp"

namespace qrt::cli {

namespace fs = std::filesystem;
using experiments::Backend;
using nlohmann::json;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
      return kExitUsage;
    case ErrorKind::kData:
    case ErrorKind::kStructural:
      return kExitData;
    case ErrorKind::kNumerical:
      return kExitNumerical;
  }
  return kExitData;
}

namespace {

// File names inside an output directory.
constexpr const char* kTrainFile = "train.qrtd";
constexpr const char* kTestFile = "test.qrtd";
constexpr const char* kRabiFile = "rabi.qrtd";
constexpr const char* kManifestFile = "manifest.json";
constexpr const char* kNoiseFile = "noise.json";
constexpr const char* kRawFile = "raw.json";
constexpr const char* kFnnFile = "fnn.qrtm";
constexpr const char* kRegistryFile = "registry.json";
constexpr const char* kAssignmentFile = "assignment.json";
constexpr const char* kRabiFidelityFile = "rabi_fidelity.json";
constexpr const char* kRabiCurvesFile = "rabi_curves.csv";
constexpr const char* kVarianceFile = "variance.json";
constexpr const char* kSweepFile = "sweep.json";
constexpr const char* kReportFile = "report.md";

struct CommonOptions {
  std::string config_path;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::vector<std::string> backends;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("-c,--config", o.config_path, "TOML run configuration");
  cmd->add_option("--preset", o.preset, "Scale preset when no config sets one")
      ->check(CLI::IsMember({"ci", "paper"}));
  cmd->add_option("--seed", o.seed, "Run seed; re-derives every nested seed");
  cmd->add_option("-o,--out", o.out_dir, "Output directory");
}

void add_backends(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("-b,--backend", o.backends, "raw, fnn or trmnn (repeatable)");
}

RunConfig resolve(const CommonOptions& o) {
  std::optional<Scale> scale;
  if (!o.preset.empty()) scale = parse_scale(o.preset);
  RunConfig c = o.config_path.empty() ? preset(scale.value_or(Scale::kPaper))
                                      : load_config(o.config_path, scale);
  if (o.seed) override_seed(c, *o.seed);
  if (!o.out_dir.empty()) c.output_dir = o.out_dir;
  if (!o.backends.empty()) {
    c.backends.clear();
    for (const auto& name : o.backends) {
      const auto b = experiments::parse_backend(name);
      if (std::find(c.backends.begin(), c.backends.end(), b) == c.backends.end()) {
        c.backends.push_back(b);
      }
    }
  }
  c.validate();
  return c;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw Error(ErrorKind::kData, fmt::format("cannot create {}: {}", dir.string(), ec.message()));
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::kData, fmt::format("cannot write {}", path.string()));
  out << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kData, fmt::format("cannot read {}", path.string()));
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kData, fmt::format("{}: {}", path.string(), e.what()));
  }
}

fs::path input_path(const std::string& given, const RunConfig& c, const char* default_name) {
  return given.empty() ? c.output_dir / default_name : fs::path(given);
}

json sig12(double v) { return std::isfinite(v) ? json(round_sig12(v)) : json(); }

// ---------------------------------------------------------------------------
// Noise

struct NoiseChoice {
  NoiseModel noise;
  json record;
};

NoiseChoice resolve_noise(const RunConfig& c) {
  if (c.noise_sigma) {
    return {NoiseModel{*c.noise_sigma}, {{"sigma", round_sig12(*c.noise_sigma)}, {"source", "config"}}};
  }
  spdlog::info("calibrating noise to raw F_A = {} ({} shots per state)", c.target_fidelity,
               c.calibration_shots);
  const auto cal = calibrate_noise_to_fidelity(c.target_fidelity, c.system, c.readout,
                                               c.seeds.calibration, c.calibration_shots);
  spdlog::info("sigma = {:.6g}, measured F_A = {:.4f}", cal.noise.sigma, cal.measured_fidelity);
  // The exact sigma is kept so datasets synthesized later agree with the
  // calibration run; the rounded copy is for readers.
  return {cal.noise,
          {{"sigma", cal.noise.sigma},
           {"source", "calibration"},
           {"target_fidelity", round_sig12(c.target_fidelity)},
           {"measured_fidelity", round_sig12(cal.measured_fidelity)},
           {"shots_per_state", cal.shots_per_state},
           {"iterations", cal.iterations}}};
}

// ---------------------------------------------------------------------------
// Datasets

DatasetMetadata metadata(const RunConfig& c, const NoiseModel& noise, std::string kind,
                         std::uint64_t seed) {
  DatasetMetadata m;
  m.kind = std::move(kind);
  m.system = c.system;
  m.readout = c.readout;
  m.noise = noise;
  m.base_seed = seed;
  if (m.kind == "rabi") m.rabi = c.rabi;
  return m;
}

json file_entry(const fs::path& path, std::size_t records) {
  return {{"sha256", sha256_file(path)}, {"records", records}};
}

json synth(const RunConfig& c) {
  ensure_dir(c.output_dir);
  const auto noise = resolve_noise(c);
  write_json(c.output_dir / kNoiseFile, noise.record);

  json files = json::object();
  auto labelled = [&](const char* name, const char* kind, std::size_t per_state,
                      std::uint64_t seed) {
    const auto path = c.output_dir / name;
    spdlog::info("writing {} ({} shots per state)", path.string(), per_state);
    Dataset ds{c.readout.n_samples,
               experiments::labelled_dataset(per_state, c.system, c.readout, noise.noise, seed)};
    write_dataset(path, ds);
    write_metadata(path, metadata(c, noise.noise, kind, seed));
    files[name] = file_entry(path, ds.records.size());
  };
  labelled(kTrainFile, "train", c.train_shots_per_state, c.seeds.train_set);
  labelled(kTestFile, "test", c.test_shots_per_state, c.seeds.test_set);

  const auto rabi_path = c.output_dir / kRabiFile;
  const std::uint64_t rabi_count =
      static_cast<std::uint64_t>(c.rabi.n_steps) * c.rabi.shots_per_step;
  spdlog::info("writing {} ({} steps x {} traces)", rabi_path.string(), c.rabi.n_steps,
               c.rabi.shots_per_step);
  DatasetWriter writer(rabi_path, c.readout.n_samples, rabi_count);
  for (std::uint32_t step = 0; step < c.rabi.n_steps; ++step) {
    for (const auto& r :
         synthesize_rabi_step(c.rabi, step, c.system, c.readout, noise.noise, c.seeds.rabi)) {
      writer.append(r);
    }
  }
  writer.close();
  write_metadata(rabi_path, metadata(c, noise.noise, "rabi", c.seeds.rabi));
  files[kRabiFile] = file_entry(rabi_path, rabi_count);

  json manifest = {{"config", to_json(c)}, {"noise", noise.record}, {"files", files}};
  write_json(c.output_dir / kManifestFile, manifest);
  return manifest;
}

struct LoadedDataset {
  Dataset data;
  DatasetMetadata meta;
};

LoadedDataset load_dataset(const fs::path& path) {
  LoadedDataset d{read_dataset(path), read_metadata(path)};
  if (d.meta.readout.n_samples != d.data.n_samples) {
    throw Error(ErrorKind::kData,
                fmt::format("{}: metadata says {} samples per quadrature, file has {}",
                            path.string(), d.meta.readout.n_samples, d.data.n_samples));
  }
  return d;
}

// ---------------------------------------------------------------------------
// Models

json report_json(Backend backend, const nn::TrainReport& r, const std::vector<std::string>& warnings,
                 const std::string& dataset_hash) {
  auto rounded = [](const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(sig12(x));
    return a;
  };
  return {{"backend", experiments::to_string(backend)},
          {"dataset_sha256", dataset_hash},
          {"epochs", r.epochs},
          {"best_epoch", r.best_epoch},
          {"stopped_early", r.stopped_early},
          {"train_loss", rounded(r.train_loss)},
          {"validation_loss", rounded(r.validation_loss)},
          {"validation_accuracy", rounded(r.validation_accuracy)},
          {"warnings", warnings}};
}

void train(const RunConfig& c, const fs::path& dataset_path) {
  ensure_dir(c.output_dir);
  const auto ds = load_dataset(dataset_path);
  const auto hash = sha256_file(dataset_path);
  auto options = c.training_options();
  std::span<const ShotRecord> records(ds.data.records);

  for (auto b : c.backends) {
    spdlog::info("training {} on {} ({} shots)", experiments::to_string(b), dataset_path.string(),
                 records.size());
    switch (b) {
      case Backend::kRaw: {
        const std::array<Backend, 1> only{Backend::kRaw};
        const auto trained = experiments::train_backends(records, ds.meta.readout, only, options);
        write_json(c.output_dir / kRawFile, {{"readout", ds.meta.readout},
                                             {"dataset_sha256", hash},
                                             {"discriminant", *trained.raw}});
        break;
      }
      case Backend::kFnn: {
        auto topo = options.topology;
        topo.init_seed = options.fnn_init_seed;
        auto result = train_fnn(records, topo, options.train);
        nn::save_model(c.output_dir / kFnnFile, result.model.network, result.model.normalization);
        write_json(c.output_dir / "train_report_fnn.json",
                   report_json(b, result.report, result.warnings, hash));
        break;
      }
      case Backend::kTrmnn: {
        const auto manifest = c.output_dir / kRegistryFile;
        ModuleRegistry registry =
            fs::exists(manifest) ? load_registry(manifest) : ModuleRegistry{};
        auto topo = options.topology;
        topo.init_seed = options.trmnn_init_seed;
        auto result = train_trmnn(registry, c.qubit_id, records, topo, options.train);
        registry.at(c.qubit_id).dataset_hash = hash;
        save_registry(manifest, registry);
        write_json(c.output_dir / fmt::format("train_report_trmnn_{}.json", c.qubit_id),
                   report_json(b, result.report, result.warnings, hash));
        break;
      }
    }
  }
}

experiments::TrainedBackends load_backends(const RunConfig& c, const fs::path& models_dir,
                                           const DatasetMetadata& meta, const fs::path& dataset) {
  experiments::TrainedBackends tb;
  tb.readout = meta.readout;
  const std::size_t input_dim = 2 * static_cast<std::size_t>(meta.readout.n_samples);
  auto check_dim = [&](std::size_t model_dim, const fs::path& model) {
    if (model_dim != input_dim) {
      throw Error(ErrorKind::kData,
                  fmt::format("{} expects {} samples per quadrature but {} has {}",
                              model.string(), model_dim / 2, dataset.string(),
                              meta.readout.n_samples));
    }
  };
  for (auto b : c.backends) {
    switch (b) {
      case Backend::kRaw: {
        const auto path = models_dir / kRawFile;
        const auto j = read_json(path);
        try {
          check_dim(2 * static_cast<std::size_t>(j.at("readout").get<ReadoutConfig>().n_samples),
                    path);
          tb.raw = j.at("discriminant").get<raw::Discriminant>();
        } catch (const json::exception& e) {
          throw Error(ErrorKind::kData, fmt::format("{}: {}", path.string(), e.what()));
        }
        break;
      }
      case Backend::kFnn: {
        const auto path = models_dir / kFnnFile;
        auto stored = nn::load_model(path);
        check_dim(stored.network.input_dim(), path);
        tb.fnn = FnnModel{std::move(stored.network), stored.normalization};
        break;
      }
      case Backend::kTrmnn: {
        const auto path = models_dir / kRegistryFile;
        auto registry = load_registry(path);
        auto module = registry.at(c.qubit_id);
        check_dim(module.network.input_dim(), path);
        tb.trmnn = std::move(module);
        break;
      }
    }
  }
  return tb;
}

// ---------------------------------------------------------------------------
// Evaluation

std::vector<experiments::AssignmentRow> eval(const RunConfig& c, const fs::path& dataset_path,
                                             const fs::path& models_dir) {
  ensure_dir(c.output_dir);
  const auto ds = load_dataset(dataset_path);
  const auto backends = load_backends(c, models_dir, ds.meta, dataset_path);
  auto rows = experiments::evaluate_assignment(backends, c.backends, ds.data.records);
  experiments::write_assignment_json(c.output_dir / kAssignmentFile, rows, ds.meta.noise.sigma);
  for (const auto& r : rows) {
    spdlog::info("{}: F_A = {:.4f}", experiments::to_string(r.backend), r.fidelity);
  }
  return rows;
}

void rabi(const RunConfig& c, const fs::path& dataset_path, const fs::path& models_dir,
          std::optional<double> variance_norm) {
  ensure_dir(c.output_dir);
  const auto meta = read_metadata(dataset_path);
  if (!meta.rabi) {
    throw Error(ErrorKind::kData, fmt::format("{} is not a Rabi dataset", dataset_path.string()));
  }
  const auto backends = load_backends(c, models_dir, meta, dataset_path);

  // One time step in memory at a time.
  DatasetReader reader(dataset_path);
  experiments::RabiEstimates estimates;
  std::vector<ShotRecord> step;
  auto flush = [&] {
    if (step.empty()) return;
    experiments::add_rabi_step(estimates, backends, c.backends, *step.front().time_step_ns, step);
    step.clear();
  };
  while (auto r = reader.next()) {
    if (!r->time_step_ns) {
      throw Error(ErrorKind::kData,
                  fmt::format("{}: record without a drive time", dataset_path.string()));
    }
    if (!step.empty() && *step.front().time_step_ns != *r->time_step_ns) flush();
    step.push_back(std::move(*r));
  }
  flush();

  const auto curves = experiments::rabi_curves(estimates, c.m_values);
  const auto cells = experiments::rabi_fidelity_table(curves);
  experiments::write_rabi_curves_csv(c.output_dir / kRabiCurvesFile, curves);
  experiments::write_rabi_fidelity_json(c.output_dir / kRabiFidelityFile, cells);
  if (variance_norm || backends.has(Backend::kRaw)) {
    experiments::write_variance_json(c.output_dir / kVarianceFile,
                                     experiments::variance_report(curves, variance_norm));
  } else {
    spdlog::warn("no raw curve and no --variance-norm: variance.json not written");
  }
  for (const auto& cell : cells) {
    spdlog::info("{} M={}: F_R = {}", experiments::to_string(cell.backend), cell.m,
                 cell.rabi_fidelity ? fmt::format("{:.4f}", *cell.rabi_fidelity) : "undefined");
  }
}

void sweep(const RunConfig& c, const fs::path& reference_dataset, const fs::path& models_dir) {
  ensure_dir(c.output_dir);
  const auto meta = read_metadata(reference_dataset);
  const auto backends = load_backends(c, models_dir, meta, reference_dataset);
  const auto points =
      experiments::run_superposition_sweep(backends, c.backends, c.sweep_p, c.sweep_shots,
                                           meta.system, meta.readout, meta.noise, c.seeds.sweep);
  json arr = json::array();
  for (const auto& p : points) {
    json est = json::object();
    for (const auto& [b, e] : p.estimates) {
      est[std::string(experiments::to_string(b))] = {
          {"mean", sig12(e.mean)},
          {"variance", sig12(e.variance)},
          {"abs_error", sig12(std::abs(e.mean - p.p_excited))}};
    }
    arr.push_back({{"p", sig12(p.p_excited)}, {"estimates", est}});
  }
  write_json(c.output_dir / kSweepFile,
             {{"shots_per_point", c.sweep_shots}, {"noise_sigma", sig12(meta.noise.sigma)},
              {"points", arr}});
}

// ---------------------------------------------------------------------------
// Report

std::string fmt_cell(const json& v, int digits = 4) {
  return v.is_number() ? fmt::format("{:.{}f}", v.get<double>(), digits) : std::string("n/a");
}

std::string report(const fs::path& dir) {
  // Only the report data goes in, so reruns into other directories match byte for byte.
  std::string md = "# Readout report\n";
  bool any = false;

  if (fs::exists(dir / kAssignmentFile)) {
    any = true;
    const auto j = read_json(dir / kAssignmentFile);
    md += "\n## Assignment fidelity\n\n";
    md += fmt::format("noise sigma: {}\n\n", fmt_cell(j.value("noise_sigma", json()), 6));
    md += "| backend | F_A | P(e|g) | P(g|e) |\n|---|---|---|---|\n";
    for (const auto& [name, row] : j.at("backends").items()) {
      const auto& cm = row.at("confusion");
      const double tg = cm.at("g_given_g").get<double>() + cm.at("e_given_g").get<double>();
      const double te = cm.at("g_given_e").get<double>() + cm.at("e_given_e").get<double>();
      md += fmt::format("| {} | {} | {:.4f} | {:.4f} |\n", name, fmt_cell(row.at("fidelity")),
                        cm.at("e_given_g").get<double>() / tg,
                        cm.at("g_given_e").get<double>() / te);
    }
  }

  if (fs::exists(dir / kRabiFidelityFile)) {
    any = true;
    const auto j = read_json(dir / kRabiFidelityFile);
    md += "\n## Rabi fidelity\n\n";
    std::vector<std::size_t> ms;
    for (const auto& [name, cells] : j.at("backends").items()) {
      for (const auto& cell : cells) {
        const auto m = cell.at("m").get<std::size_t>();
        if (std::find(ms.begin(), ms.end(), m) == ms.end()) ms.push_back(m);
      }
    }
    md += "| backend |";
    for (auto m : ms) md += fmt::format(" M={} |", m);
    md += "\n|---|";
    for (std::size_t k = 0; k < ms.size(); ++k) md += "---|";
    md += "\n";
    for (const auto& [name, cells] : j.at("backends").items()) {
      md += fmt::format("| {} |", name);
      for (auto m : ms) {
        json value;
        for (const auto& cell : cells) {
          if (cell.at("m").get<std::size_t>() == m) value = cell.at("rabi_fidelity");
        }
        md += fmt::format(" {} |", fmt_cell(value));
      }
      md += "\n";
    }
  }

  if (fs::exists(dir / kVarianceFile)) {
    any = true;
    const auto j = read_json(dir / kVarianceFile);
    md += "\n## Temporally averaged variance\n\n";
    md += fmt::format("normalization: {}\n\n", fmt_cell(j.at("normalization"), 8));
    md += "| backend | M | mean variance | normalized |\n|---|---|---|---|\n";
    for (const auto& e : j.at("entries")) {
      md += fmt::format("| {} | {} | {} | {} |\n", e.at("backend").get<std::string>(),
                        e.at("m").get<std::size_t>(), fmt_cell(e.at("mean_variance"), 6),
                        fmt_cell(e.at("normalized")));
    }
  }

  if (fs::exists(dir / kSweepFile)) {
    any = true;
    const auto j = read_json(dir / kSweepFile);
    md += "\n## Superposition sweep (mean estimate)\n\n";
    std::vector<std::string> names;
    for (const auto& p : j.at("points")) {
      for (const auto& [name, e] : p.at("estimates").items()) {
        if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(name);
      }
    }
    md += "| p |";
    for (const auto& n : names) md += fmt::format(" {} |", n);
    md += "\n|---|";
    for (std::size_t k = 0; k < names.size(); ++k) md += "---|";
    md += "\n";
    for (const auto& p : j.at("points")) {
      md += fmt::format("| {} |", fmt_cell(p.at("p"), 2));
      for (const auto& n : names) {
        const auto& est = p.at("estimates");
        md += fmt::format(" {} |", est.contains(n) ? fmt_cell(est.at(n).at("mean")) : "n/a");
      }
      md += "\n";
    }
  }

  if (!any) {
    throw Error(ErrorKind::kData, fmt::format("no report files in {}", dir.string()));
  }
  std::ofstream out(dir / kReportFile, std::ios::trunc);
  if (!out) throw Error(ErrorKind::kData, fmt::format("cannot write {}", (dir / kReportFile).string()));
  out << md;
  return md;
}

// ---------------------------------------------------------------------------
// Small tools

void demod_csv(const fs::path& dataset_path, std::ostream& out) {
  const auto meta = read_metadata(dataset_path);
  DatasetReader reader(dataset_path);
  out << "shot_index,I,Q\n";
  std::size_t index = 0;
  while (auto r = reader.next()) {
    const auto p = demodulate(r->waveform, meta.readout.omega_if_mhz, meta.readout.sample_rate_hz);
    out << fmt::format("{},{:.12g},{:.12g}\n", index++, p.i, p.q);
  }
}

json raw_eval(const fs::path& train_path, const fs::path& test_path) {
  const auto train_ds = load_dataset(train_path);
  const auto test_ds = load_dataset(test_path);
  if (train_ds.data.n_samples != test_ds.data.n_samples) {
    throw Error(ErrorKind::kData, fmt::format("{} has {} samples per quadrature, {} has {}",
                                              train_path.string(), train_ds.data.n_samples,
                                              test_path.string(), test_ds.data.n_samples));
  }
  const std::array<Backend, 1> only{Backend::kRaw};
  const auto tb = experiments::train_backends(train_ds.data.records, train_ds.meta.readout, only,
                                              experiments::BackendTrainingOptions{});
  const auto rows = experiments::evaluate_assignment(tb, only, test_ds.data.records);
  const auto& d = *tb.raw;
  const auto& cm = rows.front().counts;
  return {{"mu_g", {{"i", sig12(d.mu_g.i)}, {"q", sig12(d.mu_g.q)}}},
          {"mu_e", {{"i", sig12(d.mu_e.i)}, {"q", sig12(d.mu_e.q)}}},
          {"threshold", sig12(d.threshold)},
          {"F_A", sig12(rows.front().fidelity)},
          {"confusion",
           {{"g_given_g", cm.n_g_given_g},
            {"e_given_g", cm.n_e_given_g},
            {"g_given_e", cm.n_g_given_e},
            {"e_given_e", cm.n_e_given_e}}}};
}

void install_logger(std::ostream& err, bool quiet) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_st>(err);
  auto logger = std::make_shared<spdlog::logger>("qrt", sink);
  logger->set_pattern("[%l] %v");
  logger->set_level(quiet ? spdlog::level::warn : spdlog::level::info);
  spdlog::set_default_logger(logger);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Synthetic dispersive readout: datasets, discriminators and reports", "qrt"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Only log warnings and errors");

  CommonOptions common;
  std::string dataset, models_dir, rabi_dataset, output, test_dataset;
  std::optional<double> variance_norm;

  auto* synth_cmd = app.add_subcommand("synth", "Write training, test and Rabi datasets");
  add_common(synth_cmd, common);

  auto* cal_cmd = app.add_subcommand("calibrate-noise", "Find sigma for the target raw F_A");
  add_common(cal_cmd, common);

  auto* train_cmd = app.add_subcommand("train", "Train backends on a labelled dataset");
  add_common(train_cmd, common);
  add_backends(train_cmd, common);
  train_cmd->add_option("-d,--dataset", dataset, "Training dataset (default <out>/train.qrtd)");

  auto* eval_cmd = app.add_subcommand("eval", "Assignment fidelity on a test dataset");
  add_common(eval_cmd, common);
  add_backends(eval_cmd, common);
  eval_cmd->add_option("-d,--dataset", dataset, "Test dataset (default <out>/test.qrtd)");
  eval_cmd->add_option("-m,--models", models_dir, "Model directory (default <out>)");
  eval_cmd->add_option("--rabi-dataset", rabi_dataset, "Also analyse this Rabi dataset");
  eval_cmd->add_option("--variance-norm", variance_norm, "Variance normalization constant");

  auto* rabi_cmd = app.add_subcommand("rabi", "Rabi curves, fits, F_R and variances");
  add_common(rabi_cmd, common);
  add_backends(rabi_cmd, common);
  rabi_cmd->add_option("-d,--dataset", dataset, "Rabi dataset (default <out>/rabi.qrtd)");
  rabi_cmd->add_option("-m,--models", models_dir, "Model directory (default <out>)");
  rabi_cmd->add_option("--variance-norm", variance_norm,
                       "Variance normalization constant (default: raw, largest M)");

  auto* sweep_cmd = app.add_subcommand("sweep", "Population estimates for superposition states");
  add_common(sweep_cmd, common);
  add_backends(sweep_cmd, common);
  sweep_cmd->add_option("-d,--dataset", dataset,
                        "Dataset whose system and noise to use (default <out>/test.qrtd)");
  sweep_cmd->add_option("-m,--models", models_dir, "Model directory (default <out>)");

  auto* report_cmd = app.add_subcommand("report", "Summarize the reports of an output directory");
  add_common(report_cmd, common);

  auto* run_cmd = app.add_subcommand("run", "synth, train, eval, rabi, sweep and report");
  add_common(run_cmd, common);
  add_backends(run_cmd, common);
  run_cmd->add_option("--variance-norm", variance_norm, "Variance normalization constant");

  auto* demod_cmd = app.add_subcommand("demod", "CSV of demodulated IQ points");
  demod_cmd->add_option("-d,--dataset", dataset, "Dataset")->required();
  demod_cmd->add_option("-o,--output", output, "CSV file (default stdout)");

  auto* raw_eval_cmd = app.add_subcommand("raw-eval", "Raw readout calibrated and scored");
  raw_eval_cmd->add_option("--train", dataset, "Calibration dataset")->required();
  raw_eval_cmd->add_option("--test", test_dataset, "Test dataset")->required();
  raw_eval_cmd->add_option("-o,--output", output, "JSON file (default stdout)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  install_logger(err, quiet);
  try {
    if (synth_cmd->parsed()) {
      synth(resolve(common));
    } else if (cal_cmd->parsed()) {
      const auto c = resolve(common);
      ensure_dir(c.output_dir);
      const auto noise = resolve_noise(c);
      write_json(c.output_dir / kNoiseFile, noise.record);
      out << noise.record.dump(2) << '\n';
    } else if (train_cmd->parsed()) {
      const auto c = resolve(common);
      train(c, input_path(dataset, c, kTrainFile));
    } else if (eval_cmd->parsed()) {
      const auto c = resolve(common);
      const fs::path models = models_dir.empty() ? c.output_dir : fs::path(models_dir);
      eval(c, input_path(dataset, c, kTestFile), models);
      if (!rabi_dataset.empty()) rabi(c, rabi_dataset, models, variance_norm);
    } else if (rabi_cmd->parsed()) {
      const auto c = resolve(common);
      rabi(c, input_path(dataset, c, kRabiFile),
           models_dir.empty() ? c.output_dir : fs::path(models_dir), variance_norm);
    } else if (sweep_cmd->parsed()) {
      const auto c = resolve(common);
      sweep(c, input_path(dataset, c, kTestFile),
            models_dir.empty() ? c.output_dir : fs::path(models_dir));
    } else if (report_cmd->parsed()) {
      out << report(resolve(common).output_dir);
    } else if (run_cmd->parsed()) {
      const auto c = resolve(common);
      synth(c);
      train(c, c.output_dir / kTrainFile);
      eval(c, c.output_dir / kTestFile, c.output_dir);
      rabi(c, c.output_dir / kRabiFile, c.output_dir, variance_norm);
      sweep(c, c.output_dir / kTestFile, c.output_dir);
      out << report(c.output_dir);
    } else if (demod_cmd->parsed()) {
      if (output.empty()) {
        demod_csv(dataset, out);
      } else {
        std::ofstream file(output, std::ios::trunc);
        if (!file) throw Error(ErrorKind::kData, fmt::format("cannot write {}", output));
        demod_csv(dataset, file);
      }
    } else if (raw_eval_cmd->parsed()) {
      const auto j = raw_eval(dataset, test_dataset);
      if (output.empty()) {
        out << j.dump(2) << '\n';
      } else {
        write_json(output, j);
      }
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}

}  // namespace qrt::cli
