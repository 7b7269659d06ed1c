#include "qrt/experiments.hpp"

#include <algorithm>
#include <functional>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include <Eigen/Dense>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "qrt/demodulation.hpp"
#include "qrt/error.hpp"
#include "qrt/json_io.hpp"
#include "qrt/seeding.hpp"

namespace qrt::experiments {

std::string_view to_string(Backend backend) {
  switch (backend) {
    case Backend::kRaw:
      return "raw";
    case Backend::kFnn:
      return "fnn";
    case Backend::kTrmnn:
      return "trmnn";
  }
  return "?";
}

Backend parse_backend(std::string_view name) {
  for (auto b : kAllBackends) {
    if (to_string(b) == name) return b;
  }
  throw Error(ErrorKind::kConfig,
              fmt::format("unknown backend '{}' (expected raw, fnn or trmnn)", name));
}

void ConfusionCounts::add(Eigenstate prepared, Eigenstate assigned) {
  const bool e_prep = prepared == Eigenstate::kExcited;
  const bool e_asg = assigned == Eigenstate::kExcited;
  if (!e_prep && !e_asg) ++n_g_given_g;
  if (!e_prep && e_asg) ++n_e_given_g;
  if (e_prep && !e_asg) ++n_g_given_e;
  if (e_prep && e_asg) ++n_e_given_e;
}

double assignment_fidelity(const ConfusionCounts& c) {
  if (c.total_g() == 0 || c.total_e() == 0) {
    throw Error(ErrorKind::kData, "assignment fidelity needs shots of both prepared states");
  }
  const double p_e_g = static_cast<double>(c.n_e_given_g) / static_cast<double>(c.total_g());
  const double p_g_e = static_cast<double>(c.n_g_given_e) / static_cast<double>(c.total_e());
  return 1.0 - 0.5 * (p_g_e + p_e_g);
}

bool TrainedBackends::has(Backend backend) const {
  switch (backend) {
    case Backend::kRaw:
      return raw.has_value();
    case Backend::kFnn:
      return fnn.has_value();
    case Backend::kTrmnn:
      return trmnn.has_value();
  }
  return false;
}

std::vector<Backend> TrainedBackends::available() const {
  std::vector<Backend> out;
  for (auto b : kAllBackends) {
    if (has(b)) out.push_back(b);
  }
  return out;
}

TrainedBackends train_backends(std::span<const ShotRecord> train_set, const ReadoutConfig& readout,
                               std::span<const Backend> which,
                               const BackendTrainingOptions& options, TrainingReports* reports) {
  TrainedBackends out;
  out.readout = readout;
  for (auto b : which) {
    switch (b) {
      case Backend::kRaw: {
        const auto points = demodulate_records(train_set, readout);
        std::vector<IQPoint> ground, excited;
        for (std::size_t k = 0; k < train_set.size(); ++k) {
          if (!train_set[k].label) {
            throw Error(ErrorKind::kData, fmt::format("training shot {} has no label", k));
          }
          (*train_set[k].label == Eigenstate::kExcited ? excited : ground).push_back(points[k]);
        }
        out.raw = raw::calibrate(ground, excited);
        break;
      }
      case Backend::kFnn: {
        auto topo = options.topology;
        topo.init_seed = options.fnn_init_seed;
        auto result = train_fnn(train_set, topo, options.train);
        out.fnn = std::move(result.model);
        if (reports) reports->fnn = std::move(result.report);
        break;
      }
      case Backend::kTrmnn: {
        auto topo = options.topology;
        topo.init_seed = options.trmnn_init_seed;
        ModuleRegistry registry;
        auto result = train_trmnn(registry, options.qubit_id, train_set, topo, options.train);
        out.trmnn = std::move(registry.at(options.qubit_id));
        if (reports) reports->trmnn = std::move(result.report);
        break;
      }
    }
  }
  return out;
}

std::vector<double> per_shot_estimates(const TrainedBackends& backends, Backend backend,
                                       std::span<const ShotRecord> shots) {
  if (!backends.has(backend)) {
    throw Error(ErrorKind::kConfig,
                fmt::format("backend '{}' has not been trained", to_string(backend)));
  }
  switch (backend) {
    case Backend::kRaw: {
      const auto points = demodulate_records(shots, backends.readout);
      std::vector<double> out(points.size());
      for (std::size_t k = 0; k < points.size(); ++k) {
        out[k] = raw::classify(*backends.raw, points[k]) == Eigenstate::kExcited ? 1.0 : 0.0;
      }
      return out;
    }
    case Backend::kFnn:
      return fnn_probabilities(*backends.fnn, shots);
    case Backend::kTrmnn:
      return trmnn_probabilities(*backends.trmnn, shots);
  }
  return {};
}

Eigenstate assign(double estimate) {
  return estimate > 0.5 ? Eigenstate::kExcited : Eigenstate::kGround;
}

std::vector<AssignmentRow> evaluate_assignment(const TrainedBackends& backends,
                                               std::span<const Backend> which,
                                               std::span<const ShotRecord> test_set) {
  for (std::size_t k = 0; k < test_set.size(); ++k) {
    if (!test_set[k].label) {
      throw Error(ErrorKind::kData, fmt::format("test shot {} has no label", k));
    }
  }
  std::vector<AssignmentRow> rows;
  for (auto b : which) {
    const auto est = per_shot_estimates(backends, b, test_set);
    ConfusionCounts counts;
    for (std::size_t k = 0; k < test_set.size(); ++k) counts.add(*test_set[k].label, assign(est[k]));
    rows.push_back({b, counts, assignment_fidelity(counts)});
  }
  return rows;
}

std::vector<ShotRecord> labelled_dataset(std::size_t per_state, const SystemParams& params,
                                         const ReadoutConfig& readout, const NoiseModel& noise,
                                         std::uint64_t seed) {
  auto out = synthesize_labeled_shots(Eigenstate::kGround, per_state, params, readout, noise,
                                      derive_seed(seed, "ground"));
  auto e = synthesize_labeled_shots(Eigenstate::kExcited, per_state, params, readout, noise,
                                    derive_seed(seed, "excited"));
  out.insert(out.end(), std::make_move_iterator(e.begin()), std::make_move_iterator(e.end()));
  return out;
}

AssignmentExperiment run_assignment_experiment(const SystemParams& params,
                                               const ReadoutConfig& readout,
                                               const NoiseModel& noise,
                                               std::span<const Backend> which,
                                               const AssignmentOptions& options,
                                               std::uint64_t seed) {
  AssignmentExperiment out;
  {
    const auto train_set = labelled_dataset(options.train_shots_per_state, params, readout, noise,
                                            derive_seed(seed, "train"));
    out.backends = train_backends(train_set, readout, which, options.training, &out.reports);
  }
  const auto test_set = labelled_dataset(options.test_shots_per_state, params, readout, noise,
                                          derive_seed(seed, "test"));
  out.rows = evaluate_assignment(out.backends, which, test_set);
  return out;
}

void add_rabi_step(RabiEstimates& estimates, const TrainedBackends& backends,
                   std::span<const Backend> which, double time_ns,
                   std::span<const ShotRecord> step_records) {
  if (step_records.empty()) {
    throw Error(ErrorKind::kData, fmt::format("Rabi step at t = {} ns has no traces", time_ns));
  }
  for (auto b : which) {
    auto& steps = estimates.per_trace[b];
    if (steps.size() != estimates.times.size()) {
      throw Error(ErrorKind::kStructural, "backend set changed between Rabi steps");
    }
    if (!steps.empty() && steps.front().size() != step_records.size()) {
      throw Error(ErrorKind::kData,
                  fmt::format("Rabi step at t = {} ns has {} traces, earlier steps have {}",
                              time_ns, step_records.size(), steps.front().size()));
    }
    steps.push_back(per_shot_estimates(backends, b, step_records));
  }
  estimates.times.push_back(time_ns);
}

RabiEstimates estimate_rabi(const TrainedBackends& backends, std::span<const Backend> which,
                            const RabiConfig& rabi, const SystemParams& params,
                            const ReadoutConfig& readout, const NoiseModel& noise,
                            std::uint64_t seed) {
  rabi.validate();
  const auto times = rabi.times();
  RabiEstimates est;
  for (std::uint32_t step = 0; step < rabi.n_steps; ++step) {
    const auto records = synthesize_rabi_step(rabi, step, params, readout, noise, seed);
    add_rabi_step(est, backends, which, times[step], records);
  }
  return est;
}

std::vector<RabiCurve> rabi_curves(const RabiEstimates& estimates,
                                   std::span<const std::size_t> m_values) {
  std::vector<RabiCurve> curves;
  for (const auto& [backend, steps] : estimates.per_trace) {
    const std::size_t available = steps.empty() ? 0 : steps.front().size();
    for (auto m : m_values) {
      if (m == 0 || m > available) {
        throw Error(ErrorKind::kConfig,
                    fmt::format("M = {} traces requested, {} available", m, available));
      }
      RabiCurve c{backend, m, estimates.times, {}, {}};
      for (const auto& traces : steps) {
        const auto s = summarize(std::span<const double>(traces.data(), m));
        c.means.push_back(s.mean);
        c.variances.push_back(s.variance);
      }
      curves.push_back(std::move(c));
    }
  }
  return curves;
}

std::vector<RabiCurve> run_rabi_experiment(const TrainedBackends& backends,
                                           std::span<const Backend> which,
                                           const RabiConfig& rabi,
                                           std::span<const std::size_t> m_values,
                                           const SystemParams& params,
                                           const ReadoutConfig& readout, const NoiseModel& noise,
                                           std::uint64_t seed) {
  for (auto m : m_values) {
    if (m == 0 || m > rabi.shots_per_step) {
      throw Error(ErrorKind::kConfig, fmt::format("M = {} traces requested, {} per step", m,
                                                  rabi.shots_per_step));
    }
  }
  return rabi_curves(estimate_rabi(backends, which, rabi, params, readout, noise, seed),
                     m_values);
}

// ---------------------------------------------------------------------------

namespace {

using Vec4 = Eigen::Vector4d;

Vec4 pack(const SineParams& p) { return {p.amplitude, p.omega, p.phase, p.offset}; }
SineParams unpack(const Vec4& v) { return {v[0], v[1], v[2], v[3]}; }

double model(const Vec4& p, double t) { return p[0] * std::sin(p[1] * t + p[2]) + p[3]; }

double cost(const Vec4& p, std::span<const double> t, std::span<const double> y) {
  double c = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double r = y[k] - model(p, t[k]);
    c += r * r;
  }
  return c;
}

// J^T J and J^T r at p.
void normal_equations(const Vec4& p, std::span<const double> t, std::span<const double> y,
                      Eigen::Matrix4d& h, Vec4& g) {
  h.setZero();
  g.setZero();
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double arg = p[1] * t[k] + p[2];
    const double s = std::sin(arg);
    const double c = std::cos(arg);
    const Vec4 j{s, p[0] * t[k] * c, p[0] * c, 1.0};
    h.noalias() += j * j.transpose();
    g += j * (y[k] - (p[0] * s + p[3]));
  }
}

void check_fit_input(std::span<const double> t, std::span<const double> y) {
  if (t.size() != y.size()) {
    throw Error(ErrorKind::kStructural,
                fmt::format("sine fit: {} times but {} values", t.size(), y.size()));
  }
  if (t.size() < 8) {
    throw Error(ErrorKind::kData, fmt::format("sine fit needs at least 8 points, got {}", t.size()));
  }
}

SineParams canonical(SineParams p) {
  if (p.omega < 0.0) {
    p.omega = -p.omega;
    p.phase = std::numbers::pi - p.phase;
  }
  if (p.amplitude < 0.0) {
    p.amplitude = -p.amplitude;
    p.phase += std::numbers::pi;
  }
  p.phase = std::remainder(p.phase, 2.0 * std::numbers::pi);
  if (p.phase <= -std::numbers::pi) p.phase += 2.0 * std::numbers::pi;
  return p;
}

SineParams initial_guess(std::span<const double> t, std::span<const double> y) {
  const std::size_t n = t.size();
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  const double span_t = t.back() - t.front();
  const double dt = span_t / static_cast<double>(n - 1);

  // Zero-padded DFT (8x) of the mean-removed data, bins up to Nyquist.
  constexpr int kPad = 8;
  double best_omega = 0.0, best_power = -1.0;
  const double base = 2.0 * std::numbers::pi / (static_cast<double>(n) * dt);
  for (std::size_t j = kPad / 2; j <= n * kPad / 2; ++j) {
    const double w = base * static_cast<double>(j) / kPad;
    double re = 0.0, im = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      re += (y[k] - mean) * std::cos(w * t[k]);
      im += (y[k] - mean) * std::sin(w * t[k]);
    }
    const double power = re * re + im * im;
    if (power > best_power) {
      best_power = power;
      best_omega = w;
    }
  }

  double a = 0.0, b = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    a += (y[k] - mean) * std::sin(best_omega * t[k]);
    b += (y[k] - mean) * std::cos(best_omega * t[k]);
  }
  return {0.5 * (*hi - *lo), best_omega, std::atan2(b, a), mean};
}

}  // namespace

SineParams refine_sine(const SineParams& start, std::span<const double> t,
                       std::span<const double> y) {
  check_fit_input(t, y);
  const Vec4 p = pack(start);
  Eigen::Matrix4d h;
  Vec4 g;
  normal_equations(p, t, y, h, g);
  const Vec4 delta = h.ldlt().solve(g);
  if (!delta.allFinite()) return start;
  return unpack(p + delta);
}

SineFit fit_sine(std::span<const double> t, std::span<const double> y) {
  check_fit_input(t, y);
  constexpr int kMaxIterations = 200;
  constexpr double kTolerance = 1e-10;

  Vec4 p = pack(initial_guess(t, y));
  double c = cost(p, t, y);
  double lambda = 1e-3;
  SineFit fit;

  for (int it = 1; it <= kMaxIterations; ++it) {
    fit.iterations = it;
    Eigen::Matrix4d h;
    Vec4 g;
    normal_equations(p, t, y, h, g);
    const double diag_floor = 1e-12 * std::max(1.0, h.diagonal().maxCoeff());

    bool accepted = false;
    double trial_cost = c;
    Vec4 trial = p;
    while (lambda < 1e16) {
      Eigen::Matrix4d damped = h;
      for (int k = 0; k < 4; ++k) damped(k, k) += lambda * std::max(h(k, k), diag_floor);
      const Vec4 delta = damped.ldlt().solve(g);
      trial = p + delta;
      trial_cost = delta.allFinite() ? cost(trial, t, y) : c;
      if (trial_cost < c) {
        accepted = true;
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted) {
      // No descent direction left: already at a minimum.
      fit.converged = true;
      break;
    }
    const double rel = (c - trial_cost) / std::max(c, 1e-300);
    p = trial;
    c = trial_cost;
    lambda = std::max(lambda / 10.0, 1e-12);
    if (rel < kTolerance || c == 0.0) {
      fit.converged = true;
      break;
    }
  }

  fit.params = canonical(unpack(p));
  const Vec4 q = pack(fit.params);
  fit.fitted.resize(t.size());
  for (std::size_t k = 0; k < t.size(); ++k) fit.fitted[k] = model(q, t[k]);
  return fit;
}

SineFit fit_sine(const RabiCurve& curve) { return fit_sine(curve.times, curve.means); }

double rabi_fidelity(std::span<const double> y, std::span<const double> f) {
  if (y.size() != f.size() || y.size() < 2) {
    throw Error(ErrorKind::kStructural,
                fmt::format("Rabi fidelity: {} data points vs {} fitted", y.size(), f.size()));
  }
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t k = 0; k < y.size(); ++k) {
    ss_res += (y[k] - f[k]) * (y[k] - f[k]);
    ss_tot += (y[k] - mean) * (y[k] - mean);
  }
  // Compare values directly: the accumulated mean of a constant curve need not
  // equal its elements.
  if (std::adjacent_find(y.begin(), y.end(), std::not_equal_to<>()) == y.end()) {
    throw Error(ErrorKind::kData, "Rabi fidelity undefined for a constant curve");
  }
  return 1.0 - ss_res / ss_tot;
}

std::vector<RabiFidelityCell> rabi_fidelity_table(std::span<const RabiCurve> curves) {
  std::vector<RabiFidelityCell> cells;
  for (const auto& c : curves) {
    RabiFidelityCell cell{c.backend, c.m, std::nullopt, fit_sine(c)};
    const bool constant = std::all_of(c.means.begin(), c.means.end(),
                                      [&](double v) { return v == c.means.front(); });
    if (!constant) cell.rabi_fidelity = rabi_fidelity(c.means, cell.fit.fitted);
    cells.push_back(std::move(cell));
  }
  return cells;
}

VarianceReport variance_report(std::span<const RabiCurve> curves,
                               std::optional<double> normalization) {
  if (curves.empty()) throw Error(ErrorKind::kData, "variance report: no curves");
  VarianceReport report;
  const RabiCurve* anchor = nullptr;
  for (const auto& c : curves) {
    if (c.times != curves.front().times || c.variances.size() != c.times.size()) {
      throw Error(ErrorKind::kData, "variance report: curves do not share a time grid");
    }
    const double mean_var = c.variances.empty()
                                ? 0.0
                                : std::accumulate(c.variances.begin(), c.variances.end(), 0.0) /
                                      static_cast<double>(c.variances.size());
    report.entries.push_back({c.backend, c.m, mean_var, 0.0});
    if (c.backend == Backend::kRaw && (!anchor || c.m > anchor->m)) anchor = &c;
  }
  if (normalization) {
    report.normalization = *normalization;
  } else if (anchor) {
    const auto it = std::find_if(report.entries.begin(), report.entries.end(), [&](const auto& e) {
      return e.backend == Backend::kRaw && e.m == anchor->m;
    });
    report.normalization = it->mean_variance;
  } else {
    throw Error(ErrorKind::kData, "variance report: no raw curve to normalize against");
  }
  if (!(report.normalization > 0.0)) {
    throw Error(ErrorKind::kData, "variance report: normalization must be positive");
  }
  for (auto& e : report.entries) e.normalized = e.mean_variance / report.normalization;
  return report;
}

std::vector<SweepPoint> run_superposition_sweep(const TrainedBackends& backends,
                                                std::span<const Backend> which,
                                                std::span<const double> p_values,
                                                std::size_t shots_per_point,
                                                const SystemParams& params,
                                                const ReadoutConfig& readout,
                                                const NoiseModel& noise, std::uint64_t seed) {
  std::vector<SweepPoint> out;
  for (std::size_t k = 0; k < p_values.size(); ++k) {
    const auto shots = synthesize_state_shots(QubitState::superposition(p_values[k]),
                                              shots_per_point, params, readout, noise,
                                              derive_seed(seed, k));
    SweepPoint point{p_values[k], {}};
    for (auto b : which) point.estimates[b] = summarize(per_shot_estimates(backends, b, shots));
    out.push_back(std::move(point));
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::kData, fmt::format("cannot write {}", path.string()));
  out << j.dump(2) << '\n';
}

nlohmann::json sig12(std::optional<double> v) {
  if (!v || !std::isfinite(*v)) return nullptr;
  return round_sig12(*v);
}

}  // namespace

void write_assignment_json(const std::filesystem::path& path, std::span<const AssignmentRow> rows,
                           std::optional<double> noise_sigma) {
  nlohmann::json backends = nlohmann::json::object();
  for (const auto& r : rows) {
    backends[std::string(to_string(r.backend))] = {
        {"fidelity", sig12(r.fidelity)},
        {"confusion",
         {{"g_given_g", r.counts.n_g_given_g},
          {"e_given_g", r.counts.n_e_given_g},
          {"g_given_e", r.counts.n_g_given_e},
          {"e_given_e", r.counts.n_e_given_e}}}};
  }
  write_json(path, {{"noise_sigma", sig12(noise_sigma)}, {"backends", backends}});
}

void write_rabi_fidelity_json(const std::filesystem::path& path,
                              std::span<const RabiFidelityCell> cells) {
  nlohmann::json backends = nlohmann::json::object();
  for (const auto& c : cells) {
    const auto& p = c.fit.params;
    backends[std::string(to_string(c.backend))].push_back(
        {{"m", c.m},
         {"rabi_fidelity", sig12(c.rabi_fidelity)},
         {"fit",
          {{"amplitude", sig12(p.amplitude)},
           {"omega", sig12(p.omega)},
           {"phase", sig12(p.phase)},
           {"offset", sig12(p.offset)},
           {"converged", c.fit.converged},
           {"iterations", c.fit.iterations}}}});
  }
  write_json(path, {{"backends", backends}});
}

void write_rabi_curves_csv(const std::filesystem::path& path, std::span<const RabiCurve> curves) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::kData, fmt::format("cannot write {}", path.string()));
  out << "backend,M,t_ns,mean,variance\n";
  for (const auto& c : curves) {
    for (std::size_t k = 0; k < c.times.size(); ++k) {
      out << fmt::format("{},{},{:.12g},{:.12g},{:.12g}\n", to_string(c.backend), c.m, c.times[k],
                         c.means[k], c.variances[k]);
    }
  }
  if (!out) throw Error(ErrorKind::kData, fmt::format("write to {} failed", path.string()));
}

void write_variance_json(const std::filesystem::path& path, const VarianceReport& report) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : report.entries) {
    entries.push_back({{"backend", to_string(e.backend)},
                       {"m", e.m},
                       {"mean_variance", sig12(e.mean_variance)},
                       {"normalized", sig12(e.normalized)}});
  }
  write_json(path, {{"normalization", sig12(report.normalization)}, {"entries", entries}});
}

}  // namespace qrt::experiments
