#include "qrt/json_io.hpp"

#include <cmath>
#include <string>

#include <fmt/format.h>

namespace qrt {

void to_json(nlohmann::json& j, const SystemParams& p) {
  j = {{"omega_r_ghz", p.omega_r_ghz}, {"omega_q_ghz", p.omega_q_ghz},
       {"g_mhz", p.g_mhz},             {"kappa_mhz", p.kappa_mhz},
       {"t1_us", p.t1_us},             {"t2_us", p.t2_us}};
}

void from_json(const nlohmann::json& j, SystemParams& p) {
  j.at("omega_r_ghz").get_to(p.omega_r_ghz);
  j.at("omega_q_ghz").get_to(p.omega_q_ghz);
  j.at("g_mhz").get_to(p.g_mhz);
  j.at("kappa_mhz").get_to(p.kappa_mhz);
  j.at("t1_us").get_to(p.t1_us);
  j.at("t2_us").get_to(p.t2_us);
}

void to_json(nlohmann::json& j, const ReadoutConfig& c) {
  j = {{"omega_ro_ghz", c.omega_ro_ghz},
       {"omega_if_mhz", c.omega_if_mhz},
       {"sample_rate_hz", c.sample_rate_hz},
       {"n_samples", c.n_samples},
       {"s0", c.s0},
       {"l0", c.l0},
       {"theta_lo", c.theta_lo}};
}

void from_json(const nlohmann::json& j, ReadoutConfig& c) {
  j.at("omega_ro_ghz").get_to(c.omega_ro_ghz);
  j.at("omega_if_mhz").get_to(c.omega_if_mhz);
  j.at("sample_rate_hz").get_to(c.sample_rate_hz);
  j.at("n_samples").get_to(c.n_samples);
  j.at("s0").get_to(c.s0);
  j.at("l0").get_to(c.l0);
  j.at("theta_lo").get_to(c.theta_lo);
}

void to_json(nlohmann::json& j, const NoiseModel& n) { j = {{"sigma", n.sigma}}; }

void from_json(const nlohmann::json& j, NoiseModel& n) { j.at("sigma").get_to(n.sigma); }

void to_json(nlohmann::json& j, const RabiConfig& r) {
  j = {{"n_steps", r.n_steps},
       {"t_total_ns", r.t_total_ns},
       {"omega_rabi", r.omega_rabi},
       {"envelope_t2_ns", r.envelope_t2_ns ? nlohmann::json(*r.envelope_t2_ns) : nlohmann::json()},
       {"shots_per_step", r.shots_per_step}};
}

void from_json(const nlohmann::json& j, RabiConfig& r) {
  j.at("n_steps").get_to(r.n_steps);
  j.at("t_total_ns").get_to(r.t_total_ns);
  j.at("omega_rabi").get_to(r.omega_rabi);
  const auto& env = j.at("envelope_t2_ns");
  r.envelope_t2_ns = env.is_null() ? std::nullopt : std::optional<double>(env.get<double>());
  j.at("shots_per_step").get_to(r.shots_per_step);
}

double round_sig12(double value) {
  if (!std::isfinite(value)) return value;
  return std::stod(fmt::format("{:.12g}", value));
}

void to_json(nlohmann::json& j, const IQPoint& p) { j = {{"i", p.i}, {"q", p.q}}; }

void from_json(const nlohmann::json& j, IQPoint& p) {
  j.at("i").get_to(p.i);
  j.at("q").get_to(p.q);
}

}  // namespace qrt

namespace qrt::raw {

void to_json(nlohmann::json& j, const Discriminant& d) {
  j = {{"mu_g", d.mu_g},       {"mu_e", d.mu_e},       {"axis", d.axis},
       {"threshold", d.threshold}, {"sigma_g", d.sigma_g}, {"sigma_e", d.sigma_e}};
}

void from_json(const nlohmann::json& j, Discriminant& d) {
  j.at("mu_g").get_to(d.mu_g);
  j.at("mu_e").get_to(d.mu_e);
  j.at("axis").get_to(d.axis);
  j.at("threshold").get_to(d.threshold);
  j.at("sigma_g").get_to(d.sigma_g);
  j.at("sigma_e").get_to(d.sigma_e);
}

}  // namespace qrt::raw
