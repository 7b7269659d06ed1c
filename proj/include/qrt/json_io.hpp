#pragma once

#include <nlohmann/json.hpp>

#include "qrt/demodulation.hpp"
#include "qrt/raw_readout.hpp"
#include "qrt/signal_model.hpp"

// nlohmann::json bindings for the configuration types. Field names carry
// their units.
namespace qrt {

void to_json(nlohmann::json& j, const SystemParams& p);
void from_json(const nlohmann::json& j, SystemParams& p);
void to_json(nlohmann::json& j, const ReadoutConfig& c);
void from_json(const nlohmann::json& j, ReadoutConfig& c);
void to_json(nlohmann::json& j, const NoiseModel& n);
void from_json(const nlohmann::json& j, NoiseModel& n);
void to_json(nlohmann::json& j, const RabiConfig& r);
void from_json(const nlohmann::json& j, RabiConfig& r);

void to_json(nlohmann::json& j, const IQPoint& p);
void from_json(const nlohmann::json& j, IQPoint& p);

/// Rounds to 12 significant digits; report files store floats this way.
double round_sig12(double value);

}  // namespace qrt

namespace qrt::raw {

// Full precision: a stored discriminant must classify exactly like the
// original.
void to_json(nlohmann::json& j, const Discriminant& d);
void from_json(const nlohmann::json& j, Discriminant& d);

}  // namespace qrt::raw
