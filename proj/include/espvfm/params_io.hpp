#pragma once

#include <filesystem>
#include <string_view>

#include <json.hpp>

#include "espvfm/model.hpp"

namespace espvfm {

using Json = nlohmann::ordered_json;

/// Serializes every field as {"value", "unit"} keyed by symbol, in enum order.
/// omega_t is written in rad/s so that load(save(p)) is bit-exact.
Json params_to_json(const EspParams& p);

/// Accepts omega_t in "rpm" or "rad/s"; every other unit must match
/// param_unit() exactly. rho0 and cv may be omitted.
EspParams params_from_json(const Json& j);

EspParams load_params(const std::filesystem::path& path);
void save_params(const EspParams& p, const std::filesystem::path& path);

/// Directory holding the bundled configs (inv1.json, schedules, ...).
std::filesystem::path config_dir();

/// "inv1", "inv2", or a path to a params file.
EspParams load_preset(std::string_view name_or_path);

Json read_json_file(const std::filesystem::path& path);
void write_json_file(const Json& j, const std::filesystem::path& path);

}  // namespace espvfm
