#include "espvfm/params_io.hpp"

#include <cstdlib>
#include <fstream>

namespace espvfm {

Json params_to_json(const EspParams& p) {
    Json out;
    out["format"] = "esp-vfm.params/1";
    out["cv_term_enabled"] = p.cv_term_enabled;
    Json& fields = out["params"];
    for (int i = 0; i < kParamCount; ++i) {
        const auto id = static_cast<Param>(i);
        fields[std::string(param_name(id))] = {{"value", p[id]}, {"unit", param_unit(id)}};
    }
    return out;
}

EspParams params_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("params") || !j["params"].is_object())
        throw ValidationError("params config: expected an object with a 'params' object");
    EspParams p;
    p.rho0 = 1000.0;
    p.cv = 0.0;
    p.cv_term_enabled = j.value("cv_term_enabled", false);
    std::array<bool, kParamCount> seen{};
    for (const auto& [key, entry] : j["params"].items()) {
        const Param id = parse_param(key);
        if (!entry.is_object() || !entry.contains("value") || !entry["value"].is_number())
            throw ValidationError("params config: '" + key + "' needs a numeric 'value'");
        double value = entry["value"].get<double>();
        const std::string unit = entry.value("unit", std::string(param_unit(id)));
        if (id == Param::omega_t && unit == "rpm") {
            value *= kRpmToRadS;
        } else if (unit != param_unit(id)) {
            throw ValidationError("params config: '" + key + "' has unit '" + unit + "', expected '" +
                                  std::string(param_unit(id)) + "'");
        }
        p[id] = value;
        seen[static_cast<int>(id)] = true;
    }
    for (int i = 0; i < kParamCount; ++i) {
        const auto id = static_cast<Param>(i);
        if (!seen[i] && id != Param::rho0 && id != Param::cv)
            throw ValidationError("params config: missing '" + std::string(param_name(id)) + "'");
    }
    validate(p);
    return p;
}

Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

void write_json_file(const Json& j, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

EspParams load_params(const std::filesystem::path& path) {
    return params_from_json(read_json_file(path));
}

void save_params(const EspParams& p, const std::filesystem::path& path) {
    write_json_file(params_to_json(p), path);
}

std::filesystem::path config_dir() {
    if (const char* env = std::getenv("ESPVFM_CONFIG_DIR")) return env;
    return ESPVFM_CONFIG_DIR;
}

EspParams load_preset(std::string_view name_or_path) {
    const std::string name(name_or_path);
    if (name == "inv1" || name == "inv2" || name == "inv1-model-k4p" || name == "inv2-model-k4p")
        return load_params(config_dir() / (name + ".json"));
    return load_params(name);
}

}  // namespace espvfm
