#ifndef ICAFUSION_CONFIG_HPP
#define ICAFUSION_CONFIG_HPP

#include <fstream>

#include "icafusion/serialize.hpp"

namespace icafusion {

inline constexpr int kConfigSchemaVersion = 1;

/// Run configuration: file values first, CLI flags override. Unknown keys
/// are rejected so typos cannot silently fall back to defaults.
struct RunConfig {
    std::string data_dir;
    std::string out_dir = "out";
    TrainConfig train;
    GeneratorSpec generator;

    json to_json() const {
        json j;
        j["schema_version"] = kConfigSchemaVersion;
        j["data_dir"] = data_dir;
        j["out_dir"] = out_dir;
        j["train"] = train;
        j["generator"] = generator;
        return j;
    }
};

namespace detail {

inline void reject_unknown_keys(const json& input, const json& reference,
                                const std::string& where) {
    if (!input.is_object()) return;
    for (auto it = input.begin(); it != input.end(); ++it) {
        if (!reference.contains(it.key()))
            throw ConfigError("unknown config key '" + where + it.key() + "'");
        if (it.value().is_object())
            reject_unknown_keys(it.value(), reference.at(it.key()), where + it.key() + ".");
    }
}

}  // namespace detail

/// Parses a config file; keys not present fall back to defaults, unknown
/// keys are an error, and a schema_version other than the supported one is
/// refused.
inline RunConfig load_run_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        j = json::parse(f);
    } catch (const json::exception& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
    RunConfig cfg;
    detail::reject_unknown_keys(j, cfg.to_json(), "");
    if (j.contains("schema_version") && j.at("schema_version").get<int>() != kConfigSchemaVersion)
        throw ConfigError("unsupported config schema_version in " + path);
    if (j.contains("data_dir")) j.at("data_dir").get_to(cfg.data_dir);
    if (j.contains("out_dir")) j.at("out_dir").get_to(cfg.out_dir);
    if (j.contains("train")) {
        json merged = json(cfg.train);
        merged.merge_patch(j.at("train"));
        merged.get_to(cfg.train);
    }
    if (j.contains("generator")) {
        json merged = json(cfg.generator);
        merged.merge_patch(j.at("generator"));
        merged.get_to(cfg.generator);
    }
    return cfg;
}

inline void write_run_config(const RunConfig& cfg, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw ConfigError("cannot write config echo: " + path);
    f << cfg.to_json().dump(2) << "\n";
}

}  // namespace icafusion

#endif
