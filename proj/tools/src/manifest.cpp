#include "jsreg_cli/manifest.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include "jsreg/error.hpp"

namespace jsreg::cli {

std::string format_manifest(const Manifest& m) {
    nlohmann::ordered_json j;
    j["tool"] = "jsreg";
    j["version"] = m.tool_version;
    j["command"] = m.command;
    j["argv"] = m.argv;
    j["cwd"] = m.cwd;
    j["seed"] = m.seed;
    j["inputs"] = m.inputs;
    j["out_dir"] = m.out_dir;
    j["config"] = m.config;
    nlohmann::ordered_json stages = nlohmann::ordered_json::object();
    for (const auto& [name, sec] : m.stage_seconds) {
        stages[name] = sec;
    }
    j["stage_seconds"] = stages;
    j["stats"] = m.stats;
    return j.dump(2) + "\n";
}

Manifest parse_manifest(std::string_view text) {
    try {
        const auto j = nlohmann::ordered_json::parse(text);
        Manifest m;
        m.tool_version = j.at("version").get<std::string>();
        m.command = j.at("command").get<std::string>();
        m.argv = j.at("argv").get<std::vector<std::string>>();
        m.cwd = j.at("cwd").get<std::string>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
        m.out_dir = j.at("out_dir").get<std::string>();
        m.config = j.at("config").get<std::string>();
        for (const auto& [k, v] : j.at("stage_seconds").items()) {
            m.stage_seconds.emplace_back(k, v.get<double>());
        }
        m.stats = j.at("stats").get<std::map<std::string, double>>();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(fmt::format("manifest: {}", e.what()));
    }
}

} // namespace jsreg::cli
