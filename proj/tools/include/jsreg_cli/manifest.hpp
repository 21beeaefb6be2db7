#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace jsreg::cli {

/// Reproducibility record written next to every command's outputs.
struct Manifest {
    std::string tool_version;
    std::string command;
    std::vector<std::string> argv;  // arguments after the program name
    std::string cwd;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> inputs;
    std::string out_dir;
    std::string config;  // effective config, canonical text (empty if not applicable)
    std::vector<std::pair<std::string, double>> stage_seconds;
    std::map<std::string, double> stats;
};

[[nodiscard]] std::string format_manifest(const Manifest& m);
[[nodiscard]] Manifest parse_manifest(std::string_view json);

} // namespace jsreg::cli
