#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "jsreg/optim.hpp"

namespace jsreg::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitBadInput = 2;
inline constexpr int kExitDivergence = 3;
inline constexpr int kExitIo = 4;

struct PhantomOptions {
    std::uint64_t seed = 0;
    int size = 64;
    double deform_amp = 3.0;
    double noise = 0.02;
    fs::path out_dir = ".";
};

struct PreprocessOptions {
    std::optional<fs::path> config;
    fs::path t;
    fs::path r;
    fs::path out_dir = ".";
    int jobs = 1;
};

struct RunOptions {
    std::optional<fs::path> config;
    fs::path t;
    fs::path r;
    fs::path markers;
    std::optional<fs::path> mask;
    std::optional<RunMode> mode;
    std::optional<int> epochs;
    std::optional<std::uint64_t> seed;
    fs::path out_dir = ".";
    int jobs = 1;
};

struct ReportOptions {
    std::vector<fs::path> metrics;
    fs::path out_dir = ".";
};

// Each command writes its outputs plus manifest.json into out_dir. `argv` is
// recorded verbatim in the manifest for replay.
void cmd_phantom(const PhantomOptions& o, const std::vector<std::string>& argv);
void cmd_preprocess(const PreprocessOptions& o, const std::vector<std::string>& argv);
// Throws DivergenceError after writing partial outputs when a slice diverged.
void cmd_run(const RunOptions& o, const std::vector<std::string>& argv);
void cmd_report(const ReportOptions& o, const std::vector<std::string>& argv);
// Re-executes the command recorded in a manifest from its original working directory.
int cmd_replay(const fs::path& manifest, std::ostream& out, std::ostream& err);

// Full command line (arguments after the program name) to exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace jsreg::cli
