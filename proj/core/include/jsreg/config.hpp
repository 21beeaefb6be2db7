#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "jsreg/optim.hpp"
#include "jsreg/preprocess.hpp"

namespace jsreg {

struct MaskPostprocess {
    int open_radius = 1;
    int close_radius = 1;
};

/// Everything a job reads from the flat `key = value` config file.
struct JobConfig {
    SliceSetup slice;            // energy weights, geodesic settings, ROI radius
    RunConfig run;               // observer is never serialized
    NetConfig net;
    PreprocessConfig preprocess;
    MaskPostprocess postprocess;

    void validate() const;
};

// Canonical key order used by format_config.
[[nodiscard]] const std::vector<std::string_view>& config_keys();

// `#` starts a comment; blank lines are ignored; unknown or repeated keys throw
// InvalidArgument with the line number. If `epochs` is set but
// `checkpoint_epochs` is not, default checkpoints beyond `epochs` are dropped.
[[nodiscard]] JobConfig parse_config(std::string_view text);
[[nodiscard]] JobConfig parse_config(std::string_view text, JobConfig base);

// Every key, canonical order, shortest round-trip numbers.
[[nodiscard]] std::string format_config(const JobConfig& cfg);

[[nodiscard]] std::string_view mode_name(RunMode m);
[[nodiscard]] RunMode parse_mode(std::string_view s);

} // namespace jsreg
