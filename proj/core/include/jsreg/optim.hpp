#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "jsreg/energy.hpp"
#include "jsreg/geodesic.hpp"
#include "jsreg/metrics.hpp"
#include "jsreg/unet.hpp"

namespace jsreg {

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    long step = 0;
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

// Bias-corrected Adam update in place. `name` identifies the parameter block
// in the error raised for a non-finite gradient.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr,
               std::string_view name = "params");

enum class RunMode { Dip, Direct };

struct RunConfig;

/// State handed to RunConfig::observer once per slice and epoch, before the update.
struct EpochSnapshot {
    int epoch = 0;
    std::size_t slice = 0;
    const Image2D* theta = nullptr;
    const DisplacementField* u = nullptr;
    EnergyBreakdown energy;
};

struct RunConfig {
    RunMode mode = RunMode::Dip;
    int epochs = 200;
    double lr1 = 0.001;  // U-Net 1 (segmentation)
    double lr2 = 0.001;  // U-Net 2 (deformation)
    // Field-space descent works on raw pixels, so it needs larger steps than the network weights.
    double direct_lr_theta = 0.05;
    double direct_lr_u = 0.05;
    std::vector<int> checkpoint_epochs{50, 200};
    std::uint64_t seed = 0;
    std::function<void(const EpochSnapshot&)> observer;

    void validate() const;
};

/// One slice ready for optimization: the energy inputs plus optional truth.
struct SliceProblem {
    Image2D t;
    Image2D r;
    Image2D d;  // normalized geodesic distance
    MarkerSet markers;
    EnergyParams params;
    std::optional<Image2D> g_mask;  // ground truth in R geometry
};

struct RegionMeanOverrides {
    std::optional<double> a1;
    std::optional<double> a2;
    std::optional<double> c1;
    std::optional<double> c2;
    friend bool operator==(const RegionMeanOverrides&, const RegionMeanOverrides&) = default;
};

struct SliceSetup {
    EnergyParams energy;
    GeodesicConfig geodesic;
    double roi_radius = 10.0;
    RegionMeanOverrides fixed_means;  // unset entries are measured
};

// Computes D from T and the markers, and fills a1/a2 (from T) and c1/c2 (from R)
// with ROI/background means around the markers unless fixed in the setup.
[[nodiscard]] SliceProblem prepare_slice(Image2D t, Image2D r, const MarkerSet& markers, const SliceSetup& setup,
                                         std::optional<Image2D> g_mask = std::nullopt);

struct EpochRecord {
    int epoch = 0;
    EnergyBreakdown energy;
};

struct CheckpointRow {
    int epoch = 0;
    MetricsRow metrics;
};

struct RunOutputs {
    Image2D theta_t;             // segmentation in T geometry
    Image2D theta_r;             // warp(theta_t, u), segmentation in R geometry
    DisplacementField u;
    Image2D warped_t;            // warp(T, u)
    std::vector<EpochRecord> history;
    std::vector<CheckpointRow> checkpoints;
    bool diverged = false;
    std::string failure;
};

// Adam descent directly on the theta and u fields (theta clamped to [0, 1]).
[[nodiscard]] RunOutputs run_direct(const SliceProblem& problem, const RunConfig& cfg);

// Per-instance training of the two networks on the whole stack; one output per slice.
[[nodiscard]] std::vector<RunOutputs> run_dip(const std::vector<SliceProblem>& stack, const RunConfig& cfg,
                                              const NetConfig& net);

// Fixed uniform [0, 1] noise channel for a slice.
[[nodiscard]] Image2D noise_channel(int width, int height, std::uint64_t seed, std::uint64_t stream);

} // namespace jsreg
