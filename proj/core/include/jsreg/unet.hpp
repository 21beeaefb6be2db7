#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "jsreg/nnet.hpp"

namespace jsreg {

enum class OutputActivation { Sigmoid, ScaledTanh };

/// Architecture of one encoder-decoder network.
struct UNetSpec {
    int in_channels = 1;
    int base_filters = 32;
    int depth = 3;
    double dropout_rate = 0.1;
    int out_channels = 1;
    OutputActivation out_activation = OutputActivation::Sigmoid;
    double max_disp = 10.0;  // bound of the ScaledTanh output, pixels

    void validate() const;
    [[nodiscard]] int filters_at(int level) const noexcept { return base_filters << level; }
};

struct ParamBlock {
    std::string name;
    std::vector<int> shape;
    std::vector<double> values;
};

/// Trainable parameters in a fixed order determined by the UNetSpec.
struct NetWeights {
    std::vector<ParamBlock> blocks;

    [[nodiscard]] std::size_t parameter_count() const noexcept;
    [[nodiscard]] NetWeights zeros_like() const;
    [[nodiscard]] bool all_finite() const noexcept;
};

// He-normal convolution kernels, zero biases, PReLU slope 0.25, unit BN scale.
// small_output scales the final 1x1 kernel by 1e-3 so a displacement head
// starts near the identity warp.
[[nodiscard]] NetWeights init_weights(const UNetSpec& spec, std::uint64_t seed, bool small_output = false);
[[nodiscard]] NetWeights zero_weights(const UNetSpec& spec);

// Throws DimensionMismatch unless `w` has exactly the block shapes of `spec`.
void check_weights(const UNetSpec& spec, const NetWeights& w);

struct ForwardOptions {
    bool train = true;              // dropout active
    std::uint64_t dropout_seed = 0;
};

struct UnitCache {
    Batch input;
    Batch conv_out;
    BatchNormCache bn;
};

struct BlockCache {
    UnitCache first;
    UnitCache second;
    DropoutMask dropout;
};

/// Activations recorded by unet_forward and consumed by unet_backward.
struct UNetTape {
    int height = 0;
    int width = 0;
    int padded_height = 0;
    int padded_width = 0;
    std::vector<BlockCache> encoder;  // depth + 1 entries, last is the bottleneck
    std::vector<UnitCache> down;      // depth entries (stride-2 units)
    std::vector<UnitCache> up;        // depth entries, index = target level
    std::vector<BlockCache> decoder;  // depth entries, index = level
    Batch head_input;
    Batch raw_output;
};

// Inputs are zero-padded on the right/bottom to a multiple of 2^depth and the
// output is cropped back, so output spatial dims always equal the input dims.
[[nodiscard]] Batch unet_forward(const UNetSpec& spec, const NetWeights& weights, const Batch& input,
                                 const ForwardOptions& opts, UNetTape* tape = nullptr);

struct UNetGradients {
    NetWeights weights;
    Batch input;
};

[[nodiscard]] UNetGradients unet_backward(const UNetSpec& spec, const NetWeights& weights, const UNetTape& tape,
                                          const Batch& grad_output);

struct NetConfig {
    int base_filters = 32;
    int depth = 3;
    double dropout_rate = 0.1;
    double max_disp = 10.0;
    bool desk_scale = false;  // 8 filters, depth 2
};

struct PipelineSpecs {
    UNetSpec segmentation;  // inputs: T, R, noise -> theta (sigmoid)
    UNetSpec registration;  // inputs: theta, warped T, R, noise -> (ux, uy) (scaled tanh)
};

[[nodiscard]] PipelineSpecs build_pipeline(const NetConfig& cfg);

} // namespace jsreg
