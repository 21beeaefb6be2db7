#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "jsreg/random.hpp"

namespace jsreg {

/// Activation carrier: channels x height x width, row-major within a channel.
struct TensorMap {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> data;

    TensorMap() = default;
    TensorMap(int c, int h, int w, double fill = 0.0);

    [[nodiscard]] std::size_t plane() const noexcept { return static_cast<std::size_t>(height) * width; }
    [[nodiscard]] double* channel(int c) noexcept { return data.data() + c * plane(); }
    [[nodiscard]] const double* channel(int c) const noexcept { return data.data() + c * plane(); }
    [[nodiscard]] double& at(int c, int y, int x) { return data[c * plane() + static_cast<std::size_t>(y) * width + x]; }
    [[nodiscard]] double at(int c, int y, int x) const {
        return data[c * plane() + static_cast<std::size_t>(y) * width + x];
    }
    [[nodiscard]] bool same_shape(const TensorMap& o) const noexcept {
        return channels == o.channels && height == o.height && width == o.width;
    }
    [[nodiscard]] bool all_finite() const noexcept;
    friend bool operator==(const TensorMap&, const TensorMap&) = default;
};

/// One TensorMap per slice of the stack.
using Batch = std::vector<TensorMap>;

inline constexpr double kBatchNormEps = 1e-5;

// Cross-correlation with zero padding ksize/2. Kernel layout [out][in][ky][kx].
// Output spatial size is ceil(H / stride) x ceil(W / stride).
[[nodiscard]] TensorMap conv_forward(const TensorMap& x, std::span<const double> kernel, std::span<const double> bias,
                                     int out_channels, int ksize, int stride);
// Accumulates into dkernel/dbias; writes dx when non-null.
void conv_backward(const TensorMap& x, std::span<const double> kernel, int out_channels, int ksize, int stride,
                   const TensorMap& dy, TensorMap* dx, std::span<double> dkernel, std::span<double> dbias);

struct ConvGradients {
    TensorMap dx;
    std::vector<double> dkernel;
    std::vector<double> dbias;
};

[[nodiscard]] TensorMap conv3x3_forward(const TensorMap& x, std::span<const double> kernel,
                                        std::span<const double> bias, int out_channels);
[[nodiscard]] ConvGradients conv3x3_backward(const TensorMap& x, std::span<const double> kernel, int out_channels,
                                             const TensorMap& dy);

// Per-channel slope for negative inputs.
[[nodiscard]] TensorMap prelu_forward(const TensorMap& x, std::span<const double> slopes);
void prelu_backward(const TensorMap& x, std::span<const double> slopes, const TensorMap& dy, TensorMap& dx,
                    std::span<double> dslopes);

struct BatchNormCache {
    std::vector<double> inv_std;
    Batch xhat;
};

// Statistics per channel over every slice and pixel of the batch.
[[nodiscard]] Batch batchnorm_forward(const Batch& x, std::span<const double> gamma, std::span<const double> beta,
                                      BatchNormCache* cache);
[[nodiscard]] Batch batchnorm_backward(const BatchNormCache& cache, std::span<const double> gamma, const Batch& dy,
                                       std::span<double> dgamma, std::span<double> dbeta);

/// Inverted-dropout keep/scale factors (0 or 1/(1-rate)); empty means identity.
struct DropoutMask {
    std::vector<std::vector<double>> scale;
};

[[nodiscard]] Batch dropout_forward(const Batch& x, double rate, std::uint64_t seed, bool train, DropoutMask* mask);
[[nodiscard]] Batch dropout_backward(const DropoutMask& mask, const Batch& dy);

[[nodiscard]] TensorMap upsample2x_forward(const TensorMap& x);
[[nodiscard]] TensorMap upsample2x_backward(const TensorMap& dy);

// Channel layout: all of `first`, then all of `second`.
[[nodiscard]] TensorMap concat_channels(const TensorMap& first, const TensorMap& second);
[[nodiscard]] std::pair<TensorMap, TensorMap> split_channels(const TensorMap& d, int first_channels);

} // namespace jsreg
