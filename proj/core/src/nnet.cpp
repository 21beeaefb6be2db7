#include "jsreg/nnet.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "jsreg/error.hpp"

namespace jsreg {

TensorMap::TensorMap(int c, int h, int w, double fill) : channels(c), height(h), width(w) {
    if (c <= 0 || h <= 0 || w <= 0) {
        throw InvalidArgument(fmt::format("tensor shape must be positive, got {}x{}x{}", c, h, w));
    }
    data.assign(static_cast<std::size_t>(c) * h * w, fill);
}

bool TensorMap::all_finite() const noexcept {
    return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

namespace {

struct Range {
    int lo;
    int hi;  // inclusive; empty when hi < lo
};

// Output indices o in [0, n_out) whose input index o*stride + k - pad lies in [0, n_in).
Range valid_range(int n_in, int n_out, int k, int pad, int stride) {
    int lo = 0;
    while (lo < n_out && lo * stride + k - pad < 0) {
        ++lo;
    }
    int hi = n_out - 1;
    while (hi >= 0 && hi * stride + k - pad > n_in - 1) {
        --hi;
    }
    return {lo, hi};
}

int out_size(int n, int ksize, int stride) { return (n + 2 * (ksize / 2) - ksize) / stride + 1; }

void check_conv(const TensorMap& x, std::span<const double> kernel, int out_channels, int ksize, int stride) {
    if (ksize % 2 != 1 || stride < 1 || out_channels < 1) {
        throw InvalidArgument("conv: odd kernel size, positive stride and output channels required");
    }
    const std::size_t expect = static_cast<std::size_t>(out_channels) * x.channels * ksize * ksize;
    if (kernel.size() != expect) {
        throw DimensionMismatch(fmt::format("conv: kernel has {} values, expected {} ({} -> {} channels, {}x{})",
                                            kernel.size(), expect, x.channels, out_channels, ksize, ksize));
    }
}

} // namespace

TensorMap conv_forward(const TensorMap& x, std::span<const double> kernel, std::span<const double> bias,
                       int out_channels, int ksize, int stride) {
    check_conv(x, kernel, out_channels, ksize, stride);
    if (bias.size() != static_cast<std::size_t>(out_channels)) {
        throw DimensionMismatch("conv: bias length differs from output channels");
    }
    const int pad = ksize / 2;
    const int ho = out_size(x.height, ksize, stride);
    const int wo = out_size(x.width, ksize, stride);
    TensorMap y(out_channels, ho, wo);
    const int kk = ksize * ksize;
    for (int oc = 0; oc < out_channels; ++oc) {
        double* out = y.channel(oc);
        std::fill(out, out + y.plane(), bias[oc]);
        for (int ic = 0; ic < x.channels; ++ic) {
            const double* in = x.channel(ic);
            const double* kp = kernel.data() + (static_cast<std::size_t>(oc) * x.channels + ic) * kk;
            for (int ky = 0; ky < ksize; ++ky) {
                const Range ry = valid_range(x.height, ho, ky, pad, stride);
                for (int kx = 0; kx < ksize; ++kx) {
                    const double w = kp[ky * ksize + kx];
                    if (w == 0.0) {
                        continue;
                    }
                    const Range rx = valid_range(x.width, wo, kx, pad, stride);
                    for (int oy = ry.lo; oy <= ry.hi; ++oy) {
                        const double* irow = in + static_cast<std::size_t>(oy * stride + ky - pad) * x.width;
                        double* orow = out + static_cast<std::size_t>(oy) * wo;
                        const int shift = kx - pad;
                        if (stride == 1) {
                            for (int ox = rx.lo; ox <= rx.hi; ++ox) {
                                orow[ox] += w * irow[ox + shift];
                            }
                        } else {
                            for (int ox = rx.lo; ox <= rx.hi; ++ox) {
                                orow[ox] += w * irow[ox * stride + shift];
                            }
                        }
                    }
                }
            }
        }
    }
    return y;
}

void conv_backward(const TensorMap& x, std::span<const double> kernel, int out_channels, int ksize, int stride,
                   const TensorMap& dy, TensorMap* dx, std::span<double> dkernel, std::span<double> dbias) {
    check_conv(x, kernel, out_channels, ksize, stride);
    const int pad = ksize / 2;
    const int ho = out_size(x.height, ksize, stride);
    const int wo = out_size(x.width, ksize, stride);
    if (dy.channels != out_channels || dy.height != ho || dy.width != wo) {
        throw DimensionMismatch("conv_backward: upstream gradient shape mismatch");
    }
    if (dkernel.size() != kernel.size() || dbias.size() != static_cast<std::size_t>(out_channels)) {
        throw DimensionMismatch("conv_backward: gradient buffer size mismatch");
    }
    if (dx != nullptr) {
        *dx = TensorMap(x.channels, x.height, x.width);
    }
    const int kk = ksize * ksize;
    for (int oc = 0; oc < out_channels; ++oc) {
        const double* g = dy.channel(oc);
        double sum = 0.0;
        for (std::size_t i = 0; i < dy.plane(); ++i) {
            sum += g[i];
        }
        dbias[oc] += sum;
        for (int ic = 0; ic < x.channels; ++ic) {
            const double* in = x.channel(ic);
            double* din = dx != nullptr ? dx->channel(ic) : nullptr;
            const std::size_t koff = (static_cast<std::size_t>(oc) * x.channels + ic) * kk;
            for (int ky = 0; ky < ksize; ++ky) {
                const Range ry = valid_range(x.height, ho, ky, pad, stride);
                for (int kx = 0; kx < ksize; ++kx) {
                    const Range rx = valid_range(x.width, wo, kx, pad, stride);
                    const double w = kernel[koff + ky * ksize + kx];
                    double acc = 0.0;
                    for (int oy = ry.lo; oy <= ry.hi; ++oy) {
                        const std::size_t irow_off = static_cast<std::size_t>(oy * stride + ky - pad) * x.width;
                        const double* irow = in + irow_off;
                        const double* grow = g + static_cast<std::size_t>(oy) * wo;
                        const int shift = kx - pad;
                        if (stride == 1) {
                            for (int ox = rx.lo; ox <= rx.hi; ++ox) {
                                acc += grow[ox] * irow[ox + shift];
                            }
                            if (din != nullptr && w != 0.0) {
                                double* drow = din + irow_off;
                                for (int ox = rx.lo; ox <= rx.hi; ++ox) {
                                    drow[ox + shift] += w * grow[ox];
                                }
                            }
                        } else {
                            for (int ox = rx.lo; ox <= rx.hi; ++ox) {
                                acc += grow[ox] * irow[ox * stride + shift];
                            }
                            if (din != nullptr && w != 0.0) {
                                double* drow = din + irow_off;
                                for (int ox = rx.lo; ox <= rx.hi; ++ox) {
                                    drow[ox * stride + shift] += w * grow[ox];
                                }
                            }
                        }
                    }
                    dkernel[koff + ky * ksize + kx] += acc;
                }
            }
        }
    }
}

TensorMap conv3x3_forward(const TensorMap& x, std::span<const double> kernel, std::span<const double> bias,
                          int out_channels) {
    return conv_forward(x, kernel, bias, out_channels, 3, 1);
}

ConvGradients conv3x3_backward(const TensorMap& x, std::span<const double> kernel, int out_channels,
                               const TensorMap& dy) {
    ConvGradients g;
    g.dkernel.assign(kernel.size(), 0.0);
    g.dbias.assign(static_cast<std::size_t>(out_channels), 0.0);
    conv_backward(x, kernel, out_channels, 3, 1, dy, &g.dx, g.dkernel, g.dbias);
    return g;
}

TensorMap prelu_forward(const TensorMap& x, std::span<const double> slopes) {
    if (slopes.size() != static_cast<std::size_t>(x.channels)) {
        throw DimensionMismatch("prelu: one slope per channel required");
    }
    TensorMap y = x;
    for (int c = 0; c < x.channels; ++c) {
        double* p = y.channel(c);
        const double a = slopes[c];
        for (std::size_t i = 0; i < y.plane(); ++i) {
            if (p[i] < 0.0) {
                p[i] *= a;
            }
        }
    }
    return y;
}

void prelu_backward(const TensorMap& x, std::span<const double> slopes, const TensorMap& dy, TensorMap& dx,
                    std::span<double> dslopes) {
    if (!x.same_shape(dy) || slopes.size() != static_cast<std::size_t>(x.channels) ||
        dslopes.size() != slopes.size()) {
        throw DimensionMismatch("prelu_backward: shape mismatch");
    }
    dx = TensorMap(x.channels, x.height, x.width);
    for (int c = 0; c < x.channels; ++c) {
        const double* xp = x.channel(c);
        const double* gp = dy.channel(c);
        double* dp = dx.channel(c);
        const double a = slopes[c];
        double da = 0.0;
        for (std::size_t i = 0; i < x.plane(); ++i) {
            if (xp[i] < 0.0) {
                dp[i] = a * gp[i];
                da += xp[i] * gp[i];
            } else {
                dp[i] = gp[i];
            }
        }
        dslopes[c] += da;
    }
}

Batch batchnorm_forward(const Batch& x, std::span<const double> gamma, std::span<const double> beta,
                        BatchNormCache* cache) {
    if (x.empty()) {
        throw InvalidArgument("batchnorm: empty batch");
    }
    const int channels = x.front().channels;
    for (const auto& t : x) {
        if (!t.same_shape(x.front())) {
            throw DimensionMismatch("batchnorm: batch members differ in shape");
        }
    }
    if (gamma.size() != static_cast<std::size_t>(channels) || beta.size() != gamma.size()) {
        throw DimensionMismatch("batchnorm: one scale/shift per channel required");
    }
    const std::size_t plane = x.front().plane();
    const double count = static_cast<double>(plane * x.size());
    Batch y = x;
    std::vector<double> inv_std(channels);
    for (int c = 0; c < channels; ++c) {
        double mean = 0.0;
        for (const auto& t : x) {
            const double* p = t.channel(c);
            for (std::size_t i = 0; i < plane; ++i) {
                mean += p[i];
            }
        }
        mean /= count;
        double var = 0.0;
        for (const auto& t : x) {
            const double* p = t.channel(c);
            for (std::size_t i = 0; i < plane; ++i) {
                const double d = p[i] - mean;
                var += d * d;
            }
        }
        var /= count;
        inv_std[c] = 1.0 / std::sqrt(var + kBatchNormEps);
        for (auto& t : y) {
            double* p = t.channel(c);
            for (std::size_t i = 0; i < plane; ++i) {
                p[i] = (p[i] - mean) * inv_std[c];
            }
        }
    }
    if (cache != nullptr) {
        cache->inv_std = inv_std;
        cache->xhat = y;
    }
    for (auto& t : y) {
        for (int c = 0; c < channels; ++c) {
            double* p = t.channel(c);
            for (std::size_t i = 0; i < plane; ++i) {
                p[i] = gamma[c] * p[i] + beta[c];
            }
        }
    }
    return y;
}

Batch batchnorm_backward(const BatchNormCache& cache, std::span<const double> gamma, const Batch& dy,
                         std::span<double> dgamma, std::span<double> dbeta) {
    if (dy.size() != cache.xhat.size()) {
        throw DimensionMismatch("batchnorm_backward: batch size mismatch");
    }
    const int channels = cache.xhat.front().channels;
    const std::size_t plane = cache.xhat.front().plane();
    const double count = static_cast<double>(plane * dy.size());
    Batch dx = dy;
    for (int c = 0; c < channels; ++c) {
        double sum_g = 0.0;
        double sum_gx = 0.0;
        for (std::size_t b = 0; b < dy.size(); ++b) {
            const double* g = dy[b].channel(c);
            const double* xh = cache.xhat[b].channel(c);
            for (std::size_t i = 0; i < plane; ++i) {
                sum_g += g[i];
                sum_gx += g[i] * xh[i];
            }
        }
        dbeta[c] += sum_g;
        dgamma[c] += sum_gx;
        const double scale = gamma[c] * cache.inv_std[c];
        const double mean_g = sum_g / count;
        const double mean_gx = sum_gx / count;
        for (std::size_t b = 0; b < dy.size(); ++b) {
            const double* g = dy[b].channel(c);
            const double* xh = cache.xhat[b].channel(c);
            double* d = dx[b].channel(c);
            for (std::size_t i = 0; i < plane; ++i) {
                d[i] = scale * (g[i] - mean_g - xh[i] * mean_gx);
            }
        }
    }
    return dx;
}

Batch dropout_forward(const Batch& x, double rate, std::uint64_t seed, bool train, DropoutMask* mask) {
    if (!(rate >= 0.0 && rate < 1.0)) {
        throw InvalidArgument(fmt::format("dropout rate must lie in [0, 1), got {}", rate));
    }
    if (mask != nullptr) {
        mask->scale.clear();
    }
    if (!train || rate == 0.0) {
        return x;
    }
    auto rng = make_rng(seed, 0xD0D0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double keep_scale = 1.0 / (1.0 - rate);
    Batch y = x;
    std::vector<std::vector<double>> scales;
    scales.reserve(x.size());
    for (auto& t : y) {
        std::vector<double> s(t.data.size());
        for (std::size_t i = 0; i < t.data.size(); ++i) {
            s[i] = unit(rng) < rate ? 0.0 : keep_scale;
            t.data[i] *= s[i];
        }
        scales.push_back(std::move(s));
    }
    if (mask != nullptr) {
        mask->scale = std::move(scales);
    }
    return y;
}

Batch dropout_backward(const DropoutMask& mask, const Batch& dy) {
    if (mask.scale.empty()) {
        return dy;
    }
    Batch dx = dy;
    for (std::size_t b = 0; b < dx.size(); ++b) {
        for (std::size_t i = 0; i < dx[b].data.size(); ++i) {
            dx[b].data[i] *= mask.scale[b][i];
        }
    }
    return dx;
}

TensorMap upsample2x_forward(const TensorMap& x) {
    TensorMap y(x.channels, x.height * 2, x.width * 2);
    for (int c = 0; c < x.channels; ++c) {
        for (int yy = 0; yy < y.height; ++yy) {
            for (int xx = 0; xx < y.width; ++xx) {
                y.at(c, yy, xx) = x.at(c, yy / 2, xx / 2);
            }
        }
    }
    return y;
}

TensorMap upsample2x_backward(const TensorMap& dy) {
    if (dy.height % 2 != 0 || dy.width % 2 != 0) {
        throw DimensionMismatch("upsample2x_backward: gradient dims must be even");
    }
    TensorMap dx(dy.channels, dy.height / 2, dy.width / 2);
    for (int c = 0; c < dy.channels; ++c) {
        for (int yy = 0; yy < dy.height; ++yy) {
            for (int xx = 0; xx < dy.width; ++xx) {
                dx.at(c, yy / 2, xx / 2) += dy.at(c, yy, xx);
            }
        }
    }
    return dx;
}

TensorMap concat_channels(const TensorMap& first, const TensorMap& second) {
    if (first.height != second.height || first.width != second.width) {
        throw DimensionMismatch("concat_channels: spatial dims differ");
    }
    TensorMap out(first.channels + second.channels, first.height, first.width);
    std::copy(first.data.begin(), first.data.end(), out.data.begin());
    std::copy(second.data.begin(), second.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(first.data.size()));
    return out;
}

std::pair<TensorMap, TensorMap> split_channels(const TensorMap& d, int first_channels) {
    if (first_channels <= 0 || first_channels >= d.channels) {
        throw DimensionMismatch("split_channels: split point outside channel range");
    }
    TensorMap a(first_channels, d.height, d.width);
    TensorMap b(d.channels - first_channels, d.height, d.width);
    const auto mid = d.data.begin() + static_cast<std::ptrdiff_t>(a.data.size());
    std::copy(d.data.begin(), mid, a.data.begin());
    std::copy(mid, d.data.end(), b.data.begin());
    return {std::move(a), std::move(b)};
}

} // namespace jsreg
