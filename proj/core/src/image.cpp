#include "jsreg/image.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "jsreg/error.hpp"

namespace jsreg {

Image2D::Image2D(int w, int h, double fill) : width(w), height(h) {
    if (w <= 0 || h <= 0) {
        throw InvalidArgument(fmt::format("image dimensions must be positive, got {}x{}", w, h));
    }
    data.assign(static_cast<std::size_t>(w) * h, fill);
}

Image2D::Image2D(int w, int h, std::vector<double> values) : width(w), height(h), data(std::move(values)) {
    if (w <= 0 || h <= 0) {
        throw InvalidArgument(fmt::format("image dimensions must be positive, got {}x{}", w, h));
    }
    if (data.size() != static_cast<std::size_t>(w) * h) {
        throw InvalidArgument(fmt::format("image data length {} does not match {}x{}", data.size(), w, h));
    }
}

DisplacementField::DisplacementField(int w, int h, double fx, double fy) : width(w), height(h) {
    if (w <= 0 || h <= 0) {
        throw InvalidArgument(fmt::format("field dimensions must be positive, got {}x{}", w, h));
    }
    ux.assign(static_cast<std::size_t>(w) * h, fx);
    uy.assign(static_cast<std::size_t>(w) * h, fy);
}

bool DisplacementField::all_finite() const noexcept {
    auto finite = [](double v) { return std::isfinite(v); };
    return std::all_of(ux.begin(), ux.end(), finite) && std::all_of(uy.begin(), uy.end(), finite);
}

double DisplacementField::max_magnitude() const noexcept {
    double m = 0.0;
    for (std::size_t i = 0; i < ux.size(); ++i) {
        m = std::max(m, std::hypot(ux[i], uy[i]));
    }
    return m;
}

SliceStack::SliceStack(std::vector<Image2D> s) : slices(std::move(s)) {
    slice_indices.resize(slices.size());
    std::iota(slice_indices.begin(), slice_indices.end(), 0);
}

SliceStack::SliceStack(std::vector<Image2D> s, std::vector<int> indices)
    : slices(std::move(s)), slice_indices(std::move(indices)) {}

void SliceStack::validate() const {
    if (slices.empty()) {
        throw InvalidArgument("slice stack is empty");
    }
    if (slice_indices.size() != slices.size()) {
        throw InvalidArgument("slice stack index list length differs from slice count");
    }
    for (const auto& s : slices) {
        if (!s.same_shape(slices.front())) {
            throw DimensionMismatch("slices in a stack must share dimensions");
        }
    }
}

void require_same_shape(const Image2D& a, const Image2D& b, std::string_view what) {
    if (!a.same_shape(b)) {
        throw DimensionMismatch(fmt::format("{}: {}x{} vs {}x{}", what, a.width, a.height, b.width, b.height));
    }
}

void require_same_shape(const Image2D& a, const DisplacementField& u, std::string_view what) {
    if (a.width != u.width || a.height != u.height) {
        throw DimensionMismatch(fmt::format("{}: image {}x{} vs field {}x{}", what, a.width, a.height, u.width,
                                            u.height));
    }
}

ImageGradient gradient(const Image2D& img) {
    const int w = img.width;
    const int h = img.height;
    ImageGradient g{Image2D(w, h), Image2D(w, h)};
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double dx = 0.0;
            if (w > 1) {
                if (x == 0) {
                    dx = img.at(1, y) - img.at(0, y);
                } else if (x == w - 1) {
                    dx = img.at(x, y) - img.at(x - 1, y);
                } else {
                    dx = 0.5 * (img.at(x + 1, y) - img.at(x - 1, y));
                }
            }
            double dy = 0.0;
            if (h > 1) {
                if (y == 0) {
                    dy = img.at(x, 1) - img.at(x, 0);
                } else if (y == h - 1) {
                    dy = img.at(x, y) - img.at(x, y - 1);
                } else {
                    dy = 0.5 * (img.at(x, y + 1) - img.at(x, y - 1));
                }
            }
            g.gx.at(x, y) = dx;
            g.gy.at(x, y) = dy;
        }
    }
    return g;
}

std::vector<double> gaussian_kernel(double sigma) {
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
        throw InvalidArgument(fmt::format("gaussian sigma must be finite and >= 0, got {}", sigma));
    }
    if (sigma == 0.0) {
        return {1.0};
    }
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
        k[i + radius] = v;
        sum += v;
    }
    for (auto& v : k) {
        v /= sum;
    }
    return k;
}

namespace {

// 1D pass along x (horizontal == true) or y with clamped indices.
Image2D convolve_axis(const Image2D& img, const std::vector<double>& k, bool horizontal) {
    const int radius = static_cast<int>(k.size() / 2);
    const int w = img.width;
    const int h = img.height;
    Image2D out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                const double v = horizontal ? img.at(std::clamp(x + i, 0, w - 1), y)
                                            : img.at(x, std::clamp(y + i, 0, h - 1));
                acc += k[i + radius] * v;
            }
            out.at(x, y) = acc;
        }
    }
    return out;
}

Image2D convolve_axis_adjoint(const Image2D& img, const std::vector<double>& k, bool horizontal) {
    const int radius = static_cast<int>(k.size() / 2);
    const int w = img.width;
    const int h = img.height;
    Image2D out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double g = img.at(x, y);
            for (int i = -radius; i <= radius; ++i) {
                if (horizontal) {
                    out.at(std::clamp(x + i, 0, w - 1), y) += k[i + radius] * g;
                } else {
                    out.at(x, std::clamp(y + i, 0, h - 1)) += k[i + radius] * g;
                }
            }
        }
    }
    return out;
}

} // namespace

Image2D gaussian_smooth(const Image2D& img, double sigma) {
    const auto k = gaussian_kernel(sigma);
    if (k.size() == 1) {
        return img;
    }
    return convolve_axis(convolve_axis(img, k, true), k, false);
}

Image2D gaussian_smooth_adjoint(const Image2D& img, double sigma) {
    const auto k = gaussian_kernel(sigma);
    if (k.size() == 1) {
        return img;
    }
    // (Cy * Cx)^T = Cx^T * Cy^T
    return convolve_axis_adjoint(convolve_axis_adjoint(img, k, false), k, true);
}

namespace {

struct AxisSample {
    int i0;
    int i1;
    double frac;
    bool clamped;
};

AxisSample axis_sample(double p, int n) {
    AxisSample s{0, 0, 0.0, false};
    const double hi = static_cast<double>(n - 1);
    if (p < 0.0 || p > hi) {
        s.clamped = true;
        p = std::clamp(p, 0.0, hi);
    }
    if (n == 1) {
        return s;
    }
    int i0 = static_cast<int>(std::floor(p));
    i0 = std::min(i0, n - 2);
    s.i0 = i0;
    s.i1 = i0 + 1;
    s.frac = p - i0;
    return s;
}

} // namespace

Image2D warp_bilinear(const Image2D& img, const DisplacementField& u) {
    require_same_shape(img, u, "warp_bilinear");
    const int w = img.width;
    const int h = img.height;
    Image2D out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            const auto sx = axis_sample(x + u.ux[i], w);
            const auto sy = axis_sample(y + u.uy[i], h);
            const double v00 = img.at(sx.i0, sy.i0);
            const double v10 = img.at(sx.i1, sy.i0);
            const double v01 = img.at(sx.i0, sy.i1);
            const double v11 = img.at(sx.i1, sy.i1);
            out.data[i] = (1.0 - sy.frac) * ((1.0 - sx.frac) * v00 + sx.frac * v10) +
                          sy.frac * ((1.0 - sx.frac) * v01 + sx.frac * v11);
        }
    }
    return out;
}

WarpGradients warp_gradients(const Image2D& img, const DisplacementField& u, const Image2D& upstream) {
    require_same_shape(img, u, "warp_gradients");
    require_same_shape(img, upstream, "warp_gradients upstream");
    const int w = img.width;
    const int h = img.height;
    WarpGradients g{Image2D(w, h), DisplacementField(w, h)};
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            const double up = upstream.data[i];
            if (up == 0.0) {
                continue;
            }
            const auto sx = axis_sample(x + u.ux[i], w);
            const auto sy = axis_sample(y + u.uy[i], h);
            const double v00 = img.at(sx.i0, sy.i0);
            const double v10 = img.at(sx.i1, sy.i0);
            const double v01 = img.at(sx.i0, sy.i1);
            const double v11 = img.at(sx.i1, sy.i1);
            if (!sx.clamped && w > 1) {
                g.d_u.ux[i] = up * ((1.0 - sy.frac) * (v10 - v00) + sy.frac * (v11 - v01));
            }
            if (!sy.clamped && h > 1) {
                g.d_u.uy[i] = up * ((1.0 - sx.frac) * (v01 - v00) + sx.frac * (v11 - v10));
            }
            g.d_img.at(sx.i0, sy.i0) += up * (1.0 - sx.frac) * (1.0 - sy.frac);
            g.d_img.at(sx.i1, sy.i0) += up * sx.frac * (1.0 - sy.frac);
            g.d_img.at(sx.i0, sy.i1) += up * (1.0 - sx.frac) * sy.frac;
            g.d_img.at(sx.i1, sy.i1) += up * sx.frac * sy.frac;
        }
    }
    return g;
}

Image2D resize_bilinear(const Image2D& img, int new_w, int new_h) {
    if (new_w <= 0 || new_h <= 0) {
        throw InvalidArgument(fmt::format("resize target must be positive, got {}x{}", new_w, new_h));
    }
    if (new_w == img.width && new_h == img.height) {
        return img;
    }
    const double sx = static_cast<double>(img.width) / new_w;
    const double sy = static_cast<double>(img.height) / new_h;
    Image2D out(new_w, new_h);
    for (int y = 0; y < new_h; ++y) {
        const auto ay = axis_sample((y + 0.5) * sy - 0.5, img.height);
        for (int x = 0; x < new_w; ++x) {
            const auto ax = axis_sample((x + 0.5) * sx - 0.5, img.width);
            out.at(x, y) = (1.0 - ay.frac) * ((1.0 - ax.frac) * img.at(ax.i0, ay.i0) + ax.frac * img.at(ax.i1, ay.i0)) +
                           ay.frac * ((1.0 - ax.frac) * img.at(ax.i0, ay.i1) + ax.frac * img.at(ax.i1, ay.i1));
        }
    }
    return out;
}

Image2D crop(const Image2D& img, int x0, int y0, int w, int h) {
    if (x0 < 0 || y0 < 0 || w <= 0 || h <= 0 || x0 + w > img.width || y0 + h > img.height) {
        throw InvalidArgument(fmt::format("crop rectangle ({}, {}, {}, {}) outside {}x{} image", x0, y0, w, h,
                                          img.width, img.height));
    }
    Image2D out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            out.at(x, y) = img.at(x0 + x, y0 + y);
        }
    }
    return out;
}

double min_value(const Image2D& img) { return *std::min_element(img.data.begin(), img.data.end()); }
double max_value(const Image2D& img) { return *std::max_element(img.data.begin(), img.data.end()); }
double mean_value(const Image2D& img) {
    return std::accumulate(img.data.begin(), img.data.end(), 0.0) / static_cast<double>(img.data.size());
}

} // namespace jsreg
