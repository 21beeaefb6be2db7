#include "jsreg/phantom.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "jsreg/error.hpp"
#include "jsreg/preprocess.hpp"
#include "jsreg/random.hpp"

namespace jsreg {

void PhantomSpec::validate() const {
    if (size < 16) {
        throw InvalidArgument(fmt::format("phantom: size must be >= 16, got {}", size));
    }
    if (!(tumor.radius > 0.0) || tumor.intensity < 0.0 || tumor.intensity > 1.0) {
        throw InvalidArgument("phantom: tumor radius must be > 0 and intensity in [0, 1]");
    }
    if (!(deform_amp >= 0.0) || !(noise_sigma >= 0.0) || !(contrast_gamma > 0.0) || !(blur_sigma >= 0.0) ||
        !(deform_scale >= 0.0) || !(edge_width > 0.0) || !(texture >= 0.0) || !(texture_scale > 0.0)) {
        throw InvalidArgument("phantom: amplitudes, noise and blur must be >= 0, gamma and edge width > 0");
    }
    const auto inside = [&](std::optional<double> c) {
        return !c || (*c - tumor.radius >= 0.0 && *c + tumor.radius <= size - 1);
    };
    if (!inside(tumor.cx) || !inside(tumor.cy)) {
        throw InvalidArgument("phantom: tumor disc must lie inside the image");
    }
}

DisplacementField smooth_random_field(std::uint64_t seed, int width, int height, double amplitude_px,
                                      double scale_px) {
    if (width <= 0 || height <= 0) {
        throw InvalidArgument("smooth_random_field: dimensions must be positive");
    }
    if (!(amplitude_px >= 0.0) || !(scale_px > 0.0)) {
        throw InvalidArgument("smooth_random_field: amplitude must be >= 0 and scale > 0");
    }
    DisplacementField u(width, height);
    if (amplitude_px == 0.0) {
        return u;
    }
    auto rng = make_rng(seed, 0xF1E1D);
    std::normal_distribution<double> normal(0.0, 1.0);
    Image2D nx(width, height);
    Image2D ny(width, height);
    for (auto& v : nx.data) {
        v = normal(rng);
    }
    for (auto& v : ny.data) {
        v = normal(rng);
    }
    nx = gaussian_smooth(nx, scale_px);
    ny = gaussian_smooth(ny, scale_px);
    u.ux = std::move(nx.data);
    u.uy = std::move(ny.data);
    const double m = u.max_magnitude();
    if (m == 0.0) {
        return DisplacementField(width, height);
    }
    const double s = amplitude_px / m;
    for (std::size_t i = 0; i < u.size(); ++i) {
        u.ux[i] *= s;
        u.uy[i] *= s;
    }
    // Rescaling can land one ulp off; pin the peak exactly.
    std::size_t peak = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double mag = std::hypot(u.ux[i], u.uy[i]);
        if (mag > best) {
            best = mag;
            peak = i;
        }
    }
    const double fix = amplitude_px / best;
    u.ux[peak] *= fix;
    u.uy[peak] *= fix;
    return u;
}

namespace {

double logistic_inside(double signed_dist, double width) { return 1.0 / (1.0 + std::exp(signed_dist / width)); }

Image2D low_frequency_background(std::uint64_t seed, int size) {
    auto rng = make_rng(seed, 0xBA5E);
    std::normal_distribution<double> normal(0.0, 1.0);
    Image2D bg(size, size);
    for (auto& v : bg.data) {
        v = normal(rng);
    }
    bg = normalize_minmax(gaussian_smooth(bg, size / 8.0));
    for (auto& v : bg.data) {
        v = 0.02 + 0.10 * v;
    }
    return bg;
}

} // namespace

PhantomInstance make_phantom(std::uint64_t seed, const PhantomSpec& spec) {
    spec.validate();
    const int n = spec.size;
    const double c = (n - 1) / 2.0;

    auto rng = make_rng(seed, 0x7A4);
    std::uniform_real_distribution<double> jitter(-0.1 * n, 0.1 * n);
    PhantomInstance out;
    out.seed = seed;
    out.tumor_cx = spec.tumor.cx.value_or(c + jitter(rng));
    out.tumor_cy = spec.tumor.cy.value_or(c + jitter(rng));

    const double ax = 0.40 * n;
    const double ay = 0.32 * n;
    const double rad = spec.tumor.radius;
    Image2D r = low_frequency_background(seed, n);
    Image2D texture(n, n);
    if (spec.texture > 0.0) {
        auto trng = make_rng(seed, 0x7E47);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (auto& v : texture.data) {
            v = normal(trng);
        }
        texture = normalize_minmax(gaussian_smooth(texture, spec.texture_scale));
    }
    out.mask_true = Image2D(n, n);
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            // Approximate signed distance to the ellipse rim via the normalized radius.
            const double q = std::hypot((x - c) / ax, (y - c) / ay);
            const double e = logistic_inside((q - 1.0) * std::min(ax, ay), spec.edge_width);
            const double dt = std::hypot(x - out.tumor_cx, y - out.tumor_cy) - rad;
            const double s = logistic_inside(dt, spec.edge_width);
            double v = r.at(x, y);
            v = v + e * (0.30 + spec.texture * (texture.at(x, y) - 0.5) - v);
            v = v + s * (spec.tumor.intensity - v);
            r.at(x, y) = v;
            out.mask_true.at(x, y) = dt <= 0.0 ? 1.0 : 0.0;
        }
    }
    out.r = normalize_minmax(r);

    const double scale = spec.deform_scale > 0.0 ? spec.deform_scale : n / 6.0;
    out.u_true = smooth_random_field(mix_seed(seed, 17), n, n, spec.deform_amp, scale);

    Image2D t = warp_bilinear(out.r, out.u_true);
    for (auto& v : t.data) {
        v = std::pow(std::clamp(v, 0.0, 1.0), spec.contrast_gamma);
    }
    t = gaussian_smooth(t, spec.blur_sigma);
    if (spec.noise_sigma > 0.0) {
        auto nrng = make_rng(seed, 0x401);
        std::normal_distribution<double> normal(0.0, spec.noise_sigma);
        for (auto& v : t.data) {
            v += normal(nrng);
        }
    }
    for (auto& v : t.data) {
        v = std::clamp(v, 0.0, 1.0);
    }
    out.t = std::move(t);

    // T(y) shows R(y + u_true(y)); solve y + u_true(y) = center by fixed-point iteration.
    const Image2D ux(n, n, out.u_true.ux);
    const Image2D uy(n, n, out.u_true.uy);
    const auto sample = [n](const Image2D& f, double px, double py) {
        px = std::clamp(px, 0.0, n - 1.0);
        py = std::clamp(py, 0.0, n - 1.0);
        const int x0 = std::min(static_cast<int>(px), n - 2);
        const int y0 = std::min(static_cast<int>(py), n - 2);
        const double wx = px - x0;
        const double wy = py - y0;
        return (1 - wy) * ((1 - wx) * f.at(x0, y0) + wx * f.at(x0 + 1, y0)) +
               wy * ((1 - wx) * f.at(x0, y0 + 1) + wx * f.at(x0 + 1, y0 + 1));
    };
    double yx = out.tumor_cx;
    double yy = out.tumor_cy;
    for (int it = 0; it < 50; ++it) {
        const double nx = out.tumor_cx - sample(ux, yx, yy);
        const double ny = out.tumor_cy - sample(uy, yx, yy);
        yx = nx;
        yy = ny;
    }
    const int mx = std::clamp(static_cast<int>(std::lround(yx)), 0, n - 1);
    const int my = std::clamp(static_cast<int>(std::lround(yy)), 0, n - 1);
    out.markers.points.push_back({mx, my});
    return out;
}

} // namespace jsreg
