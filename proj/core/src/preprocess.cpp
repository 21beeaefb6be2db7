#include "jsreg/preprocess.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "jsreg/error.hpp"
#include "jsreg/parallel.hpp"

namespace jsreg {

void PreprocessConfig::validate() const {
    if (target_width <= 0 || target_height <= 0) {
        throw InvalidArgument(fmt::format("target size must be positive, got {}x{}", target_width, target_height));
    }
    if (clahe_tiles_x < 1 || clahe_tiles_y < 1) {
        throw InvalidArgument("clahe tile grid must be at least 1x1");
    }
    if (!(clahe_clip >= 1.0)) {
        throw InvalidArgument(fmt::format("clahe clip limit must be >= 1, got {}", clahe_clip));
    }
    if (crop_rect && (crop_rect->w <= 0 || crop_rect->h <= 0 || crop_rect->x0 < 0 || crop_rect->y0 < 0)) {
        throw InvalidArgument("crop rectangle must have non-negative origin and positive size");
    }
}

Image2D normalize_minmax(const Image2D& img) {
    const double lo = min_value(img);
    const double hi = max_value(img);
    Image2D out(img.width, img.height);
    if (!(hi > lo)) {
        return out;
    }
    const double range = hi - lo;
    for (std::size_t i = 0; i < img.size(); ++i) {
        out.data[i] = std::clamp((img.data[i] - lo) / range, 0.0, 1.0);
    }
    return out;
}

namespace {

using Histogram = std::array<double, kHistogramBins>;

struct BinPos {
    int bin;
    double frac;
};

BinPos locate(double v) {
    const double s = std::clamp(v, 0.0, 1.0) * kHistogramBins;
    const int b = std::min(kHistogramBins - 1, static_cast<int>(std::floor(s)));
    return {b, std::clamp(s - b, 0.0, 1.0)};
}

// Piecewise-linear CDF: cumulative[b] is the mass strictly below bin b.
struct BinnedCdf {
    Histogram hist{};
    Histogram below{};
    double total = 0.0;

    void finalize() {
        double acc = 0.0;
        for (int b = 0; b < kHistogramBins; ++b) {
            below[b] = acc;
            acc += hist[b];
        }
        total = acc;
    }

    [[nodiscard]] double cdf(double v) const {
        const auto p = locate(v);
        return (below[p.bin] + p.frac * hist[p.bin]) / total;
    }

    // Equalization lookup: the inclusive bin CDF, approached with unit slope
    // inside the bin but never below the mass strictly under it. A uniform
    // histogram therefore maps every value to itself.
    [[nodiscard]] double equalize(double v) const {
        const auto p = locate(v);
        const double upper = (below[p.bin] + hist[p.bin]) / total;
        return std::max(below[p.bin] / total, upper - (1.0 - p.frac) / kHistogramBins);
    }

    [[nodiscard]] double inverse(double p) const {
        const double target = p * total;
        int last = 0;
        for (int b = 0; b < kHistogramBins; ++b) {
            if (hist[b] <= 0.0) {
                continue;
            }
            last = b;
            if (below[b] + hist[b] > target) {
                const double f = std::clamp((target - below[b]) / hist[b], 0.0, 1.0);
                return (b + f) / kHistogramBins;
            }
        }
        return (last + 1.0) / kHistogramBins;
    }
};

BinnedCdf histogram_of(const Image2D& img, int x0 = 0, int y0 = 0, int x1 = -1, int y1 = -1) {
    if (x1 < 0) {
        x1 = img.width;
    }
    if (y1 < 0) {
        y1 = img.height;
    }
    BinnedCdf h;
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            h.hist[locate(img.at(x, y)).bin] += 1.0;
        }
    }
    return h;
}

} // namespace

Image2D histogram_match(const Image2D& src, const Image2D& ref) {
    auto hs = histogram_of(src);
    auto hr = histogram_of(ref);
    hs.finalize();
    hr.finalize();
    Image2D out(src.width, src.height);
    for (std::size_t i = 0; i < src.size(); ++i) {
        out.data[i] = std::clamp(hr.inverse(hs.cdf(src.data[i])), 0.0, 1.0);
    }
    return out;
}

namespace {

struct TileAxis {
    int i0;
    int i1;
    double frac;
};

// Position of pixel p between tile centers along one axis.
TileAxis tile_axis(int p, int n, int tiles) {
    const double tile_len = static_cast<double>(n) / tiles;
    const double g = (p + 0.5) / tile_len - 0.5;
    if (g <= 0.0) {
        return {0, 0, 0.0};
    }
    if (g >= tiles - 1) {
        return {tiles - 1, tiles - 1, 0.0};
    }
    const int i0 = static_cast<int>(std::floor(g));
    return {i0, i0 + 1, g - i0};
}

} // namespace

Image2D clahe(const Image2D& img, int tiles_x, int tiles_y, double clip) {
    if (tiles_x < 1 || tiles_y < 1) {
        throw InvalidArgument("clahe tile grid must be at least 1x1");
    }
    if (!(clip >= 1.0)) {
        throw InvalidArgument(fmt::format("clahe clip limit must be >= 1, got {}", clip));
    }
    if (tiles_x > img.width || tiles_y > img.height) {
        tiles_x = 1;
        tiles_y = 1;
    }

    std::vector<BinnedCdf> maps(static_cast<std::size_t>(tiles_x) * tiles_y);
    for (int ty = 0; ty < tiles_y; ++ty) {
        for (int tx = 0; tx < tiles_x; ++tx) {
            const int x0 = tx * img.width / tiles_x;
            const int x1 = (tx + 1) * img.width / tiles_x;
            const int y0 = ty * img.height / tiles_y;
            const int y1 = (ty + 1) * img.height / tiles_y;
            auto h = histogram_of(img, x0, y0, x1, y1);
            const double count = static_cast<double>((x1 - x0) * (y1 - y0));
            if (std::isfinite(clip)) {
                // Redistribution can push bins over the limit again; repeat until the excess vanishes.
                const double limit = clip * count / kHistogramBins;
                for (int pass = 0; pass < 64; ++pass) {
                    double excess = 0.0;
                    for (auto& v : h.hist) {
                        if (v > limit) {
                            excess += v - limit;
                            v = limit;
                        }
                    }
                    const double share = excess / kHistogramBins;
                    for (auto& v : h.hist) {
                        v += share;
                    }
                    if (excess <= 1e-12 * count) {
                        break;
                    }
                }
            }
            h.finalize();
            maps[static_cast<std::size_t>(ty) * tiles_x + tx] = h;
        }
    }

    Image2D out(img.width, img.height);
    for (int y = 0; y < img.height; ++y) {
        const auto ay = tile_axis(y, img.height, tiles_y);
        for (int x = 0; x < img.width; ++x) {
            const auto ax = tile_axis(x, img.width, tiles_x);
            const double v = img.at(x, y);
            auto m = [&](int i, int j) { return maps[static_cast<std::size_t>(j) * tiles_x + i].equalize(v); };
            const double top = (1.0 - ax.frac) * m(ax.i0, ay.i0) + ax.frac * m(ax.i1, ay.i0);
            const double bottom = (1.0 - ax.frac) * m(ax.i0, ay.i1) + ax.frac * m(ax.i1, ay.i1);
            out.at(x, y) = std::clamp((1.0 - ay.frac) * top + ay.frac * bottom, 0.0, 1.0);
        }
    }
    return out;
}

PreprocessedPair preprocess_pair(const SliceStack& template_stack, const SliceStack& reference_stack,
                                 const PreprocessConfig& cfg, int jobs) {
    cfg.validate();
    template_stack.validate();
    reference_stack.validate();
    if (template_stack.size() != reference_stack.size()) {
        throw InvalidArgument(fmt::format("slice count mismatch: template has {}, reference has {}",
                                          template_stack.size(), reference_stack.size()));
    }

    const std::size_t n = template_stack.size();
    std::vector<Image2D> t_out(n);
    std::vector<Image2D> r_out(n);
    parallel_for(n, jobs, [&](std::size_t i) {
        Image2D t = template_stack.slices[i];
        Image2D r = reference_stack.slices[i];
        if (cfg.crop_rect) {
            const auto& c = *cfg.crop_rect;
            t = crop(t, c.x0, c.y0, c.w, c.h);
            r = crop(r, c.x0, c.y0, c.w, c.h);
        }
        t = normalize_minmax(t);
        r = normalize_minmax(r);
        t = histogram_match(t, r);
        t = clahe(t, cfg.clahe_tiles_x, cfg.clahe_tiles_y, cfg.clahe_clip);
        r = clahe(r, cfg.clahe_tiles_x, cfg.clahe_tiles_y, cfg.clahe_clip);
        if (!cfg.skip_resize_low_contrast) {
            t = resize_bilinear(t, cfg.target_width, cfg.target_height);
            r = resize_bilinear(r, cfg.target_width, cfg.target_height);
        }
        t_out[i] = std::move(t);
        r_out[i] = std::move(r);
    });
    return {SliceStack(std::move(t_out), template_stack.slice_indices),
            SliceStack(std::move(r_out), reference_stack.slice_indices)};
}

namespace {

std::vector<std::pair<int, int>> disc_offsets(int radius) {
    std::vector<std::pair<int, int>> offs;
    for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
            if (dx * dx + dy * dy <= radius * radius) {
                offs.emplace_back(dx, dy);
            }
        }
    }
    return offs;
}

Image2D binarize(const Image2D& mask) {
    Image2D out(mask.width, mask.height);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        out.data[i] = mask.data[i] >= 0.5 ? 1.0 : 0.0;
    }
    return out;
}

} // namespace

Image2D binary_dilate(const Image2D& mask, int radius) {
    if (radius < 0) {
        throw InvalidArgument("morphology radius must be >= 0");
    }
    const auto offs = disc_offsets(radius);
    Image2D out(mask.width, mask.height);
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            for (auto [dx, dy] : offs) {
                const int xx = x + dx;
                const int yy = y + dy;
                if (xx >= 0 && yy >= 0 && xx < mask.width && yy < mask.height && mask.at(xx, yy) >= 0.5) {
                    out.at(x, y) = 1.0;
                    break;
                }
            }
        }
    }
    return out;
}

Image2D binary_erode(const Image2D& mask, int radius) {
    if (radius < 0) {
        throw InvalidArgument("morphology radius must be >= 0");
    }
    const auto offs = disc_offsets(radius);
    Image2D out(mask.width, mask.height);
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            bool keep = true;
            for (auto [dx, dy] : offs) {
                const int xx = x + dx;
                const int yy = y + dy;
                if (xx >= 0 && yy >= 0 && xx < mask.width && yy < mask.height && mask.at(xx, yy) < 0.5) {
                    keep = false;
                    break;
                }
            }
            out.at(x, y) = keep ? 1.0 : 0.0;
        }
    }
    return out;
}

Image2D postprocess_mask(const Image2D& mask, int open_radius, int close_radius) {
    if (open_radius < 0 || close_radius < 0) {
        throw InvalidArgument("morphology radius must be >= 0");
    }
    Image2D m = binarize(mask);
    m = binary_dilate(binary_erode(m, open_radius), open_radius);
    m = binary_erode(binary_dilate(m, close_radius), close_radius);
    return m;
}

double ks_distance(const Image2D& a, const Image2D& b) {
    std::vector<double> sa = a.data;
    std::vector<double> sb = b.data;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    const double na = static_cast<double>(sa.size());
    const double nb = static_cast<double>(sb.size());
    std::size_t i = 0;
    std::size_t j = 0;
    double d = 0.0;
    while (i < sa.size() && j < sb.size()) {
        const double v = std::min(sa[i], sb[j]);
        while (i < sa.size() && sa[i] <= v) {
            ++i;
        }
        while (j < sb.size() && sb[j] <= v) {
            ++j;
        }
        d = std::max(d, std::abs(i / na - j / nb));
    }
    return d;
}

} // namespace jsreg
