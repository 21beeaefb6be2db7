#include "jsreg/geodesic.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <queue>

#include <fmt/format.h>

#include "jsreg/error.hpp"

namespace jsreg {

void MarkerSet::validate(int width, int height) const {
    if (points.empty()) {
        throw InvalidArgument("marker set is empty");
    }
    for (const auto& p : points) {
        if (p.x < 0 || p.y < 0 || p.x >= width || p.y >= height) {
            throw InvalidArgument(fmt::format("marker ({}, {}) outside {}x{} image", p.x, p.y, width, height));
        }
    }
}

void GeodesicConfig::validate() const {
    if (!(beta_g >= 0.0)) {
        throw InvalidArgument(fmt::format("beta_g must be >= 0, got {}", beta_g));
    }
    if (connectivity != 4 && connectivity != 8) {
        throw InvalidArgument(fmt::format("connectivity must be 4 or 8, got {}", connectivity));
    }
}

Image2D edge_cost(const Image2D& image, double beta_g) {
    const auto g = gradient(image);
    Image2D cost(image.width, image.height);
    for (std::size_t i = 0; i < cost.size(); ++i) {
        cost.data[i] = 1.0 + beta_g * (g.gx.data[i] * g.gx.data[i] + g.gy.data[i] * g.gy.data[i]);
    }
    return cost;
}

Image2D geodesic_distance_on_cost(const Image2D& cost, const MarkerSet& markers, int connectivity) {
    markers.validate(cost.width, cost.height);
    if (connectivity != 4 && connectivity != 8) {
        throw InvalidArgument(fmt::format("connectivity must be 4 or 8, got {}", connectivity));
    }
    const int w = cost.width;
    const int h = cost.height;
    constexpr double inf = std::numeric_limits<double>::infinity();
    Image2D dist(w, h, inf);

    struct Step {
        int dx;
        int dy;
        double len;
    };
    static constexpr Step steps[] = {
        {1, 0, 1.0}, {-1, 0, 1.0}, {0, 1, 1.0}, {0, -1, 1.0},
        {1, 1, std::numbers::sqrt2}, {-1, 1, std::numbers::sqrt2},
        {1, -1, std::numbers::sqrt2}, {-1, -1, std::numbers::sqrt2},
    };
    const int n_steps = connectivity == 8 ? 8 : 4;

    using Entry = std::pair<double, int>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
    for (const auto& m : markers.points) {
        const int idx = m.y * w + m.x;
        dist.data[idx] = 0.0;
        queue.emplace(0.0, idx);
    }
    while (!queue.empty()) {
        const auto [d, idx] = queue.top();
        queue.pop();
        if (d > dist.data[idx]) {
            continue;
        }
        const int x = idx % w;
        const int y = idx / w;
        for (int s = 0; s < n_steps; ++s) {
            const int xx = x + steps[s].dx;
            const int yy = y + steps[s].dy;
            if (xx < 0 || yy < 0 || xx >= w || yy >= h) {
                continue;
            }
            const int j = yy * w + xx;
            const double nd = d + 0.5 * (cost.data[idx] + cost.data[j]) * steps[s].len;
            if (nd < dist.data[j]) {
                dist.data[j] = nd;
                queue.emplace(nd, j);
            }
        }
    }
    return dist;
}

Image2D geodesic_distance(const Image2D& image, const MarkerSet& markers, const GeodesicConfig& cfg) {
    cfg.validate();
    return geodesic_distance_on_cost(edge_cost(image, cfg.beta_g), markers, cfg.connectivity);
}

Image2D normalize_distance(const Image2D& d0) {
    const double m = max_value(d0);
    Image2D out(d0.width, d0.height);
    if (!(m > 0.0)) {
        return out;
    }
    for (std::size_t i = 0; i < d0.size(); ++i) {
        out.data[i] = d0.data[i] / m;
    }
    return out;
}

} // namespace jsreg
