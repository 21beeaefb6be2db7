#pragma once

#include <vector>

#include "jsreg/image.hpp"

namespace jsreg {

struct PixelPoint {
    int x = 0;
    int y = 0;
    friend bool operator==(const PixelPoint&, const PixelPoint&) = default;
};

/// User-marked pixels that seed the selective segmentation.
struct MarkerSet {
    std::vector<PixelPoint> points;

    // Throws InvalidArgument when empty or a point falls outside w x h.
    void validate(int width, int height) const;
    friend bool operator==(const MarkerSet&, const MarkerSet&) = default;
};

struct GeodesicConfig {
    double beta_g = 1000.0;
    int connectivity = 8;  // 4 or 8

    void validate() const;
};

// cost(x) = 1 + beta_g * |grad T(x)|^2
[[nodiscard]] Image2D edge_cost(const Image2D& image, double beta_g);

// Marker-rooted shortest-path cost over the pixel grid (Dijkstra). The edge
// between neighbours p, q weighs 0.5 * (cost(p) + cost(q)) * |p - q|.
[[nodiscard]] Image2D geodesic_distance(const Image2D& image, const MarkerSet& markers, const GeodesicConfig& cfg);

// Same search on an explicit cost map; exposed for testing and reuse.
[[nodiscard]] Image2D geodesic_distance_on_cost(const Image2D& cost, const MarkerSet& markers, int connectivity);

// D = D0 / max(D0); an all-zero D0 stays all zero.
[[nodiscard]] Image2D normalize_distance(const Image2D& d0);

} // namespace jsreg
