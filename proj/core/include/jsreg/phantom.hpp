#pragma once

#include <cstdint>
#include <optional>

#include "jsreg/geodesic.hpp"
#include "jsreg/image.hpp"

namespace jsreg {

struct TumorSpec {
    // Center in R geometry; unset means a seeded position inside the ellipse.
    std::optional<double> cx;
    std::optional<double> cy;
    double radius = 8.0;
    double intensity = 0.9;
};

struct PhantomSpec {
    int size = 64;
    TumorSpec tumor;
    double deform_amp = 3.0;      // max |u_true| in pixels
    double deform_scale = 0.0;    // smoothing scale of u_true; 0 means size / 6
    double noise_sigma = 0.02;
    double contrast_gamma = 0.8;
    double blur_sigma = 0.8;
    double edge_width = 0.7;      // logistic softness of the tumor and ellipse rims
    double texture = 0.15;        // peak-to-peak tissue texture inside the ellipse
    double texture_scale = 2.0;

    void validate() const;
};

struct PhantomInstance {
    Image2D r;                 // reference (sharp)
    Image2D t;                 // template: degraded warp of r
    DisplacementField u_true;  // t = degrade(warp(r, u_true))
    Image2D mask_true;         // tumor disc in R geometry
    std::uint64_t seed = 0;
    double tumor_cx = 0.0;
    double tumor_cy = 0.0;
    MarkerSet markers;         // tumor center mapped into T geometry
};

// Gaussian-smoothed white noise per channel, rescaled so max |u| == amplitude_px.
[[nodiscard]] DisplacementField smooth_random_field(std::uint64_t seed, int width, int height, double amplitude_px,
                                                    double scale_px);

[[nodiscard]] PhantomInstance make_phantom(std::uint64_t seed, const PhantomSpec& spec = {});

} // namespace jsreg
