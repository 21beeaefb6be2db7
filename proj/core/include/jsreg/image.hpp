#pragma once

#include <cstddef>
#include <string_view>
#include <utility>
#include <vector>

namespace jsreg {

/// Single-channel 2D scalar field, row-major, double precision.
struct Image2D {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    Image2D() = default;
    Image2D(int w, int h, double fill = 0.0);
    Image2D(int w, int h, std::vector<double> values);

    [[nodiscard]] std::size_t size() const noexcept { return data.size(); }
    [[nodiscard]] double& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
    [[nodiscard]] double at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
    [[nodiscard]] bool same_shape(const Image2D& o) const noexcept {
        return width == o.width && height == o.height;
    }
    friend bool operator==(const Image2D&, const Image2D&) = default;
};

/// Per-pixel displacement u = (ux, uy) in pixel units. A sample for pixel x
/// is taken at x + u(x).
struct DisplacementField {
    int width = 0;
    int height = 0;
    std::vector<double> ux;
    std::vector<double> uy;

    DisplacementField() = default;
    DisplacementField(int w, int h, double fx = 0.0, double fy = 0.0);

    [[nodiscard]] std::size_t size() const noexcept { return ux.size(); }
    [[nodiscard]] bool all_finite() const noexcept;
    [[nodiscard]] double max_magnitude() const noexcept;
    friend bool operator==(const DisplacementField&, const DisplacementField&) = default;
};

/// Ordered batch of equally sized slices with their original slice numbers.
struct SliceStack {
    std::vector<Image2D> slices;
    std::vector<int> slice_indices;

    SliceStack() = default;
    explicit SliceStack(std::vector<Image2D> s);
    SliceStack(std::vector<Image2D> s, std::vector<int> indices);

    [[nodiscard]] std::size_t size() const noexcept { return slices.size(); }
    // Throws InvalidArgument when empty or the slices disagree in shape.
    void validate() const;
};

struct ImageGradient {
    Image2D gx;
    Image2D gy;
};

struct WarpGradients {
    Image2D d_img;
    DisplacementField d_u;
};

void require_same_shape(const Image2D& a, const Image2D& b, std::string_view what);
void require_same_shape(const Image2D& a, const DisplacementField& u, std::string_view what);

// Central differences inside, one-sided differences on the border rows/columns.
[[nodiscard]] ImageGradient gradient(const Image2D& img);

// Separable, normalized Gaussian with radius ceil(3*sigma) and edge replication.
// sigma == 0 returns the input unchanged.
[[nodiscard]] Image2D gaussian_smooth(const Image2D& img, double sigma);

// Exact transpose of gaussian_smooth (replicated borders fold weight back
// onto the edge pixels, so this is not the same operator near the border).
[[nodiscard]] Image2D gaussian_smooth_adjoint(const Image2D& img, double sigma);

[[nodiscard]] std::vector<double> gaussian_kernel(double sigma);

// output(x) = bilinear sample of img at x + u(x), sample position clamped to the image rectangle.
[[nodiscard]] Image2D warp_bilinear(const Image2D& img, const DisplacementField& u);

// Backward pass of warp_bilinear for a scalar loss L with dL/d(output) = upstream.
// The displacement derivative is zero along an axis whose sample coordinate was clamped.
[[nodiscard]] WarpGradients warp_gradients(const Image2D& img, const DisplacementField& u,
                                           const Image2D& upstream);

// Align-corners-false bilinear resampling.
[[nodiscard]] Image2D resize_bilinear(const Image2D& img, int new_w, int new_h);

[[nodiscard]] Image2D crop(const Image2D& img, int x0, int y0, int w, int h);

[[nodiscard]] double min_value(const Image2D& img);
[[nodiscard]] double max_value(const Image2D& img);
[[nodiscard]] double mean_value(const Image2D& img);

} // namespace jsreg
