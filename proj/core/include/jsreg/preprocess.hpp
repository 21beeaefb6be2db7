#pragma once

#include <optional>
#include <utility>

#include "jsreg/image.hpp"

namespace jsreg {

struct CropRect {
    int x0 = 0;
    int y0 = 0;
    int w = 0;
    int h = 0;
    friend bool operator==(const CropRect&, const CropRect&) = default;
};

struct PreprocessConfig {
    std::optional<CropRect> crop_rect;  // nullopt == "none"
    int target_width = 320;
    int target_height = 320;
    int clahe_tiles_x = 8;
    int clahe_tiles_y = 8;
    double clahe_clip = 2.0;
    // Low-contrast tumors are segmented at the source resolution.
    bool skip_resize_low_contrast = false;

    void validate() const;
};

inline constexpr int kHistogramBins = 256;

// (v - min) / (max - min); a constant image maps to all zeros.
[[nodiscard]] Image2D normalize_minmax(const Image2D& img);

// CDF matching of src onto ref with 256 bins. Both CDFs are piecewise linear
// inside each bin, so the map is continuous and monotone non-decreasing.
[[nodiscard]] Image2D histogram_match(const Image2D& src, const Image2D& ref);

// Contrast-limited adaptive histogram equalization on [0, 1] data.
// clip is relative to the mean bin count and the clipped excess is spread
// uniformly until no bin exceeds it. Each tile maps through its inclusive bin
// CDF; a tile grid finer than the image falls back to a single global tile.
[[nodiscard]] Image2D clahe(const Image2D& img, int tiles_x, int tiles_y, double clip);

struct PreprocessedPair {
    SliceStack template_stack;
    SliceStack reference_stack;
};

// crop -> normalize -> match T onto R -> CLAHE (both) -> resize, per slice.
[[nodiscard]] PreprocessedPair preprocess_pair(const SliceStack& template_stack, const SliceStack& reference_stack,
                                               const PreprocessConfig& cfg, int jobs = 1);

// Binarize at 0.5, open with a disc of open_radius, then close with a disc of close_radius.
[[nodiscard]] Image2D postprocess_mask(const Image2D& mask, int open_radius, int close_radius);

// Binary morphology with a disc structuring element. Pixels outside the image
// never contribute to a dilation and never veto an erosion.
[[nodiscard]] Image2D binary_dilate(const Image2D& mask, int radius);
[[nodiscard]] Image2D binary_erode(const Image2D& mask, int radius);

// Two-sample Kolmogorov-Smirnov distance between the pixel value distributions.
[[nodiscard]] double ks_distance(const Image2D& a, const Image2D& b);

} // namespace jsreg
