#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "jsreg/image.hpp"

namespace jsreg {

inline constexpr double kPsnrCapDb = 99.0;

/// Registration metrics compare warp(T, u) with R; segmentation metrics
/// compare a probability map with a binary ground truth.
struct MetricsRow {
    double ncc = 0.0;
    double ssim = 0.0;
    double psnr_db = 0.0;
    double rel_ssd = 0.0;
    double ngf = 0.0;
    double dice = 0.0;
    double f1 = 0.0;
    double jaccard = 0.0;
    double precision = 0.0;
    double recall = 0.0;
};

inline constexpr std::size_t kMetricCount = 10;

// CSV column names, in file order.
inline constexpr std::array<std::string_view, kMetricCount> kMetricColumns = {
    "NCC", "SSIM", "PSNR", "relSSD", "NGF", "Dice", "F1", "Jaccard", "precision", "recall"};

[[nodiscard]] std::array<double, kMetricCount> metric_values(const MetricsRow& row);
[[nodiscard]] MetricsRow metrics_from_values(const std::array<double, kMetricCount>& v);
// Value of a column by its CSV name; throws InvalidArgument for unknown names.
[[nodiscard]] double metric_by_name(const MetricsRow& row, std::string_view name);

// 10 log10(1 / MSE) for data on [0, 1], capped at 99 dB.
[[nodiscard]] double psnr(const Image2D& a, const Image2D& b);

// Mean local SSIM over valid 11x11 Gaussian (sigma 1.5) windows, K1 = 0.01,
// K2 = 0.03, L = 1. Images smaller than the window use one global window.
[[nodiscard]] double ssim(const Image2D& a, const Image2D& b);

// Pearson correlation of the pixel values; 0 when either image is constant.
[[nodiscard]] double ncc(const Image2D& a, const Image2D& b);

// sum (warp(T, u) - R)^2 / sum (T - R)^2. T == R gives 0 for a perfect
// match and throws InvalidArgument otherwise.
[[nodiscard]] double rel_ssd(const Image2D& t, const DisplacementField& u, const Image2D& r);

// 1 - mean (<grad a, grad b> + eta^2)^2 / ((|grad a|^2 + eta^2)(|grad b|^2 + eta^2)).
// eta <= 0 selects 1% of the largest gradient magnitude of b.
[[nodiscard]] double ngf(const Image2D& a, const Image2D& b, double eta = -1.0);
[[nodiscard]] double ngf_default_eta(const Image2D& b);

[[nodiscard]] double dice_soft(const Image2D& p, const Image2D& g);

struct F1Result {
    double f1 = 0.0;
    double precision = 0.0;
    double recall = 0.0;
};

[[nodiscard]] F1Result f1_hard(const Image2D& p, const Image2D& g, double thresh = 0.5);
[[nodiscard]] double jaccard_hard(const Image2D& p, const Image2D& g, double thresh = 0.5);

// theta must already live in the geometry of g_mask.
[[nodiscard]] MetricsRow evaluate(const Image2D& t, const Image2D& r, const DisplacementField& u,
                                  const Image2D& theta, const Image2D& g_mask);
// Registration-only variant; segmentation fields are NaN. Both variants report
// rel SSD as NaN where rel_ssd would throw.
[[nodiscard]] MetricsRow evaluate_registration(const Image2D& t, const Image2D& r, const DisplacementField& u);

struct CorrelationMatrix {
    std::vector<std::string> labels;
    std::vector<std::vector<double>> values;
};

[[nodiscard]] double pearson(const std::vector<double>& x, const std::vector<double>& y);

// Pairwise Pearson coefficients of the selected CSV columns. A constant
// column correlates 0 with every other column.
[[nodiscard]] CorrelationMatrix pearson_matrix(const std::vector<MetricsRow>& rows,
                                               const std::vector<std::string>& labels);

} // namespace jsreg
