#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "jsreg/io.hpp"
#include "jsreg/metrics.hpp"

namespace jsreg {

struct ChartSeries {
    std::string_view name;    // legend label
    std::string_view column;  // metrics CSV column
    std::string_view color;
    bool dotted = false;
};

// Per-slice chart series: legend label, CSV column, color and dash style.
[[nodiscard]] const std::vector<ChartSeries>& line_chart_series();

// One polyline per series over the rows in order. PSNR is drawn on a dB/100 scale.
[[nodiscard]] std::string line_chart_svg(const std::vector<LabeledMetrics>& rows, std::string_view title);

struct SubjectSummary {
    std::string subject;
    std::vector<LabeledMetrics> rows;
};

// Columns of the mean +- SD table.
inline constexpr std::array<std::string_view, 6> kTable1Columns = {"NCC", "SSIM", "PSNR", "relSSD", "Dice", "F1"};

// Grouped bars (mean with SD whiskers) per subject for the table columns.
[[nodiscard]] std::string bar_chart_svg(const SubjectSummary& subject);

// Header "Subject,NCC,SSIM,PSNR,rel SSD,Dice Coefficient,F1 Score"; cells "mean±SD".
[[nodiscard]] std::string table1_csv(const std::vector<SubjectSummary>& subjects);

// Square Pearson table over the summary-table columns; needs >= 3 rows in total.
[[nodiscard]] CorrelationMatrix table2_matrix(const std::vector<MetricsRow>& rows);
[[nodiscard]] std::string table2_csv(const CorrelationMatrix& m);

struct MeanSd {
    double mean = 0.0;
    double sd = 0.0;
};

// Sample standard deviation (n - 1); a single value has SD 0. NaNs are skipped.
[[nodiscard]] MeanSd mean_sd(const std::vector<double>& v);

[[nodiscard]] std::string xml_escape(std::string_view s);

} // namespace jsreg
