#include "jsreg/report.hpp"

#include <cmath>

#include <fmt/format.h>

#include "jsreg/error.hpp"

namespace jsreg {

const std::vector<ChartSeries>& line_chart_series() {
    static const std::vector<ChartSeries> series = {
        {"PSNR", "PSNR", "#1f4fd8", false},
        {"NCC", "NCC", "#2ca02c", false},
        {"SSIM", "SSIM", "#8a2be2", false},
        {"rel SSD", "relSSD", "#e6c200", false},
        {"NGF", "NGF", "#d62728", false},
        {"Dice coefficient", "Dice", "#ff69b4", true},
        {"F1 score", "F1", "#8b0000", true},
        {"Jacard score", "Jaccard", "#ff00ff", true},
    };
    return series;
}

std::string xml_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        case '\'': out += "&apos;"; break;
        default: out += c;
        }
    }
    return out;
}

MeanSd mean_sd(const std::vector<double>& v) {
    double sum = 0.0;
    std::size_t n = 0;
    for (double x : v) {
        if (!std::isnan(x)) {
            sum += x;
            ++n;
        }
    }
    if (n == 0) {
        return {std::nan(""), std::nan("")};
    }
    const double mean = sum / static_cast<double>(n);
    if (n == 1) {
        return {mean, 0.0};
    }
    double ss = 0.0;
    for (double x : v) {
        if (!std::isnan(x)) {
            ss += (x - mean) * (x - mean);
        }
    }
    return {mean, std::sqrt(ss / static_cast<double>(n - 1))};
}

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 60.0;
constexpr double kRight = 190.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;

double plotted(std::string_view column, double v) { return column == "PSNR" ? v / 100.0 : v; }

std::string svg_open(std::string_view title) {
    std::string s = fmt::format(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\">\n"
        "<rect x=\"0\" y=\"0\" width=\"{0}\" height=\"{1}\" fill=\"white\"/>\n"
        "<text x=\"{2}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\">{3}</text>\n",
        kWidth, kHeight, kLeft, xml_escape(title));
    const double x1 = kWidth - kRight;
    const double y1 = kHeight - kBottom;
    s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n", kLeft, y1, x1);
    s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n", kLeft, kTop, y1);
    for (int k = 0; k <= 4; ++k) {
        const double v = k / 4.0;
        const double y = y1 - v * (y1 - kTop);
        s += fmt::format("<text x=\"{}\" y=\"{:.1f}\" font-family=\"sans-serif\" font-size=\"11\" "
                         "text-anchor=\"end\">{:.2f}</text>\n",
                         kLeft - 6, y + 4, v);
    }
    return s;
}

double y_of(double v) {
    const double y1 = kHeight - kBottom;
    return y1 - std::clamp(v, 0.0, 1.0) * (y1 - kTop);
}

} // namespace

std::string line_chart_svg(const std::vector<LabeledMetrics>& rows, std::string_view title) {
    std::string s = svg_open(title);
    const double x1 = kWidth - kRight;
    const std::size_t n = rows.size();
    const auto x_of = [&](std::size_t i) {
        return n <= 1 ? (kLeft + x1) / 2.0 : kLeft + (x1 - kLeft) * static_cast<double>(i) / static_cast<double>(n - 1);
    };
    for (std::size_t i = 0; i < n; ++i) {
        s += fmt::format("<text x=\"{:.1f}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\" "
                         "text-anchor=\"middle\">s{}/e{}</text>\n",
                         x_of(i), kHeight - kBottom + 16, rows[i].slice, rows[i].epoch);
    }
    s += fmt::format("<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">slice / epoch "
                     "(PSNR plotted as dB/100)</text>\n",
                     kLeft, kHeight - 12);
    int legend = 0;
    for (const auto& series : line_chart_series()) {
        std::string points;
        for (std::size_t i = 0; i < n; ++i) {
            const double v = metric_by_name(rows[i].row, series.column);
            if (!std::isfinite(v)) {
                continue;
            }
            if (!points.empty()) {
                points += ' ';
            }
            points += fmt::format("{:.2f},{:.2f}", x_of(i), y_of(plotted(series.column, v)));
        }
        const std::string dash = series.dotted ? " stroke-dasharray=\"2,3\"" : "";
        s += fmt::format("<polyline data-series=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"{} "
                         "points=\"{}\"/>\n",
                         xml_escape(series.name), series.color, dash, points);
        const double ly = kTop + 18.0 * legend++;
        s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"{3}\" stroke-width=\"2\"{4}/>\n",
                         x1 + 16, ly, x1 + 40, series.color, dash);
        s += fmt::format("<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n", x1 + 46,
                         ly + 4, xml_escape(series.name));
    }
    s += "</svg>\n";
    return s;
}

std::string bar_chart_svg(const SubjectSummary& subject) {
    std::string s = svg_open(subject.subject);
    const double x1 = kWidth - kRight;
    const double group = (x1 - kLeft) / static_cast<double>(kTable1Columns.size());
    for (std::size_t c = 0; c < kTable1Columns.size(); ++c) {
        const auto column = kTable1Columns[c];
        std::vector<double> v;
        for (const auto& r : subject.rows) {
            v.push_back(plotted(column, metric_by_name(r.row, column)));
        }
        const MeanSd ms = mean_sd(v);
        const double left = kLeft + group * (static_cast<double>(c) + 0.2);
        const double width = group * 0.6;
        const double mean = std::isfinite(ms.mean) ? ms.mean : 0.0;
        const double top = y_of(mean);
        s += fmt::format("<rect data-metric=\"{}\" x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" "
                         "fill=\"#6a8caf\"/>\n",
                         column, left, top, width, (kHeight - kBottom) - top);
        if (std::isfinite(ms.sd) && ms.sd > 0.0) {
            const double cx = left + width / 2.0;
            s += fmt::format("<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{0:.2f}\" y2=\"{2:.2f}\" stroke=\"black\"/>\n",
                             cx, y_of(mean + ms.sd), y_of(mean - ms.sd));
        }
        s += fmt::format("<text x=\"{:.2f}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" "
                         "text-anchor=\"middle\">{}</text>\n",
                         left + width / 2.0, kHeight - kBottom + 16, column);
    }
    s += "</svg>\n";
    return s;
}

namespace {

constexpr std::array<std::string_view, 6> kTable1Headers = {"NCC", "SSIM", "PSNR", "rel SSD", "Dice Coefficient",
                                                            "F1 Score"};
constexpr std::array<std::string_view, 6> kTable2Headers = {"NCC", "SSIM", "PSNR", "relSSD", "Dice Coefficient",
                                                            "F1 score"};
constexpr std::array<std::string_view, 6> kTable2RowLabels = {"NCC", "SSIM", "PSNR", "rel SSD", "Dice Coefficient",
                                                              "F1 score"};

} // namespace

std::string table1_csv(const std::vector<SubjectSummary>& subjects) {
    std::string out = "Subject";
    for (auto h : kTable1Headers) {
        out += fmt::format(",{}", h);
    }
    out += '\n';
    for (const auto& subj : subjects) {
        out += subj.subject;
        for (auto column : kTable1Columns) {
            std::vector<double> v;
            for (const auto& r : subj.rows) {
                v.push_back(metric_by_name(r.row, column));
            }
            const MeanSd ms = mean_sd(v);
            const int digits = column == "PSNR" ? 2 : 3;
            out += fmt::format(",{:.{}f}±{:.{}f}", ms.mean, digits, ms.sd, digits);
        }
        out += '\n';
    }
    return out;
}

CorrelationMatrix table2_matrix(const std::vector<MetricsRow>& rows) {
    std::vector<std::string> labels(kTable1Columns.begin(), kTable1Columns.end());
    return pearson_matrix(rows, labels);
}

std::string table2_csv(const CorrelationMatrix& m) {
    if (m.labels.size() != kTable2Headers.size()) {
        throw InvalidArgument("table2_csv: matrix must cover the six table columns");
    }
    std::string out = "Metric";
    for (auto h : kTable2Headers) {
        out += fmt::format(",{}", h);
    }
    out += '\n';
    for (std::size_t i = 0; i < m.values.size(); ++i) {
        out += kTable2RowLabels[i];
        for (double v : m.values[i]) {
            out += fmt::format(",{:.3f}", v);
        }
        out += '\n';
    }
    return out;
}

} // namespace jsreg
