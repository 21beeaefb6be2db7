#include "jsreg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "jsreg/error.hpp"

namespace jsreg {

std::array<double, kMetricCount> metric_values(const MetricsRow& r) {
    return {r.ncc, r.ssim, r.psnr_db, r.rel_ssd, r.ngf, r.dice, r.f1, r.jaccard, r.precision, r.recall};
}

MetricsRow metrics_from_values(const std::array<double, kMetricCount>& v) {
    return {v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9]};
}

double metric_by_name(const MetricsRow& row, std::string_view name) {
    const auto values = metric_values(row);
    for (std::size_t i = 0; i < kMetricCount; ++i) {
        if (kMetricColumns[i] == name) {
            return values[i];
        }
    }
    throw InvalidArgument(fmt::format("unknown metric '{}'", name));
}

double psnr(const Image2D& a, const Image2D& b) {
    require_same_shape(a, b, "psnr");
    double mse = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.size());
    if (mse == 0.0) {
        return kPsnrCapDb;
    }
    return std::min(kPsnrCapDb, 10.0 * std::log10(1.0 / mse));
}

namespace {

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kSsimC1 = 0.01 * 0.01;
constexpr double kSsimC2 = 0.03 * 0.03;

double ssim_from_moments(double mu_a, double mu_b, double var_a, double var_b, double cov) {
    return ((2.0 * mu_a * mu_b + kSsimC1) * (2.0 * cov + kSsimC2)) /
           ((mu_a * mu_a + mu_b * mu_b + kSsimC1) * (var_a + var_b + kSsimC2));
}

// Valid-mode separable filtering.
Image2D filter_valid(const Image2D& img, const std::vector<double>& k) {
    const int r = static_cast<int>(k.size());
    const int w = img.width - r + 1;
    const int h = img.height - r + 1;
    Image2D tmp(w, img.height);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = 0; i < r; ++i) {
                acc += k[i] * img.at(x + i, y);
            }
            tmp.at(x, y) = acc;
        }
    }
    Image2D out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = 0; i < r; ++i) {
                acc += k[i] * tmp.at(x, y + i);
            }
            out.at(x, y) = acc;
        }
    }
    return out;
}

} // namespace

double ssim(const Image2D& a, const Image2D& b) {
    require_same_shape(a, b, "ssim");
    if (a.width < kSsimWindow || a.height < kSsimWindow) {
        const double n = static_cast<double>(a.size());
        const double ma = mean_value(a);
        const double mb = mean_value(b);
        double va = 0.0;
        double vb = 0.0;
        double cov = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            va += (a.data[i] - ma) * (a.data[i] - ma);
            vb += (b.data[i] - mb) * (b.data[i] - mb);
            cov += (a.data[i] - ma) * (b.data[i] - mb);
        }
        return ssim_from_moments(ma, mb, va / n, vb / n, cov / n);
    }
    std::vector<double> k(kSsimWindow);
    double sum = 0.0;
    for (int i = 0; i < kSsimWindow; ++i) {
        const double d = i - kSsimWindow / 2;
        k[i] = std::exp(-0.5 * d * d / (kSsimSigma * kSsimSigma));
        sum += k[i];
    }
    for (auto& v : k) {
        v /= sum;
    }
    Image2D aa(a.width, a.height);
    Image2D bb(a.width, a.height);
    Image2D ab(a.width, a.height);
    for (std::size_t i = 0; i < a.size(); ++i) {
        aa.data[i] = a.data[i] * a.data[i];
        bb.data[i] = b.data[i] * b.data[i];
        ab.data[i] = a.data[i] * b.data[i];
    }
    const Image2D mu_a = filter_valid(a, k);
    const Image2D mu_b = filter_valid(b, k);
    const Image2D s_aa = filter_valid(aa, k);
    const Image2D s_bb = filter_valid(bb, k);
    const Image2D s_ab = filter_valid(ab, k);
    double acc = 0.0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
        const double ma = mu_a.data[i];
        const double mb = mu_b.data[i];
        acc += ssim_from_moments(ma, mb, s_aa.data[i] - ma * ma, s_bb.data[i] - mb * mb, s_ab.data[i] - ma * mb);
    }
    return acc / static_cast<double>(mu_a.size());
}

double ncc(const Image2D& a, const Image2D& b) {
    require_same_shape(a, b, "ncc");
    // A constant image has zero variance; its computed mean can be off by an ulp.
    if (min_value(a) == max_value(a) || min_value(b) == max_value(b)) {
        return 0.0;
    }
    const double ma = mean_value(a);
    const double mb = mean_value(b);
    double num = 0.0;
    double va = 0.0;
    double vb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a.data[i] - ma;
        const double db = b.data[i] - mb;
        num += da * db;
        va += da * da;
        vb += db * db;
    }
    if (va <= 0.0 || vb <= 0.0) {
        return 0.0;
    }
    return std::clamp(num / std::sqrt(va * vb), -1.0, 1.0);
}

double rel_ssd(const Image2D& t, const DisplacementField& u, const Image2D& r) {
    require_same_shape(t, r, "rel_ssd");
    const Image2D tw = warp_bilinear(t, u);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        num += (tw.data[i] - r.data[i]) * (tw.data[i] - r.data[i]);
        den += (t.data[i] - r.data[i]) * (t.data[i] - r.data[i]);
    }
    if (den == 0.0) {
        if (num == 0.0) {
            return 0.0;
        }
        throw InvalidArgument("rel_ssd: unregistered pair is identical but the warped pair is not");
    }
    return num / den;
}

double ngf_default_eta(const Image2D& b) {
    const auto g = gradient(b);
    double m = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) {
        m = std::max(m, std::hypot(g.gx.data[i], g.gy.data[i]));
    }
    return std::max(0.01 * m, 1e-8);
}

double ngf(const Image2D& a, const Image2D& b, double eta) {
    require_same_shape(a, b, "ngf");
    if (eta <= 0.0) {
        eta = ngf_default_eta(b);
    }
    const double e2 = eta * eta;
    const auto ga = gradient(a);
    const auto gb = gradient(b);
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double dot = ga.gx.data[i] * gb.gx.data[i] + ga.gy.data[i] * gb.gy.data[i] + e2;
        const double na = ga.gx.data[i] * ga.gx.data[i] + ga.gy.data[i] * ga.gy.data[i] + e2;
        const double nb = gb.gx.data[i] * gb.gx.data[i] + gb.gy.data[i] * gb.gy.data[i] + e2;
        acc += dot * dot / (na * nb);
    }
    return 1.0 - acc / static_cast<double>(a.size());
}

double dice_soft(const Image2D& p, const Image2D& g) {
    require_same_shape(p, g, "dice_soft");
    double inter = 0.0;
    double sp = 0.0;
    double sg = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        inter += p.data[i] * g.data[i];
        sp += p.data[i];
        sg += g.data[i];
    }
    return 2.0 * inter / (sp + sg + 1e-8);
}

namespace {

struct Confusion {
    double tp = 0.0;
    double fp = 0.0;
    double fn = 0.0;
};

Confusion confusion(const Image2D& p, const Image2D& g, double thresh) {
    require_same_shape(p, g, "confusion");
    Confusion c;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const bool pred = p.data[i] >= thresh;
        const bool truth = g.data[i] >= 0.5;
        c.tp += pred && truth ? 1.0 : 0.0;
        c.fp += pred && !truth ? 1.0 : 0.0;
        c.fn += !pred && truth ? 1.0 : 0.0;
    }
    return c;
}

double safe_ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

} // namespace

F1Result f1_hard(const Image2D& p, const Image2D& g, double thresh) {
    const auto c = confusion(p, g, thresh);
    F1Result r;
    r.precision = safe_ratio(c.tp, c.tp + c.fp);
    r.recall = safe_ratio(c.tp, c.tp + c.fn);
    r.f1 = safe_ratio(2.0 * c.tp, 2.0 * c.tp + c.fp + c.fn);
    return r;
}

double jaccard_hard(const Image2D& p, const Image2D& g, double thresh) {
    const auto c = confusion(p, g, thresh);
    return safe_ratio(c.tp, c.tp + c.fp + c.fn);
}

MetricsRow evaluate_registration(const Image2D& t, const Image2D& r, const DisplacementField& u) {
    require_same_shape(t, r, "evaluate");
    require_same_shape(t, u, "evaluate");
    const Image2D tw = warp_bilinear(t, u);
    MetricsRow row;
    row.ncc = ncc(tw, r);
    row.ssim = ssim(tw, r);
    row.psnr_db = psnr(tw, r);
    try {
        row.rel_ssd = rel_ssd(t, u, r);
    } catch (const InvalidArgument&) {
        row.rel_ssd = std::numeric_limits<double>::quiet_NaN();  // T == R, no baseline
    }
    row.ngf = ngf(tw, r);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    row.dice = row.f1 = row.jaccard = row.precision = row.recall = nan;
    return row;
}

MetricsRow evaluate(const Image2D& t, const Image2D& r, const DisplacementField& u, const Image2D& theta,
                    const Image2D& g_mask) {
    require_same_shape(theta, g_mask, "evaluate segmentation");
    MetricsRow row = evaluate_registration(t, r, u);
    row.dice = dice_soft(theta, g_mask);
    const auto f = f1_hard(theta, g_mask);
    row.f1 = f.f1;
    row.precision = f.precision;
    row.recall = f.recall;
    row.jaccard = jaccard_hard(theta, g_mask);
    return row;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.empty()) {
        throw InvalidArgument("pearson: columns must be non-empty and of equal length");
    }
    const auto [xlo, xhi] = std::minmax_element(x.begin(), x.end());
    const auto [ylo, yhi] = std::minmax_element(y.begin(), y.end());
    if (*xlo == *xhi || *ylo == *yhi) {
        return 0.0;
    }
    const double n = static_cast<double>(x.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) {
        return 0.0;
    }
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

CorrelationMatrix pearson_matrix(const std::vector<MetricsRow>& rows, const std::vector<std::string>& labels) {
    if (rows.size() < 3) {
        throw InvalidArgument(fmt::format("pearson_matrix needs at least 3 rows, got {}", rows.size()));
    }
    std::vector<std::vector<double>> cols;
    for (const auto& label : labels) {
        std::vector<double> c;
        c.reserve(rows.size());
        for (const auto& r : rows) {
            c.push_back(metric_by_name(r, label));
        }
        cols.push_back(std::move(c));
    }
    CorrelationMatrix m{labels, std::vector<std::vector<double>>(labels.size(), std::vector<double>(labels.size()))};
    for (std::size_t i = 0; i < labels.size(); ++i) {
        m.values[i][i] = 1.0;
        for (std::size_t j = i + 1; j < labels.size(); ++j) {
            const double v = pearson(cols[i], cols[j]);
            m.values[i][j] = v;
            m.values[j][i] = v;
        }
    }
    return m;
}

} // namespace jsreg
