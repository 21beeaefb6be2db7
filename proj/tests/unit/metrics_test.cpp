#include <doctest.h>

#include <cmath>

#include "jsreg/error.hpp"
#include "jsreg/metrics.hpp"
#include "jsreg/phantom.hpp"
#include "oracles.hpp"

using namespace jsreg;

namespace {

Image2D binary(std::uint64_t seed, int w, int h, double p_on) {
    auto m = oracle::random_image(seed, w, h);
    for (auto& v : m.data) {
        v = v < p_on ? 1.0 : 0.0;
    }
    return m;
}

// Gradient-alignment distance written out from its definition.
double ngf_oracle(const Image2D& a, const Image2D& b, double eta) {
    auto grad = [](const Image2D& img, int x, int y) {
        auto at = [&](int xx, int yy) { return img.at(xx, yy); };
        const int w = img.width;
        const int h = img.height;
        const double gx = x == 0 ? at(1, y) - at(0, y) : x == w - 1 ? at(w - 1, y) - at(w - 2, y)
                                                                    : 0.5 * (at(x + 1, y) - at(x - 1, y));
        const double gy = y == 0 ? at(x, 1) - at(x, 0) : y == h - 1 ? at(x, h - 1) - at(x, h - 2)
                                                                    : 0.5 * (at(x, y + 1) - at(x, y - 1));
        return std::pair{gx, gy};
    };
    double acc = 0.0;
    for (int y = 0; y < a.height; ++y) {
        for (int x = 0; x < a.width; ++x) {
            const auto [ax, ay] = grad(a, x, y);
            const auto [bx, by] = grad(b, x, y);
            const double num = ax * bx + ay * by + eta * eta;
            acc += num * num / ((ax * ax + ay * ay + eta * eta) * (bx * bx + by * by + eta * eta));
        }
    }
    return 1.0 - acc / static_cast<double>(a.size());
}

} // namespace

TEST_CASE("psnr") {
    const auto a = oracle::random_image(1, 12, 12);
    CHECK(psnr(a, a) == kPsnrCapDb);
    auto b = a;
    for (auto& v : b.data) {
        v += 0.1;
    }
    CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-12));
    for (std::uint64_t s = 0; s < 5; ++s) {
        const auto x = oracle::random_image(s, 9, 13);
        const auto y = oracle::random_image(s + 20, 9, 13);
        CHECK(std::abs(psnr(x, y) - oracle::psnr(x, y)) < 1e-10);
    }
    CHECK_THROWS_AS(static_cast<void>(psnr(a, Image2D(3, 3))), DimensionMismatch);
}

TEST_CASE("ssim") {
    const auto a = oracle::random_image(2, 20, 17);
    CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ssim(Image2D(16, 16, 0.3), Image2D(16, 16, 0.3)) == doctest::Approx(1.0).epsilon(1e-12));
    for (std::uint64_t s = 0; s < 5; ++s) {
        const auto x = oracle::random_image(s, 16 + static_cast<int>(s), 14);
        auto y = oracle::random_image(s + 50, 16 + static_cast<int>(s), 14);
        for (std::size_t i = 0; i < y.size(); ++i) {
            y.data[i] = 0.6 * x.data[i] + 0.4 * y.data[i];
        }
        CHECK(std::abs(ssim(x, y) - oracle::ssim(x, y)) < 1e-8);
        CHECK(ssim(x, y) == doctest::Approx(ssim(y, x)).epsilon(1e-13));
    }
    // Smaller than the window: single global window.
    const auto s1 = oracle::random_image(7, 6, 5);
    const auto s2 = oracle::random_image(8, 6, 5);
    const double ma = oracle::mean(s1.data);
    const double mb = oracle::mean(s2.data);
    double va = 0.0;
    double vb = 0.0;
    double cab = 0.0;
    for (std::size_t i = 0; i < s1.size(); ++i) {
        va += (s1.data[i] - ma) * (s1.data[i] - ma);
        vb += (s2.data[i] - mb) * (s2.data[i] - mb);
        cab += (s1.data[i] - ma) * (s2.data[i] - mb);
    }
    const double n = static_cast<double>(s1.size());
    va /= n;
    vb /= n;
    cab /= n;
    const double c1 = 1e-4;
    const double c2 = 9e-4;
    const double expect = ((2 * ma * mb + c1) * (2 * cab + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    CHECK(ssim(s1, s2) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("ncc") {
    const auto a = oracle::random_image(3, 10, 10);
    CHECK(ncc(a, a) == doctest::Approx(1.0).epsilon(1e-14));
    auto neg = a;
    for (auto& v : neg.data) {
        v = 1.0 - v;
    }
    CHECK(ncc(a, neg) == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(ncc(a, Image2D(10, 10, 0.2)) == 0.0);
    for (std::uint64_t s = 0; s < 5; ++s) {
        const auto x = oracle::random_image(s, 8, 11);
        const auto y = oracle::random_image(s + 9, 8, 11);
        CHECK(std::abs(ncc(x, y) - oracle::pearson(x.data, y.data)) < 1e-12);
        CHECK(ncc(x, y) == ncc(y, x));
    }
}

TEST_CASE("rel_ssd") {
    const auto t = oracle::random_image(4, 10, 10);
    const auto r = oracle::random_image(5, 10, 10);
    CHECK(rel_ssd(t, DisplacementField(10, 10), r) == 1.0);
    CHECK(rel_ssd(r, DisplacementField(10, 10), r) == 0.0);

    // Warped template equals R exactly.
    const auto u = oracle::random_field(6, 10, 10, 2.0);
    const auto target = warp_bilinear(t, u);
    CHECK(rel_ssd(t, u, target) == 0.0);
    CHECK_THROWS_AS(static_cast<void>(rel_ssd(r, u, r)), InvalidArgument);

    const auto ph = make_phantom(1);
    CHECK(rel_ssd(ph.t, DisplacementField(ph.r.width, ph.r.height), ph.r) == 1.0);
    const auto uf = oracle::random_field(9, 64, 64, 1.0);
    const auto tw = oracle::warp(ph.t, uf);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < tw.size(); ++i) {
        num += (tw.data[i] - ph.r.data[i]) * (tw.data[i] - ph.r.data[i]);
        den += (ph.t.data[i] - ph.r.data[i]) * (ph.t.data[i] - ph.r.data[i]);
    }
    CHECK(rel_ssd(ph.t, uf, ph.r) == doctest::Approx(num / den).epsilon(1e-12));
}

TEST_CASE("ngf") {
    const auto a = oracle::random_image(11, 12, 12);
    CHECK(std::abs(ngf(a, a)) < 1e-12);
    const auto b = oracle::random_image(12, 12, 12);
    for (double eta : {0.01, 0.1, 0.5}) {
        CHECK(ngf(a, b, eta) == doctest::Approx(ngf_oracle(a, b, eta)).epsilon(1e-12));
        CHECK(ngf(Image2D(12, 12, 0.4), b, eta) == doctest::Approx(ngf_oracle(Image2D(12, 12, 0.4), b, eta)).epsilon(1e-12));
    }
    CHECK(ngf(a, b) == doctest::Approx(ngf_oracle(a, b, ngf_default_eta(b))).epsilon(1e-12));

    // Gradient scaling keeps alignment; a rotated copy does not.
    Image2D ramp(16, 16);
    Image2D rot(16, 16);
    for (int y = 0; y < 16; ++y) {
        for (int x = 0; x < 16; ++x) {
            ramp.at(x, y) = std::sin(0.4 * x) + 0.3 * y / 16.0;
            rot.at(x, y) = std::sin(0.4 * y) + 0.3 * x / 16.0;
        }
    }
    auto twice = ramp;
    for (auto& v : twice.data) {
        v *= 2.0;
    }
    CHECK(ngf(ramp, twice) < ngf(ramp, rot));
}

TEST_CASE("overlap metrics") {
    const auto g = binary(1, 12, 12, 0.3);
    CHECK(dice_soft(g, g) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(f1_hard(g, g).f1 == 1.0);
    CHECK(jaccard_hard(g, g) == 1.0);

    Image2D p(4, 4);
    Image2D q(4, 4);
    p.data = {1, 1, 0, 0, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0};
    q.data = {0, 0, 1, 1, 0, 0, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0};
    CHECK(dice_soft(p, q) == 0.0);
    CHECK(f1_hard(p, q).f1 == 0.0);
    CHECK(jaccard_hard(p, q) == 0.0);

    q.data = {0, 1, 1, 0, 0, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0};
    CHECK(dice_soft(p, q) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(f1_hard(p, q).f1 == 0.5);
    CHECK(f1_hard(p, q).precision == 0.5);
    CHECK(f1_hard(p, q).recall == 0.5);
    CHECK(jaccard_hard(p, q) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("binary soft Dice equals hard F1") {
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto p = binary(s, 10, 10, 0.4);
        const auto g = binary(s + 100, 10, 10, 0.4);
        CHECK(dice_soft(p, g) == doctest::Approx(f1_hard(p, g).f1).epsilon(1e-9));
        // Scaled binary map: any threshold below the positive value.
        auto scaled = p;
        for (auto& v : scaled.data) {
            v *= 0.7;
        }
        CHECK(f1_hard(scaled, g, 0.6).f1 == doctest::Approx(f1_hard(p, g).f1));
    }
}

TEST_CASE("removing true positives never raises overlap") {
    for (std::uint64_t s = 0; s < 10; ++s) {
        auto p = binary(s, 10, 10, 0.5);
        const auto g = binary(s + 30, 10, 10, 0.5);
        double dice = dice_soft(p, g);
        double f1 = f1_hard(p, g).f1;
        double jac = jaccard_hard(p, g);
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (p.data[i] == 1.0 && g.data[i] == 1.0) {
                p.data[i] = 0.0;
                const double d2 = dice_soft(p, g);
                const double f2 = f1_hard(p, g).f1;
                const double j2 = jaccard_hard(p, g);
                CHECK(d2 <= dice + 1e-15);
                CHECK(f2 <= f1);
                CHECK(j2 <= jac);
                dice = d2;
                f1 = f2;
                jac = j2;
            }
        }
    }
}

TEST_CASE("metric ranges on random inputs") {
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto t = oracle::random_image(s, 14, 14);
        const auto r = oracle::random_image(s + 1, 14, 14);
        const auto u = oracle::random_field(s + 2, 14, 14, 3.0);
        const auto theta = oracle::random_image(s + 3, 14, 14);
        const auto g = binary(s + 4, 14, 14, 0.3);
        const auto row = evaluate(t, r, u, theta, g);
        CHECK(row.ncc >= -1.0);
        CHECK(row.ncc <= 1.0);
        CHECK(row.ssim >= -1.0);
        CHECK(row.ssim <= 1.0);
        CHECK(row.psnr_db > 0.0);
        CHECK(row.psnr_db <= 99.0);
        CHECK(row.rel_ssd >= 0.0);
        for (double v : {row.dice, row.f1, row.jaccard, row.precision, row.recall}) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("evaluate identities") {
    const auto t = oracle::random_image(1, 16, 16);
    const auto g = binary(2, 16, 16, 0.3);
    const auto perfect = evaluate(t, t, DisplacementField(16, 16), g, g);
    CHECK(perfect.ncc == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(perfect.ssim == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(perfect.psnr_db == 99.0);
    CHECK(perfect.rel_ssd == 0.0);
    CHECK(perfect.dice == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(perfect.f1 == 1.0);
    CHECK(perfect.jaccard == 1.0);

    const auto r = oracle::random_image(3, 16, 16);
    const auto unreg = evaluate(t, r, DisplacementField(16, 16), g, g);
    CHECK(unreg.rel_ssd == 1.0);
    CHECK(unreg.f1 == 1.0);

    const auto reg = evaluate_registration(t, r, DisplacementField(16, 16));
    CHECK(std::isnan(reg.dice));
    CHECK(reg.ncc == unreg.ncc);

    // Identical pair moved off the identity: rel SSD has no baseline.
    const auto moved = evaluate(t, t, DisplacementField(16, 16, 0.5, 0.0), g, g);
    CHECK(std::isnan(moved.rel_ssd));
    CHECK(std::isfinite(moved.ncc));
}

TEST_CASE("pearson and pearson_matrix") {
    const std::vector<double> x{1, 2, 3, 4, 7};
    std::vector<double> y;
    for (double v : x) {
        y.push_back(2 * v + 3);
    }
    CHECK(pearson(x, y) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(pearson(x, x) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(pearson(x, {5, 5, 5, 5, 5}) == 0.0);
    CHECK_THROWS_AS(static_cast<void>(pearson(x, {1.0})), InvalidArgument);

    std::vector<MetricsRow> rows;
    for (std::uint64_t s = 0; s < 8; ++s) {
        const auto v = oracle::random_image(s, 3, 1);
        MetricsRow r;
        r.ncc = v.data[0];
        r.ssim = v.data[1];
        r.dice = v.data[2];
        r.psnr_db = 42.0;  // constant column
        rows.push_back(r);
    }
    const std::vector<std::string> labels{"NCC", "SSIM", "Dice", "PSNR"};
    const auto m = pearson_matrix(rows, labels);
    CHECK(m.labels == labels);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(m.values[i][i] == 1.0);
        for (std::size_t j = 0; j < 4; ++j) {
            CHECK(m.values[i][j] == m.values[j][i]);
            CHECK(std::abs(m.values[i][j]) <= 1.0);
        }
    }
    std::vector<double> cn;
    std::vector<double> cs;
    for (const auto& r : rows) {
        cn.push_back(r.ncc);
        cs.push_back(r.ssim);
    }
    CHECK(std::abs(m.values[0][1] - oracle::pearson(cn, cs)) < 1e-12);
    CHECK(m.values[0][3] == 0.0);
    rows.resize(2);
    CHECK_THROWS_AS(static_cast<void>(pearson_matrix(rows, labels)), InvalidArgument);
    CHECK_THROWS_AS(static_cast<void>(metric_by_name(MetricsRow{}, "nope")), InvalidArgument);
}

TEST_CASE("metric column helpers round-trip") {
    MetricsRow r{0.1, 0.2, 30.0, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    const auto v = metric_values(r);
    const auto back = metrics_from_values(v);
    CHECK(metric_values(back) == v);
    CHECK(metric_by_name(r, "PSNR") == 30.0);
    CHECK(metric_by_name(r, "recall") == 1.0);
}
