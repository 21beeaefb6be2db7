#include <doctest.h>

#include <cmath>
#include <random>

#include "jsreg/error.hpp"
#include "jsreg/unet.hpp"
#include "oracles.hpp"

using namespace jsreg;

namespace {

Batch random_batch(std::uint64_t seed, int n, int c, int h, int w) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(0.0, 1.0);
    Batch b;
    for (int s = 0; s < n; ++s) {
        TensorMap t(c, h, w);
        for (auto& v : t.data) {
            v = d(rng);
        }
        b.push_back(std::move(t));
    }
    return b;
}

double weighted_sum(const Batch& out, const Batch& w) {
    double s = 0.0;
    for (std::size_t b = 0; b < out.size(); ++b) {
        for (std::size_t i = 0; i < out[b].data.size(); ++i) {
            s += out[b].data[i] * w[b].data[i];
        }
    }
    return s;
}

UNetSpec tiny(OutputActivation act, int out_channels, int in_channels = 2) {
    UNetSpec s;
    s.in_channels = in_channels;
    s.base_filters = 4;
    s.depth = 1;
    s.dropout_rate = 0.1;
    s.out_channels = out_channels;
    s.out_activation = act;
    s.max_disp = 3.0;
    return s;
}

} // namespace

TEST_CASE("zero weights give the activation of zero") {
    const auto seg = tiny(OutputActivation::Sigmoid, 1);
    const auto reg = tiny(OutputActivation::ScaledTanh, 2);
    const auto x = random_batch(1, 2, 2, 8, 8);
    for (const auto& t : unet_forward(seg, zero_weights(seg), x, {})) {
        for (double v : t.data) {
            CHECK(v == 0.5);
        }
    }
    for (const auto& t : unet_forward(reg, zero_weights(reg), x, {})) {
        CHECK(t.channels == 2);
        for (double v : t.data) {
            CHECK(v == 0.0);
        }
    }
}

TEST_CASE("output dims equal input dims, ranges hold") {
    for (int depth : {1, 2, 3}) {
        for (auto [h, w] : {std::pair{8, 8}, {13, 10}, {5, 17}}) {
            UNetSpec s = tiny(OutputActivation::Sigmoid, 1);
            s.depth = depth;
            const auto weights = init_weights(s, 3);
            const auto x = random_batch(4, 2, 2, h, w);
            UNetTape tape;
            const auto y = unet_forward(s, weights, x, {}, &tape);
            REQUIRE(y.size() == 2);
            CHECK(y[0].height == h);
            CHECK(y[0].width == w);
            CHECK(tape.padded_height % (1 << depth) == 0);
            CHECK(tape.padded_width % (1 << depth) == 0);
            for (double v : y[0].data) {
                CHECK(v > 0.0);
                CHECK(v < 1.0);
            }
            UNetSpec r = tiny(OutputActivation::ScaledTanh, 2);
            r.depth = depth;
            auto big = init_weights(r, 5);
            for (auto& blk : big.blocks) {
                for (auto& v : blk.values) {
                    v *= 4.0;
                }
            }
            for (const auto& t : unet_forward(r, big, x, {})) {
                for (double v : t.data) {
                    CHECK(std::abs(v) <= r.max_disp);
                }
            }
        }
    }
}

TEST_CASE("depth 1 on 8x8 has a 4x4 bottleneck") {
    const auto s = tiny(OutputActivation::Sigmoid, 1);
    UNetTape tape;
    static_cast<void>(unet_forward(s, init_weights(s, 1), random_batch(2, 1, 2, 8, 8), {}, &tape));
    REQUIRE(tape.encoder.size() == 2);
    const auto& bottleneck = tape.encoder.back().first.input.at(0);
    CHECK(bottleneck.height == 4);
    CHECK(bottleneck.width == 4);
    CHECK(tape.encoder.back().first.conv_out.at(0).channels == s.filters_at(1));
}

TEST_CASE("forward and backward are deterministic") {
    const auto s = tiny(OutputActivation::Sigmoid, 1);
    const auto w1 = init_weights(s, 11);
    const auto w2 = init_weights(s, 11);
    CHECK(w1.blocks.size() == w2.blocks.size());
    for (std::size_t i = 0; i < w1.blocks.size(); ++i) {
        CHECK(w1.blocks[i].values == w2.blocks[i].values);
    }
    const auto x = random_batch(3, 2, 2, 8, 8);
    const ForwardOptions opts{true, 99};
    UNetTape ta;
    UNetTape tb;
    const auto ya = unet_forward(s, w1, x, opts, &ta);
    const auto yb = unet_forward(s, w2, x, opts, &tb);
    CHECK(ya == yb);
    const auto g = random_batch(4, 2, 1, 8, 8);
    const auto ga = unet_backward(s, w1, ta, g);
    const auto gb = unet_backward(s, w2, tb, g);
    CHECK(ga.input == gb.input);
    for (std::size_t i = 0; i < ga.weights.blocks.size(); ++i) {
        CHECK(ga.weights.blocks[i].values == gb.weights.blocks[i].values);
    }
    const auto other = unet_forward(s, w1, x, {true, 100});
    CHECK_FALSE(other == ya);
}

TEST_CASE("whole-network gradients match finite differences") {
    constexpr double kStep = 1e-6;
    constexpr double kTol = 1e-3;
    constexpr double kFloor = 1e-6;
    for (auto act : {OutputActivation::Sigmoid, OutputActivation::ScaledTanh}) {
        const int outc = act == OutputActivation::Sigmoid ? 1 : 2;
        const auto s = tiny(act, outc);
        auto weights = init_weights(s, 21);
        auto x = random_batch(22, 2, 2, 8, 8);
        const auto wout = random_batch(23, 2, outc, 8, 8);
        const ForwardOptions opts{true, 7};
        auto loss = [&] { return weighted_sum(unet_forward(s, weights, x, opts), wout); };

        UNetTape tape;
        static_cast<void>(unet_forward(s, weights, x, opts, &tape));
        const auto grads = unet_backward(s, weights, tape, wout);

        std::mt19937_64 pick(5);
        for (std::size_t b = 0; b < weights.blocks.size(); ++b) {
            auto& vals = weights.blocks[b].values;
            std::uniform_int_distribution<std::size_t> idx(0, vals.size() - 1);
            for (int k = 0; k < 3; ++k) {
                const std::size_t i = idx(pick);
                const double fd = oracle::central_difference(loss, vals[i], kStep);
                CAPTURE(weights.blocks[b].name);
                CHECK(oracle::relative_error(grads.weights.blocks[b].values[i], fd, kFloor) < kTol);
            }
        }
        for (std::size_t b = 0; b < x.size(); ++b) {
            for (std::size_t i = 0; i < x[b].data.size(); i += 7) {
                const double fd = oracle::central_difference(loss, x[b].data[i], kStep);
                CHECK(oracle::relative_error(grads.input[b].data[i], fd, kFloor) < kTol);
            }
        }
    }
}

TEST_CASE("weight checks and validation") {
    const auto s = tiny(OutputActivation::Sigmoid, 1);
    auto w = init_weights(s, 1);
    CHECK_NOTHROW(check_weights(s, w));
    CHECK(w.parameter_count() > 0);
    CHECK(w.zeros_like().parameter_count() == w.parameter_count());
    w.blocks.pop_back();
    CHECK_THROWS_AS(check_weights(s, w), DimensionMismatch);

    UNetSpec bad = s;
    bad.depth = 0;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    bad = s;
    bad.base_filters = 0;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);

    const auto x = random_batch(1, 1, 3, 8, 8);
    CHECK_THROWS_AS(static_cast<void>(unet_forward(s, init_weights(s, 1), x, {})), DimensionMismatch);

    auto nan_in = random_batch(1, 1, 2, 8, 8);
    nan_in[0].data[5] = std::nan("");
    CHECK_THROWS_AS(static_cast<void>(unet_forward(s, init_weights(s, 1), nan_in, {})), DivergenceError);

    auto huge = init_weights(s, 1);
    huge.blocks[0].values[0] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(static_cast<void>(unet_forward(s, huge, random_batch(1, 1, 2, 8, 8), {})), DivergenceError);
}

TEST_CASE("small_output initialisation keeps the displacement near zero") {
    const auto r = tiny(OutputActivation::ScaledTanh, 2, 4);
    const auto x = random_batch(2, 1, 4, 16, 16);
    const auto y = unet_forward(r, init_weights(r, 3, true), x, {false, 0});
    for (double v : y[0].data) {
        CHECK(std::abs(v) < 0.05);
    }
}

TEST_CASE("build_pipeline") {
    const auto def = build_pipeline(NetConfig{});
    CHECK(def.segmentation.base_filters == 32);
    CHECK(def.registration.base_filters == 32);
    CHECK(def.segmentation.in_channels == 3);
    CHECK(def.segmentation.out_channels == 1);
    CHECK(def.segmentation.out_activation == OutputActivation::Sigmoid);
    CHECK(def.registration.in_channels == 4);
    CHECK(def.registration.out_channels == 2);
    CHECK(def.registration.out_activation == OutputActivation::ScaledTanh);
    CHECK(def.registration.max_disp == 10.0);

    NetConfig desk;
    desk.desk_scale = true;
    const auto d = build_pipeline(desk);
    CHECK(d.segmentation.base_filters == 8);
    CHECK(d.segmentation.depth == 2);
    CHECK(d.registration.base_filters == 8);
    CHECK(d.registration.depth == 2);
}
