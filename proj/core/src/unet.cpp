#include "jsreg/unet.hpp"

#include <cmath>

#include <fmt/format.h>

#include "jsreg/error.hpp"

namespace jsreg {

void UNetSpec::validate() const {
    if (in_channels < 1 || out_channels < 1) {
        throw InvalidArgument("unet: channel counts must be >= 1");
    }
    if (base_filters < 1) {
        throw InvalidArgument(fmt::format("unet: base_filters must be >= 1, got {}", base_filters));
    }
    if (depth < 1 || depth > 8) {
        throw InvalidArgument(fmt::format("unet: depth must lie in [1, 8], got {}", depth));
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
        throw InvalidArgument(fmt::format("unet: dropout rate must lie in [0, 1), got {}", dropout_rate));
    }
    if (out_activation == OutputActivation::ScaledTanh && !(max_disp > 0.0)) {
        throw InvalidArgument("unet: max_disp must be > 0");
    }
}

std::size_t NetWeights::parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& b : blocks) {
        n += b.values.size();
    }
    return n;
}

NetWeights NetWeights::zeros_like() const {
    NetWeights z = *this;
    for (auto& b : z.blocks) {
        std::fill(b.values.begin(), b.values.end(), 0.0);
    }
    return z;
}

bool NetWeights::all_finite() const noexcept {
    for (const auto& b : blocks) {
        for (double v : b.values) {
            if (!std::isfinite(v)) {
                return false;
            }
        }
    }
    return true;
}

namespace {

enum class BlockKind { Kernel, Bias, Slope, Scale, Shift };

struct UnitIdx {
    int w = 0;
    int b = 0;
    int slope = 0;
    int gamma = 0;
    int beta = 0;
    int in = 0;
    int out = 0;
    int stride = 1;
};

struct BlockIdx {
    UnitIdx first;
    UnitIdx second;
    int id = 0;  // dropout stream
};

struct Layout {
    std::vector<BlockIdx> enc;
    std::vector<UnitIdx> down;
    std::vector<UnitIdx> up;
    std::vector<BlockIdx> dec;
    int head_w = 0;
    int head_b = 0;
    std::vector<ParamBlock> shapes;  // values empty; kinds parallel
    std::vector<BlockKind> kinds;
};

class LayoutBuilder {
public:
    int add(std::string name, std::vector<int> shape, BlockKind kind) {
        std::size_t n = 1;
        for (int s : shape) {
            n *= static_cast<std::size_t>(s);
        }
        layout.shapes.push_back({std::move(name), std::move(shape), std::vector<double>(n, 0.0)});
        layout.kinds.push_back(kind);
        return static_cast<int>(layout.shapes.size()) - 1;
    }

    UnitIdx unit(const std::string& prefix, int in, int out, int stride) {
        UnitIdx u;
        u.in = in;
        u.out = out;
        u.stride = stride;
        u.w = add(prefix + ".conv.w", {out, in, 3, 3}, BlockKind::Kernel);
        u.b = add(prefix + ".conv.b", {out}, BlockKind::Bias);
        u.slope = add(prefix + ".prelu", {out}, BlockKind::Slope);
        u.gamma = add(prefix + ".bn.gamma", {out}, BlockKind::Scale);
        u.beta = add(prefix + ".bn.beta", {out}, BlockKind::Shift);
        return u;
    }

    BlockIdx block(const std::string& prefix, int in, int out) {
        BlockIdx b;
        b.first = unit(prefix + ".a", in, out, 1);
        b.second = unit(prefix + ".b", out, out, 1);
        b.id = next_block_id++;
        return b;
    }

    Layout layout;
    int next_block_id = 0;
};

Layout make_layout(const UNetSpec& spec) {
    spec.validate();
    LayoutBuilder lb;
    auto& L = lb.layout;
    L.enc.push_back(lb.block("enc0", spec.in_channels, spec.filters_at(0)));
    for (int l = 1; l <= spec.depth; ++l) {
        L.down.push_back(lb.unit(fmt::format("down{}", l), spec.filters_at(l - 1), spec.filters_at(l), 2));
        L.enc.push_back(lb.block(l == spec.depth ? "bottleneck" : fmt::format("enc{}", l), spec.filters_at(l),
                                 spec.filters_at(l)));
    }
    L.up.resize(spec.depth);
    L.dec.resize(spec.depth);
    for (int l = spec.depth - 1; l >= 0; --l) {
        L.up[l] = lb.unit(fmt::format("up{}", l), spec.filters_at(l + 1), spec.filters_at(l), 1);
        L.dec[l] = lb.block(fmt::format("dec{}", l), 2 * spec.filters_at(l), spec.filters_at(l));
    }
    L.head_w = lb.add("head.conv.w", {spec.out_channels, spec.filters_at(0), 1, 1}, BlockKind::Kernel);
    L.head_b = lb.add("head.conv.b", {spec.out_channels}, BlockKind::Bias);
    return L;
}

std::span<const double> values(const NetWeights& w, int idx) { return w.blocks[idx].values; }
std::span<double> values(NetWeights& w, int idx) { return w.blocks[idx].values; }

struct ForwardContext {
    const NetWeights& w;
    int layer = 0;

    void check(const Batch& b, const char* what) {
        ++layer;
        for (const auto& t : b) {
            if (!t.all_finite()) {
                throw DivergenceError(fmt::format("non-finite activation at layer {} ({})", layer, what));
            }
        }
    }
};

Batch unit_forward(ForwardContext& ctx, const UnitIdx& u, const Batch& x, UnitCache& cache) {
    cache.input = x;
    cache.conv_out.clear();
    Batch act;
    for (const auto& t : x) {
        cache.conv_out.push_back(conv_forward(t, values(ctx.w, u.w), values(ctx.w, u.b), u.out, 3, u.stride));
        act.push_back(prelu_forward(cache.conv_out.back(), values(ctx.w, u.slope)));
    }
    Batch y = batchnorm_forward(act, values(ctx.w, u.gamma), values(ctx.w, u.beta), &cache.bn);
    ctx.check(y, "conv unit");
    return y;
}

Batch unit_backward(const NetWeights& w, NetWeights& g, const UnitIdx& u, const UnitCache& cache, const Batch& dy) {
    Batch d_act = batchnorm_backward(cache.bn, values(w, u.gamma), dy, values(g, u.gamma), values(g, u.beta));
    Batch dx(dy.size());
    for (std::size_t i = 0; i < dy.size(); ++i) {
        TensorMap d_conv;
        prelu_backward(cache.conv_out[i], values(w, u.slope), d_act[i], d_conv, values(g, u.slope));
        conv_backward(cache.input[i], values(w, u.w), u.out, 3, u.stride, d_conv, &dx[i], values(g, u.w),
                      values(g, u.b));
    }
    return dx;
}

Batch block_forward(ForwardContext& ctx, const BlockIdx& b, const Batch& x, BlockCache& cache,
                    const UNetSpec& spec, const ForwardOptions& opts) {
    Batch y = unit_forward(ctx, b.first, x, cache.first);
    y = unit_forward(ctx, b.second, y, cache.second);
    const std::uint64_t seed = mix_seed(opts.dropout_seed, static_cast<std::uint64_t>(b.id));
    return dropout_forward(y, spec.dropout_rate, seed, opts.train, &cache.dropout);
}

Batch block_backward(const NetWeights& w, NetWeights& g, const BlockIdx& b, const BlockCache& cache,
                     const Batch& dy) {
    Batch d = dropout_backward(cache.dropout, dy);
    d = unit_backward(w, g, b.second, cache.second, d);
    return unit_backward(w, g, b.first, cache.first, d);
}

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

} // namespace

NetWeights zero_weights(const UNetSpec& spec) {
    return NetWeights{make_layout(spec).shapes};
}

NetWeights init_weights(const UNetSpec& spec, std::uint64_t seed, bool small_output) {
    Layout L = make_layout(spec);
    NetWeights w{L.shapes};
    auto rng = make_rng(seed, 0x1417);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t i = 0; i < w.blocks.size(); ++i) {
        auto& b = w.blocks[i];
        switch (L.kinds[i]) {
        case BlockKind::Kernel: {
            const int fan_in = b.shape[1] * b.shape[2] * b.shape[3];
            const bool head = static_cast<int>(i) == L.head_w;
            double stddev = head ? std::sqrt(1.0 / fan_in) : std::sqrt(2.0 / fan_in);
            if (head && small_output) {
                stddev *= 1e-3;
            }
            for (auto& v : b.values) {
                v = stddev * normal(rng);
            }
            break;
        }
        case BlockKind::Bias:
        case BlockKind::Shift:
            break;
        case BlockKind::Slope:
            std::fill(b.values.begin(), b.values.end(), 0.25);
            break;
        case BlockKind::Scale:
            std::fill(b.values.begin(), b.values.end(), 1.0);
            break;
        }
    }
    return w;
}

void check_weights(const UNetSpec& spec, const NetWeights& w) {
    const Layout L = make_layout(spec);
    if (w.blocks.size() != L.shapes.size()) {
        throw DimensionMismatch(fmt::format("network weights have {} blocks, architecture needs {}", w.blocks.size(),
                                            L.shapes.size()));
    }
    for (std::size_t i = 0; i < w.blocks.size(); ++i) {
        if (w.blocks[i].shape != L.shapes[i].shape || w.blocks[i].values.size() != L.shapes[i].values.size()) {
            throw DimensionMismatch(fmt::format("weight block {} ('{}') has the wrong shape", i, L.shapes[i].name));
        }
    }
}

Batch unet_forward(const UNetSpec& spec, const NetWeights& weights, const Batch& input, const ForwardOptions& opts,
                   UNetTape* tape) {
    const Layout L = make_layout(spec);
    check_weights(spec, weights);
    if (input.empty()) {
        throw InvalidArgument("unet_forward: empty batch");
    }
    const int h = input.front().height;
    const int w = input.front().width;
    for (const auto& t : input) {
        if (t.channels != spec.in_channels || t.height != h || t.width != w) {
            throw DimensionMismatch(fmt::format("unet_forward: expected {} input channels at {}x{}, got {}x{}x{}",
                                                spec.in_channels, w, h, t.channels, t.width, t.height));
        }
        if (!t.all_finite()) {
            throw DivergenceError("non-finite network input");
        }
    }
    const int mult = 1 << spec.depth;
    const int ph = (h + mult - 1) / mult * mult;
    const int pw = (w + mult - 1) / mult * mult;

    UNetTape local;
    UNetTape& tp = tape != nullptr ? *tape : local;
    tp.height = h;
    tp.width = w;
    tp.padded_height = ph;
    tp.padded_width = pw;
    tp.encoder.assign(spec.depth + 1, {});
    tp.down.assign(spec.depth, {});
    tp.up.assign(spec.depth, {});
    tp.decoder.assign(spec.depth, {});

    Batch x;
    for (const auto& t : input) {
        TensorMap p(t.channels, ph, pw);
        for (int c = 0; c < t.channels; ++c) {
            for (int y = 0; y < h; ++y) {
                for (int xx = 0; xx < w; ++xx) {
                    p.at(c, y, xx) = t.at(c, y, xx);
                }
            }
        }
        x.push_back(std::move(p));
    }

    ForwardContext ctx{weights};
    std::vector<Batch> skips(spec.depth + 1);
    skips[0] = block_forward(ctx, L.enc[0], x, tp.encoder[0], spec, opts);
    for (int l = 1; l <= spec.depth; ++l) {
        Batch d = unit_forward(ctx, L.down[l - 1], skips[l - 1], tp.down[l - 1]);
        skips[l] = block_forward(ctx, L.enc[l], d, tp.encoder[l], spec, opts);
    }
    Batch cur = std::move(skips[spec.depth]);
    for (int l = spec.depth - 1; l >= 0; --l) {
        Batch upsampled;
        for (const auto& t : cur) {
            upsampled.push_back(upsample2x_forward(t));
        }
        Batch up = unit_forward(ctx, L.up[l], upsampled, tp.up[l]);
        Batch joined;
        for (std::size_t i = 0; i < up.size(); ++i) {
            joined.push_back(concat_channels(up[i], skips[l][i]));
        }
        cur = block_forward(ctx, L.dec[l], joined, tp.decoder[l], spec, opts);
    }

    tp.head_input = cur;
    tp.raw_output.clear();
    Batch out;
    for (const auto& t : cur) {
        TensorMap raw = conv_forward(t, values(weights, L.head_w), values(weights, L.head_b), spec.out_channels, 1, 1);
        TensorMap y(spec.out_channels, h, w);
        for (int c = 0; c < spec.out_channels; ++c) {
            for (int yy = 0; yy < h; ++yy) {
                for (int xx = 0; xx < w; ++xx) {
                    const double v = raw.at(c, yy, xx);
                    y.at(c, yy, xx) = spec.out_activation == OutputActivation::Sigmoid ? sigmoid(v)
                                                                                       : spec.max_disp * std::tanh(v);
                }
            }
        }
        tp.raw_output.push_back(std::move(raw));
        out.push_back(std::move(y));
    }
    ctx.check(out, "output head");
    return out;
}

UNetGradients unet_backward(const UNetSpec& spec, const NetWeights& weights, const UNetTape& tape,
                            const Batch& grad_output) {
    const Layout L = make_layout(spec);
    check_weights(spec, weights);
    if (grad_output.size() != tape.raw_output.size()) {
        throw DimensionMismatch("unet_backward: batch size differs from the recorded forward pass");
    }
    UNetGradients g{weights.zeros_like(), {}};

    Batch d_head(grad_output.size());
    for (std::size_t i = 0; i < grad_output.size(); ++i) {
        const auto& raw = tape.raw_output[i];
        const auto& go = grad_output[i];
        if (go.channels != spec.out_channels || go.height != tape.height || go.width != tape.width) {
            throw DimensionMismatch("unet_backward: output gradient shape mismatch");
        }
        TensorMap d_raw(raw.channels, raw.height, raw.width);
        for (int c = 0; c < raw.channels; ++c) {
            for (int y = 0; y < tape.height; ++y) {
                for (int x = 0; x < tape.width; ++x) {
                    const double v = raw.at(c, y, x);
                    double deriv = 0.0;
                    if (spec.out_activation == OutputActivation::Sigmoid) {
                        const double s = sigmoid(v);
                        deriv = s * (1.0 - s);
                    } else {
                        const double t = std::tanh(v);
                        deriv = spec.max_disp * (1.0 - t * t);
                    }
                    d_raw.at(c, y, x) = go.at(c, y, x) * deriv;
                }
            }
        }
        conv_backward(tape.head_input[i], values(weights, L.head_w), spec.out_channels, 1, 1, d_raw, &d_head[i],
                      values(g.weights, L.head_w), values(g.weights, L.head_b));
    }

    std::vector<Batch> d_skip(spec.depth + 1);
    Batch cur = std::move(d_head);
    for (int l = 0; l < spec.depth; ++l) {
        Batch d_joined = block_backward(weights, g.weights, L.dec[l], tape.decoder[l], cur);
        Batch d_up(d_joined.size());
        d_skip[l].resize(d_joined.size());
        for (std::size_t i = 0; i < d_joined.size(); ++i) {
            auto [a, b] = split_channels(d_joined[i], spec.filters_at(l));
            d_up[i] = std::move(a);
            d_skip[l][i] = std::move(b);
        }
        Batch d_upsampled = unit_backward(weights, g.weights, L.up[l], tape.up[l], d_up);
        cur.clear();
        for (const auto& t : d_upsampled) {
            cur.push_back(upsample2x_backward(t));
        }
    }
    // cur now holds the gradient flowing into the bottleneck output.
    d_skip[spec.depth] = std::move(cur);
    for (int l = spec.depth; l >= 1; --l) {
        Batch d = block_backward(weights, g.weights, L.enc[l], tape.encoder[l], d_skip[l]);
        d = unit_backward(weights, g.weights, L.down[l - 1], tape.down[l - 1], d);
        for (std::size_t i = 0; i < d.size(); ++i) {
            for (std::size_t k = 0; k < d[i].data.size(); ++k) {
                d_skip[l - 1][i].data[k] += d[i].data[k];
            }
        }
    }
    Batch d_in = block_backward(weights, g.weights, L.enc[0], tape.encoder[0], d_skip[0]);

    for (const auto& t : d_in) {
        TensorMap c(t.channels, tape.height, tape.width);
        for (int ch = 0; ch < t.channels; ++ch) {
            for (int y = 0; y < tape.height; ++y) {
                for (int x = 0; x < tape.width; ++x) {
                    c.at(ch, y, x) = t.at(ch, y, x);
                }
            }
        }
        g.input.push_back(std::move(c));
    }
    return g;
}

PipelineSpecs build_pipeline(const NetConfig& cfg) {
    PipelineSpecs p;
    const int filters = cfg.desk_scale ? 8 : cfg.base_filters;
    const int depth = cfg.desk_scale ? 2 : cfg.depth;

    p.segmentation.in_channels = 3;
    p.segmentation.base_filters = filters;
    p.segmentation.depth = depth;
    p.segmentation.dropout_rate = cfg.dropout_rate;
    p.segmentation.out_channels = 1;
    p.segmentation.out_activation = OutputActivation::Sigmoid;

    p.registration.in_channels = 4;
    p.registration.base_filters = filters;
    p.registration.depth = depth;
    p.registration.dropout_rate = cfg.dropout_rate;
    p.registration.out_channels = 2;
    p.registration.out_activation = OutputActivation::ScaledTanh;
    p.registration.max_disp = cfg.max_disp;

    p.segmentation.validate();
    p.registration.validate();
    return p;
}

} // namespace jsreg
