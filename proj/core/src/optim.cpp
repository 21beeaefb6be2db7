#include "jsreg/optim.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "jsreg/error.hpp"

namespace jsreg {

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr,
               std::string_view name) {
    if (params.size() != grads.size()) {
        throw DimensionMismatch(fmt::format("adam: '{}' has {} parameters but {} gradients", name, params.size(),
                                            grads.size()));
    }
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (!std::isfinite(grads[i])) {
            throw DivergenceError(fmt::format("adam: non-finite gradient in '{}' at index {}", name, i));
        }
    }
    if (state.m.size() != params.size()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
        state.step = 0;
    }
    ++state.step;
    const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = kAdamBeta1 * state.m[i] + (1.0 - kAdamBeta1) * grads[i];
        state.v[i] = kAdamBeta2 * state.v[i] + (1.0 - kAdamBeta2) * grads[i] * grads[i];
        const double m_hat = state.m[i] / c1;
        const double v_hat = state.v[i] / c2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + kAdamEps);
    }
}

void RunConfig::validate() const {
    if (epochs < 1) {
        throw InvalidArgument(fmt::format("epochs must be >= 1, got {}", epochs));
    }
    for (auto [name, v] : {std::pair{"lr1", lr1}, {"lr2", lr2}, {"direct_lr_theta", direct_lr_theta},
                           {"direct_lr_u", direct_lr_u}}) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw InvalidArgument(fmt::format("learning rate {} must be > 0, got {}", name, v));
        }
    }
    for (int e : checkpoint_epochs) {
        if (e < 1 || e > epochs) {
            throw InvalidArgument(fmt::format("checkpoint epoch {} outside [1, {}]", e, epochs));
        }
    }
}

SliceProblem prepare_slice(Image2D t, Image2D r, const MarkerSet& markers, const SliceSetup& setup,
                           std::optional<Image2D> g_mask) {
    require_same_shape(t, r, "prepare_slice");
    if (g_mask) {
        require_same_shape(t, *g_mask, "prepare_slice mask");
    }
    SliceProblem p;
    p.markers = markers;
    p.params = setup.energy;
    const auto mt = region_means(t, markers, setup.roi_radius);
    const auto mr = region_means(r, markers, setup.roi_radius);
    const auto& fixed = setup.fixed_means;
    p.params.a1 = fixed.a1.value_or(std::clamp(mt.inside, 0.0, 1.0));
    p.params.a2 = fixed.a2.value_or(std::clamp(mt.outside, 0.0, 1.0));
    p.params.c1 = fixed.c1.value_or(std::clamp(mr.inside, 0.0, 1.0));
    p.params.c2 = fixed.c2.value_or(std::clamp(mr.outside, 0.0, 1.0));
    p.params.validate();
    p.d = normalize_distance(geodesic_distance(t, markers, setup.geodesic));
    p.t = std::move(t);
    p.r = std::move(r);
    p.g_mask = std::move(g_mask);
    return p;
}

Image2D noise_channel(int width, int height, std::uint64_t seed, std::uint64_t stream) {
    auto rng = make_rng(seed, stream);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Image2D n(width, height);
    for (auto& v : n.data) {
        v = unit(rng);
    }
    return n;
}

namespace {

bool is_checkpoint(const RunConfig& cfg, int epoch) {
    return std::find(cfg.checkpoint_epochs.begin(), cfg.checkpoint_epochs.end(), epoch) != cfg.checkpoint_epochs.end();
}

MetricsRow checkpoint_metrics(const SliceProblem& p, const Image2D& theta, const DisplacementField& u) {
    if (p.g_mask) {
        return evaluate(p.t, p.r, u, warp_bilinear(theta, u), *p.g_mask);
    }
    return evaluate_registration(p.t, p.r, u);
}

bool finite(const EnergyBreakdown& e) {
    return std::isfinite(e.term_fidelity) && std::isfinite(e.term_seg_t) && std::isfinite(e.term_seg_r) &&
           std::isfinite(e.term_global) && std::isfinite(e.term_local) && std::isfinite(e.total);
}

std::string describe(const EnergyBreakdown& e) {
    return fmt::format("fidelity={} seg_t={} seg_r={} global={} local={} total={}", e.term_fidelity, e.term_seg_t,
                       e.term_seg_r, e.term_global, e.term_local, e.total);
}

void finish(RunOutputs& out, const SliceProblem& p, Image2D theta, DisplacementField u) {
    out.theta_r = warp_bilinear(theta, u);
    out.warped_t = warp_bilinear(p.t, u);
    out.theta_t = std::move(theta);
    out.u = std::move(u);
}

} // namespace

RunOutputs run_direct(const SliceProblem& problem, const RunConfig& cfg) {
    cfg.validate();
    const EnergyProblem energy(problem.t, problem.r, problem.d, problem.params);
    const int w = problem.t.width;
    const int h = problem.t.height;
    Image2D theta(w, h, 0.5);
    DisplacementField u(w, h);
    AdamState s_theta;
    AdamState s_ux;
    AdamState s_uy;

    RunOutputs out;
    out.history.reserve(static_cast<std::size_t>(cfg.epochs));
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto eval = energy.evaluate(theta, u);
        out.history.push_back({epoch, eval.energy});
        if (cfg.observer) {
            cfg.observer({epoch, 0, &theta, &u, eval.energy});
        }
        if (!finite(eval.energy)) {
            out.diverged = true;
            out.failure = fmt::format("non-finite energy at epoch {}: {}", epoch, describe(eval.energy));
            break;
        }
        if (is_checkpoint(cfg, epoch)) {
            out.checkpoints.push_back({epoch, checkpoint_metrics(problem, theta, u)});
        }
        try {
            adam_step(theta.data, eval.d_theta.data, s_theta, cfg.direct_lr_theta, "theta");
            adam_step(u.ux, eval.d_u.ux, s_ux, cfg.direct_lr_u, "ux");
            adam_step(u.uy, eval.d_u.uy, s_uy, cfg.direct_lr_u, "uy");
        } catch (const DivergenceError& e) {
            out.diverged = true;
            out.failure = fmt::format("epoch {}: {}", epoch, e.what());
            break;
        }
        for (auto& v : theta.data) {
            v = std::clamp(v, 0.0, 1.0);
        }
    }
    finish(out, problem, std::move(theta), std::move(u));
    return out;
}

namespace {

TensorMap stack_channels(std::initializer_list<const Image2D*> planes) {
    const Image2D& first = **planes.begin();
    TensorMap t(static_cast<int>(planes.size()), first.height, first.width);
    int c = 0;
    for (const Image2D* p : planes) {
        std::copy(p->data.begin(), p->data.end(), t.channel(c));
        ++c;
    }
    return t;
}

Image2D channel_image(const TensorMap& t, int c) {
    return Image2D(t.width, t.height, std::vector<double>(t.channel(c), t.channel(c) + t.plane()));
}

DisplacementField field_of(const TensorMap& t) {
    DisplacementField u(t.width, t.height);
    std::copy(t.channel(0), t.channel(0) + t.plane(), u.ux.begin());
    std::copy(t.channel(1), t.channel(1) + t.plane(), u.uy.begin());
    return u;
}

struct DipNetworks {
    PipelineSpecs specs;
    NetWeights seg;
    NetWeights reg;
};

struct DipForward {
    std::vector<Image2D> theta;
    std::vector<DisplacementField> u;
    Batch reg_input;
};

DipForward dip_forward(const DipNetworks& nets, const std::vector<SliceProblem>& stack, const Batch& seg_input,
                       const std::vector<Image2D>& noise_reg, const std::vector<DisplacementField>& u_prev,
                       const ForwardOptions& opts, UNetTape* tape_seg, UNetTape* tape_reg) {
    DipForward f;
    const Batch theta_out = unet_forward(nets.specs.segmentation, nets.seg, seg_input, opts, tape_seg);
    for (std::size_t i = 0; i < stack.size(); ++i) {
        f.theta.push_back(channel_image(theta_out[i], 0));
        const Image2D tw = warp_bilinear(stack[i].t, u_prev[i]);
        f.reg_input.push_back(stack_channels({&f.theta.back(), &tw, &stack[i].r, &noise_reg[i]}));
    }
    ForwardOptions reg_opts = opts;
    reg_opts.dropout_seed = opts.dropout_seed ^ 0x5EEDULL;
    const Batch u_out = unet_forward(nets.specs.registration, nets.reg, f.reg_input, reg_opts, tape_reg);
    for (const auto& t : u_out) {
        f.u.push_back(field_of(t));
    }
    return f;
}

} // namespace

std::vector<RunOutputs> run_dip(const std::vector<SliceProblem>& stack, const RunConfig& cfg, const NetConfig& net) {
    cfg.validate();
    if (stack.empty()) {
        throw InvalidArgument("run_dip: empty slice stack");
    }
    const int w = stack.front().t.width;
    const int h = stack.front().t.height;
    std::vector<EnergyProblem> energies;
    for (const auto& p : stack) {
        if (p.t.width != w || p.t.height != h) {
            throw DimensionMismatch("run_dip: slices must share dimensions");
        }
        energies.emplace_back(p.t, p.r, p.d, p.params);
    }

    DipNetworks nets{build_pipeline(net), {}, {}};
    nets.seg = init_weights(nets.specs.segmentation, mix_seed(cfg.seed, 1));
    nets.reg = init_weights(nets.specs.registration, mix_seed(cfg.seed, 2), true);

    Batch seg_input;
    std::vector<Image2D> noise_reg;
    for (std::size_t i = 0; i < stack.size(); ++i) {
        const Image2D n1 = noise_channel(w, h, cfg.seed, 100 + 2 * i);
        noise_reg.push_back(noise_channel(w, h, cfg.seed, 101 + 2 * i));
        seg_input.push_back(stack_channels({&stack[i].t, &stack[i].r, &n1}));
    }

    std::vector<RunOutputs> outs(stack.size());
    std::vector<AdamState> adam_seg(nets.seg.blocks.size());
    std::vector<AdamState> adam_reg(nets.reg.blocks.size());
    std::vector<DisplacementField> u_prev(stack.size(), DisplacementField(w, h));
    UNetTape tape_seg;
    UNetTape tape_reg;

    auto abort_all = [&](const std::string& why) {
        for (auto& o : outs) {
            o.diverged = true;
            o.failure = why;
        }
    };

    bool aborted = false;
    for (int epoch = 1; epoch <= cfg.epochs && !aborted; ++epoch) {
        const ForwardOptions opts{true, mix_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(epoch))};
        DipForward f;
        try {
            f = dip_forward(nets, stack, seg_input, noise_reg, u_prev, opts, &tape_seg, &tape_reg);
        } catch (const DivergenceError& e) {
            abort_all(fmt::format("epoch {}: {}", epoch, e.what()));
            break;
        }

        Batch grad_theta_out;
        Batch grad_u_out;
        for (std::size_t i = 0; i < stack.size(); ++i) {
            const auto eval = energies[i].evaluate(f.theta[i], f.u[i]);
            outs[i].history.push_back({epoch, eval.energy});
            if (cfg.observer) {
                cfg.observer({epoch, i, &f.theta[i], &f.u[i], eval.energy});
            }
            if (!finite(eval.energy)) {
                abort_all(fmt::format("non-finite loss at epoch {} slice {}: {}", epoch, i, describe(eval.energy)));
                aborted = true;
                break;
            }
            if (is_checkpoint(cfg, epoch)) {
                outs[i].checkpoints.push_back({epoch, checkpoint_metrics(stack[i], f.theta[i], f.u[i])});
            }
            TensorMap gt(1, h, w);
            std::copy(eval.d_theta.data.begin(), eval.d_theta.data.end(), gt.channel(0));
            grad_theta_out.push_back(std::move(gt));
            TensorMap gu(2, h, w);
            std::copy(eval.d_u.ux.begin(), eval.d_u.ux.end(), gu.channel(0));
            std::copy(eval.d_u.uy.begin(), eval.d_u.uy.end(), gu.channel(1));
            grad_u_out.push_back(std::move(gu));
        }
        if (aborted) {
            break;
        }

        const auto g_reg = unet_backward(nets.specs.registration, nets.reg, tape_reg, grad_u_out);
        for (std::size_t i = 0; i < stack.size(); ++i) {
            // theta is channel 0 of the registration network input.
            const double* src = g_reg.input[i].channel(0);
            double* dst = grad_theta_out[i].channel(0);
            for (std::size_t k = 0; k < grad_theta_out[i].plane(); ++k) {
                dst[k] += src[k];
            }
        }
        const auto g_seg = unet_backward(nets.specs.segmentation, nets.seg, tape_seg, grad_theta_out);

        try {
            for (std::size_t b = 0; b < nets.seg.blocks.size(); ++b) {
                adam_step(nets.seg.blocks[b].values, g_seg.weights.blocks[b].values, adam_seg[b], cfg.lr1,
                          nets.seg.blocks[b].name);
            }
            for (std::size_t b = 0; b < nets.reg.blocks.size(); ++b) {
                adam_step(nets.reg.blocks[b].values, g_reg.weights.blocks[b].values, adam_reg[b], cfg.lr2,
                          nets.reg.blocks[b].name);
            }
        } catch (const DivergenceError& e) {
            abort_all(fmt::format("epoch {}: {}", epoch, e.what()));
            break;
        }
        u_prev = std::move(f.u);
    }

    // Final outputs with dropout disabled.
    DipForward fin;
    try {
        fin = dip_forward(nets, stack, seg_input, noise_reg, u_prev, {false, 0}, nullptr, nullptr);
    } catch (const DivergenceError& e) {
        abort_all(fmt::format("final pass: {}", e.what()));
        for (std::size_t i = 0; i < stack.size(); ++i) {
            finish(outs[i], stack[i], Image2D(w, h, 0.5), DisplacementField(w, h));
        }
        return outs;
    }
    for (std::size_t i = 0; i < stack.size(); ++i) {
        finish(outs[i], stack[i], std::move(fin.theta[i]), std::move(fin.u[i]));
    }
    return outs;
}

} // namespace jsreg
