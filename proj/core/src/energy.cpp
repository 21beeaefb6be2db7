#include "jsreg/energy.hpp"

#include <cmath>

#include <fmt/format.h>

#include "jsreg/error.hpp"

namespace jsreg {

void EnergyParams::validate() const {
    for (auto [name, v] : {std::pair{"mu", mu}, {"lambda1", lambda1}, {"lambda2", lambda2}, {"beta1", beta1},
                           {"beta2", beta2}, {"sigma_s", sigma_s}}) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw InvalidArgument(fmt::format("energy parameter {} must be finite and >= 0, got {}", name, v));
        }
    }
    for (auto [name, v] : {std::pair{"a1", a1}, {"a2", a2}, {"c1", c1}, {"c2", c2}}) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw InvalidArgument(fmt::format("region mean {} must lie in [0, 1], got {}", name, v));
        }
    }
    if (!(eps_abs > 0.0)) {
        throw InvalidArgument(fmt::format("eps_abs must be > 0, got {}", eps_abs));
    }
}

RegionMeans region_means(const Image2D& img, const MarkerSet& markers, double radius) {
    markers.validate(img.width, img.height);
    if (!(radius >= 0.0)) {
        throw InvalidArgument("ROI radius must be >= 0");
    }
    const double r2 = radius * radius;
    double sum_in = 0.0;
    double sum_out = 0.0;
    std::size_t n_in = 0;
    std::size_t n_out = 0;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            bool inside = false;
            for (const auto& m : markers.points) {
                const double dx = x - m.x;
                const double dy = y - m.y;
                if (dx * dx + dy * dy <= r2) {
                    inside = true;
                    break;
                }
            }
            if (inside) {
                sum_in += img.at(x, y);
                ++n_in;
            } else {
                sum_out += img.at(x, y);
                ++n_out;
            }
        }
    }
    if (n_out == 0) {
        throw InvalidArgument("ROI radius covers the whole image; background mean undefined");
    }
    return {sum_in / static_cast<double>(n_in), sum_out / static_cast<double>(n_out)};
}

Image2D phi(const Image2D& f, double a_in, double a_out) {
    Image2D out(f.width, f.height);
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double di = f.data[i] - a_in;
        const double d_out = f.data[i] - a_out;
        out.data[i] = di * di - d_out * d_out;
    }
    return out;
}

double term_fidelity(const Image2D& theta, const Image2D& t, const Image2D& d, double mu, double eps_abs) {
    require_same_shape(theta, t, "term_fidelity");
    require_same_shape(theta, d, "term_fidelity distance");
    double acc = 0.0;
    const double e2 = eps_abs * eps_abs;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double r = theta.data[i] - t.data[i];
        acc += d.data[i] * std::sqrt(r * r + e2);
    }
    return mu * acc / static_cast<double>(theta.size());
}

double term_seg(const Image2D& field, const Image2D& phi_map, double weight) {
    require_same_shape(field, phi_map, "term_seg");
    double acc = 0.0;
    for (std::size_t i = 0; i < field.size(); ++i) {
        acc += phi_map.data[i] * field.data[i];
    }
    return weight * acc / static_cast<double>(field.size());
}

double term_global(const Image2D& t, const DisplacementField& u, const Image2D& r, double beta1) {
    require_same_shape(t, r, "term_global");
    const Image2D tw = warp_bilinear(t, u);
    double acc = 0.0;
    for (std::size_t i = 0; i < tw.size(); ++i) {
        const double e = tw.data[i] - r.data[i];
        acc += e * e;
    }
    return beta1 * acc / static_cast<double>(tw.size());
}

double term_local(const Image2D& t, const DisplacementField& u, const Image2D& r, double sigma_s, double beta2) {
    require_same_shape(t, r, "term_local");
    const Image2D tw = warp_bilinear(t, u);
    const Image2D tws = gaussian_smooth(tw, sigma_s);
    const Image2D rs = gaussian_smooth(r, sigma_s);
    double acc = 0.0;
    for (std::size_t i = 0; i < tw.size(); ++i) {
        const double e = (tws.data[i] - tw.data[i]) - (rs.data[i] - r.data[i]);
        acc += e * e;
    }
    return beta2 * acc / static_cast<double>(tw.size());
}

EnergyProblem::EnergyProblem(Image2D t, Image2D r, Image2D d, EnergyParams params)
    : t_(std::move(t)), r_(std::move(r)), d_(std::move(d)), params_(params) {
    require_same_shape(t_, r_, "EnergyProblem reference");
    require_same_shape(t_, d_, "EnergyProblem distance");
    params_.validate();
    phi_t_ = phi(t_, params_.a1, params_.a2);
    phi_r_ = phi(r_, params_.c1, params_.c2);
    const Image2D rs = gaussian_smooth(r_, params_.sigma_s);
    r_detail_ = Image2D(r_.width, r_.height);
    for (std::size_t i = 0; i < r_.size(); ++i) {
        r_detail_.data[i] = rs.data[i] - r_.data[i];
    }
}

void EnergyProblem::check(const Image2D& theta, const DisplacementField& u) const {
    require_same_shape(theta, t_, "energy theta");
    require_same_shape(t_, u, "energy displacement");
}

EnergyBreakdown EnergyProblem::energy(const Image2D& theta, const DisplacementField& u) const {
    check(theta, u);
    EnergyBreakdown e;
    e.term_fidelity = term_fidelity(theta, t_, d_, params_.mu, params_.eps_abs);
    e.term_seg_t = term_seg(theta, phi_t_, params_.lambda1);
    e.term_seg_r = term_seg(warp_bilinear(theta, u), phi_r_, params_.lambda2);

    const Image2D tw = warp_bilinear(t_, u);
    const Image2D tws = gaussian_smooth(tw, params_.sigma_s);
    double acc_g = 0.0;
    double acc_l = 0.0;
    for (std::size_t i = 0; i < tw.size(); ++i) {
        const double eg = tw.data[i] - r_.data[i];
        const double el = tws.data[i] - tw.data[i] - r_detail_.data[i];
        acc_g += eg * eg;
        acc_l += el * el;
    }
    const double n = static_cast<double>(tw.size());
    e.term_global = params_.beta1 * acc_g / n;
    e.term_local = params_.beta2 * acc_l / n;
    e.total = e.term_fidelity + e.term_seg_t + e.term_seg_r + e.term_global + e.term_local;
    return e;
}

EnergyEvaluation EnergyProblem::evaluate(const Image2D& theta, const DisplacementField& u) const {
    EnergyEvaluation out{energy(theta, u), Image2D(theta.width, theta.height), DisplacementField(u.width, u.height)};
    const double n = static_cast<double>(theta.size());
    const double e2 = params_.eps_abs * params_.eps_abs;

    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double r = theta.data[i] - t_.data[i];
        out.d_theta.data[i] = (params_.mu * d_.data[i] * r / std::sqrt(r * r + e2) + params_.lambda1 * phi_t_.data[i]) / n;
    }

    // theta(x + u) pathway of the warped region prior.
    if (params_.lambda2 != 0.0) {
        Image2D upstream(theta.width, theta.height);
        for (std::size_t i = 0; i < upstream.size(); ++i) {
            upstream.data[i] = params_.lambda2 * phi_r_.data[i] / n;
        }
        const auto wg = warp_gradients(theta, u, upstream);
        for (std::size_t i = 0; i < theta.size(); ++i) {
            out.d_theta.data[i] += wg.d_img.data[i];
            out.d_u.ux[i] += wg.d_u.ux[i];
            out.d_u.uy[i] += wg.d_u.uy[i];
        }
    }

    // T(x + u) pathway of the global and local alignment terms.
    if (params_.beta1 != 0.0 || params_.beta2 != 0.0) {
        const Image2D tw = warp_bilinear(t_, u);
        const Image2D tws = gaussian_smooth(tw, params_.sigma_s);
        Image2D local_res(tw.width, tw.height);
        Image2D upstream(tw.width, tw.height);
        for (std::size_t i = 0; i < tw.size(); ++i) {
            local_res.data[i] = 2.0 * params_.beta2 / n * (tws.data[i] - tw.data[i] - r_detail_.data[i]);
            upstream.data[i] = 2.0 * params_.beta1 / n * (tw.data[i] - r_.data[i]) - local_res.data[i];
        }
        const Image2D back = gaussian_smooth_adjoint(local_res, params_.sigma_s);
        for (std::size_t i = 0; i < tw.size(); ++i) {
            upstream.data[i] += back.data[i];
        }
        const auto wg = warp_gradients(t_, u, upstream);
        for (std::size_t i = 0; i < theta.size(); ++i) {
            out.d_u.ux[i] += wg.d_u.ux[i];
            out.d_u.uy[i] += wg.d_u.uy[i];
        }
    }
    return out;
}

EnergyBreakdown total_energy(const Image2D& theta, const DisplacementField& u, const Image2D& t, const Image2D& r,
                             const Image2D& d, const EnergyParams& params) {
    return EnergyProblem(t, r, d, params).energy(theta, u);
}

Image2D grad_theta(const Image2D& theta, const DisplacementField& u, const Image2D& t, const Image2D& r,
                   const Image2D& d, const EnergyParams& params) {
    return EnergyProblem(t, r, d, params).evaluate(theta, u).d_theta;
}

DisplacementField grad_u(const Image2D& theta, const DisplacementField& u, const Image2D& t, const Image2D& r,
                         const Image2D& d, const EnergyParams& params) {
    return EnergyProblem(t, r, d, params).evaluate(theta, u).d_u;
}

} // namespace jsreg
