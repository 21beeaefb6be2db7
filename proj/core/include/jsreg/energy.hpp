#pragma once

#include "jsreg/geodesic.hpp"
#include "jsreg/image.hpp"

namespace jsreg {

/// Weights and constants of the joint segmentation/registration energy.
/// Integrals over the domain are evaluated as per-pixel means.
struct EnergyParams {
    double mu = 30.0;       // geodesic fidelity
    double lambda1 = 2.0;   // region prior on theta
    double lambda2 = 0.1;   // region prior on the warped theta
    double beta1 = 50.0;    // global intensity alignment
    double beta2 = 50.0;    // local (detail-layer) alignment
    double a1 = 0.5;        // ROI mean of T
    double a2 = 0.0;        // background mean of T
    double c1 = 0.5;        // ROI mean of R
    double c2 = 0.0;        // background mean of R
    double sigma_s = 2.0;   // smoothing scale for Ts, Rs (pixels)
    double eps_abs = 1e-3;  // sqrt(r^2 + eps^2) smoothing of |r|

    void validate() const;
};

struct EnergyBreakdown {
    double term_fidelity = 0.0;
    double term_seg_t = 0.0;
    double term_seg_r = 0.0;
    double term_global = 0.0;
    double term_local = 0.0;
    double total = 0.0;
};

struct RegionMeans {
    double inside = 0.0;
    double outside = 0.0;
};

// Mean intensity within `radius` of any marker, and of the complement.
[[nodiscard]] RegionMeans region_means(const Image2D& img, const MarkerSet& markers, double radius);

// (f - a_in)^2 - (f - a_out)^2
[[nodiscard]] Image2D phi(const Image2D& f, double a_in, double a_out);

[[nodiscard]] double term_fidelity(const Image2D& theta, const Image2D& t, const Image2D& d, double mu,
                                   double eps_abs);
[[nodiscard]] double term_seg(const Image2D& field, const Image2D& phi_map, double weight);
[[nodiscard]] double term_global(const Image2D& t, const DisplacementField& u, const Image2D& r, double beta1);
// Ts is the smoothed warped template (smoothing applied after warping).
[[nodiscard]] double term_local(const Image2D& t, const DisplacementField& u, const Image2D& r, double sigma_s,
                                double beta2);

[[nodiscard]] EnergyBreakdown total_energy(const Image2D& theta, const DisplacementField& u, const Image2D& t,
                                           const Image2D& r, const Image2D& d, const EnergyParams& params);
[[nodiscard]] Image2D grad_theta(const Image2D& theta, const DisplacementField& u, const Image2D& t,
                                 const Image2D& r, const Image2D& d, const EnergyParams& params);
[[nodiscard]] DisplacementField grad_u(const Image2D& theta, const DisplacementField& u, const Image2D& t,
                                       const Image2D& r, const Image2D& d, const EnergyParams& params);

struct EnergyEvaluation {
    EnergyBreakdown energy;
    Image2D d_theta;
    DisplacementField d_u;
};

/// One slice's energy with the theta/u-independent pieces cached, so the
/// optimizers can evaluate energy and both gradients in a single pass.
class EnergyProblem {
public:
    EnergyProblem(Image2D t, Image2D r, Image2D d, EnergyParams params);

    [[nodiscard]] EnergyBreakdown energy(const Image2D& theta, const DisplacementField& u) const;
    [[nodiscard]] EnergyEvaluation evaluate(const Image2D& theta, const DisplacementField& u) const;

    [[nodiscard]] const Image2D& template_image() const noexcept { return t_; }
    [[nodiscard]] const Image2D& reference_image() const noexcept { return r_; }
    [[nodiscard]] const Image2D& distance() const noexcept { return d_; }
    [[nodiscard]] const EnergyParams& params() const noexcept { return params_; }

private:
    void check(const Image2D& theta, const DisplacementField& u) const;

    Image2D t_;
    Image2D r_;
    Image2D d_;
    EnergyParams params_;
    Image2D phi_t_;
    Image2D phi_r_;
    Image2D r_detail_;  // Rs - R
};

} // namespace jsreg
