#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "dqhe/engine.hpp"
#include "dqhe/error.hpp"
#include "dqhe/spectral.hpp"

namespace dqhe {

/// Numerical knobs for the counting-statistics pipeline.
struct FcsConfig {
    int grid_points = 512;          ///< starting period-grid resolution
    double lambda_step = 1e-3;      ///< counting-field stencil step h
    bool richardson = true;         ///< extrapolate cumulants from steps 2h and h
    double integral_tol = 1e-9;     ///< relative tolerance for period integrals
    int max_grid_points = 1 << 16;  ///< refinement cap before no-convergence
    bool fourth_order_rdot = false; ///< 4th-order stencil for dR/dt (default 2nd)

    void validate() const {
        if (!(lambda_step > 0.0)) raise(errc::bad_config, "lambda_step must be positive");
        if (grid_points < 64 || grid_points % 2 != 0)
            raise(errc::bad_config, "grid_points must be even and at least 64");
        if (max_grid_points < grid_points)
            raise(errc::bad_config, "max_grid_points must be at least grid_points");
        if (!(integral_tol > 0.0)) raise(errc::bad_config, "integral_tol must be positive");
    }
};

/// First and second cumulants of the photon exchange, split into the
/// time-averaged (dynamic) and driving-loop (geometric) parts, plus the
/// derived Fano factor, affinity and uncertainty product.
struct CumulantSet {
    double c_d1 = 0.0;
    double c_d2 = 0.0;
    double c_g1 = 0.0;
    double c_g2 = 0.0;
    double fano = 0.0;         ///< (c_d2 + c_g2) / (c_d1 + c_g1)
    double affinity = 0.0;
    double tur_product = 0.0;  ///< fano * affinity
};

/// Period average of the dominant eigenvalue over a track, optionally on the
/// stride-subsampled grid (stride must divide the track size).
inline double dynamic_average(const SpectralTrack& track, int stride = 1) {
    const int n = track.size();
    double sum = 0.0;
    int count = 0;
    for (int k = 0; k < n; k += stride) {
        sum += track.triples[static_cast<std::size_t>(k)].zeta;
        ++count;
    }
    return sum / count;
}

/// Loop integral -(1/t_p) * sum <L_k | dR/dt_k> dt over the aligned track,
/// with dR/dt from periodic central differences (2nd order by default,
/// 4th order on request).
inline double geometric_average(const SpectralTrack& track, int stride = 1,
                                bool fourth_order = false) {
    const int n = track.size() / stride;
    const auto at = [&](int k) -> const SpectralTriple& {
        const int wrapped = ((k % n) + n) % n;
        return track.triples[static_cast<std::size_t>(wrapped * stride)];
    };
    double sum = 0.0;
    if (fourth_order) {
        for (int k = 0; k < n; ++k) {
            const Vec5 d = (8.0 * (at(k + 1).right - at(k - 1).right)
                            - (at(k + 2).right - at(k - 2).right)) / 6.0;
            sum += at(k).left.dot(d);
        }
    } else {
        for (int k = 0; k < n; ++k)
            sum += at(k).left.dot(at(k + 1).right - at(k - 1).right);
    }
    return -sum / (2.0 * track.period);
}

/// Dynamic and geometric cumulant generating functions at one counting field.
struct CgfPair {
    double dynamic = 0.0;
    double geometric = 0.0;
};

namespace detail {

// Absolute floor for the integral convergence test; keeps the relative
// criterion meaningful when a CGF is itself numerically zero. Tightening
// integral_tol below the floor tightens the floor with it.
inline constexpr double kIntegralAbsFloor = 1e-12;

inline bool integral_converged(double coarse, double fine, double rel_tol) {
    const double floor = std::min(kIntegralAbsFloor, rel_tol);
    return std::abs(fine - coarse) <= std::max(rel_tol * std::abs(fine), floor);
}

}  // namespace detail

/// Evaluates both CGFs at one lambda with automatic grid refinement: the
/// grid is doubled until the coarse-grid estimate (every other point of the
/// same track) agrees with the full-grid one within cfg.integral_tol.
/// Undriven parameters short-circuit to the static eigenvalue, for which the
/// geometric part vanishes identically.
inline CgfPair evaluate_cgfs(const EngineParams& p, double lambda, const FcsConfig& cfg) {
    p.validate();
    cfg.validate();
    if (!p.driven())
        return {dominant_eig(build_liouvillian(p, lambda, 0.0)).zeta, 0.0};

    for (int n = cfg.grid_points; n <= cfg.max_grid_points; n *= 2) {
        const SpectralTrack track = spectral_track(p, lambda, n);
        const CgfPair full{dynamic_average(track),
                           geometric_average(track, 1, cfg.fourth_order_rdot)};
        const CgfPair half{dynamic_average(track, 2),
                           geometric_average(track, 2, cfg.fourth_order_rdot)};
        if (detail::integral_converged(half.dynamic, full.dynamic, cfg.integral_tol) &&
            detail::integral_converged(half.geometric, full.geometric, cfg.integral_tol))
            return full;
    }
    raise(errc::no_convergence, "period integrals did not settle below the refinement cap");
}

inline double dynamic_cgf(const EngineParams& p, double lambda, const FcsConfig& cfg) {
    return evaluate_cgfs(p, lambda, cfg).dynamic;
}

inline double geometric_cgf(const EngineParams& p, double lambda, const FcsConfig& cfg) {
    return evaluate_cgfs(p, lambda, cfg).geometric;
}

/// Thermodynamic affinity: log of the ratio of the period-averaged upward
/// and downward cavity-cycle rate products,
///   A = ln[ (1+n_l) <(1+n_c) n_h> / ( n_l <n_c (1+n_h)> ) ].
/// Undriven parameters use the closed form with constant occupations.
inline double affinity(const EngineParams& p, const FcsConfig& cfg = {}) {
    p.validate();
    cfg.validate();
    const double n_l = bose_occupation(p.gap_cavity(), p.T_l);
    if (!p.driven()) {
        const auto occ = occupations(p, 0.0);
        return std::log(((1.0 + n_l) * (1.0 + occ.n_c) * occ.n_h) /
                        (n_l * occ.n_c * (1.0 + occ.n_h)));
    }
    const double t_p = p.period();
    double up_prev = 0.0, down_prev = 0.0;
    for (int n = cfg.grid_points; n <= cfg.max_grid_points; n *= 2) {
        double up = 0.0, down = 0.0;
        for (int k = 0; k < n; ++k) {
            const auto occ = occupations(p, k * t_p / n);
            up += (1.0 + occ.n_c) * occ.n_h;
            down += occ.n_c * (1.0 + occ.n_h);
        }
        up /= n;
        down /= n;
        if (n > cfg.grid_points &&
            detail::integral_converged(up_prev, up, cfg.integral_tol) &&
            detail::integral_converged(down_prev, down, cfg.integral_tol))
            return std::log(((1.0 + n_l) * up) / (n_l * down));
        up_prev = up;
        down_prev = down;
    }
    raise(errc::no_convergence, "affinity integrals did not settle below the refinement cap");
}

namespace detail {

struct CumulantPair {
    double c1 = 0.0;
    double c2 = 0.0;
};

inline CumulantPair central_differences(double s_minus, double s_zero, double s_plus, double h) {
    return {(s_plus - s_minus) / (2.0 * h), (s_plus - 2.0 * s_zero + s_minus) / (h * h)};
}

}  // namespace detail

/// Extracts first and second cumulants of both CGFs by central differences
/// at lambda = 0 (stencil {0, +-h}, extended to {+-2h} when Richardson
/// extrapolation is on). With Richardson, the step-2h and step-h estimates
/// must agree to 1e-6 relative to the largest cumulant magnitude, else
/// errc::stencil_inconsistency. A total flux below 1e-14 raises
/// errc::zero_flux instead of returning a non-finite Fano factor.
inline CumulantSet cumulants(const EngineParams& p, const FcsConfig& cfg = {}) {
    p.validate();
    cfg.validate();
    const double h = cfg.lambda_step;

    const CgfPair s0 = evaluate_cgfs(p, 0.0, cfg);
    const CgfPair sp = evaluate_cgfs(p, h, cfg);
    const CgfPair sm = evaluate_cgfs(p, -h, cfg);

    CumulantSet out;
    const auto dyn_h = detail::central_differences(sm.dynamic, s0.dynamic, sp.dynamic, h);
    const auto geo_h = detail::central_differences(sm.geometric, s0.geometric, sp.geometric, h);

    if (cfg.richardson) {
        const CgfPair sp2 = evaluate_cgfs(p, 2.0 * h, cfg);
        const CgfPair sm2 = evaluate_cgfs(p, -2.0 * h, cfg);
        const auto dyn_2h = detail::central_differences(sm2.dynamic, s0.dynamic, sp2.dynamic, 2.0 * h);
        const auto geo_2h = detail::central_differences(sm2.geometric, s0.geometric, sp2.geometric, 2.0 * h);

        out.c_d1 = (4.0 * dyn_h.c1 - dyn_2h.c1) / 3.0;
        out.c_d2 = (4.0 * dyn_h.c2 - dyn_2h.c2) / 3.0;
        out.c_g1 = (4.0 * geo_h.c1 - geo_2h.c1) / 3.0;
        out.c_g2 = (4.0 * geo_h.c2 - geo_2h.c2) / 3.0;

        const double scale = std::max({std::abs(out.c_d1), std::abs(out.c_d2),
                                       std::abs(out.c_g1), std::abs(out.c_g2), 1e-12});
        const double disagreement = std::max({std::abs(dyn_h.c1 - dyn_2h.c1),
                                              std::abs(dyn_h.c2 - dyn_2h.c2),
                                              std::abs(geo_h.c1 - geo_2h.c1),
                                              std::abs(geo_h.c2 - geo_2h.c2)});
        if (disagreement > 1e-6 * scale)
            raise(errc::stencil_inconsistency,
                  "step-h and step-2h cumulant estimates disagree beyond 1e-6 relative");
    } else {
        out.c_d1 = dyn_h.c1;
        out.c_d2 = dyn_h.c2;
        out.c_g1 = geo_h.c1;
        out.c_g2 = geo_h.c2;
    }

    const double flux = out.c_d1 + out.c_g1;
    if (std::abs(flux) < 1e-14)
        raise(errc::zero_flux, "total photon flux vanishes; Fano factor undefined");
    out.fano = (out.c_d2 + out.c_g2) / flux;
    out.affinity = affinity(p, cfg);
    out.tur_product = out.fano * out.affinity;
    return out;
}

/// Fluctuation-theorem symmetry residual of the static dynamic CGF:
/// |S_d(lambda) - S_d(-lambda - A)| / (|S_d(lambda)| + 1e-300).
/// Only defined for undriven parameters (errc::not_static otherwise).
inline double gc_symmetry_residual(const EngineParams& p, double lambda, const FcsConfig& cfg = {}) {
    p.validate();
    if (p.driven()) raise(errc::not_static, "symmetry check requires A0 = 0");
    const double a = affinity(p, cfg);
    const double s_here = dynamic_cgf(p, lambda, cfg);
    const double s_mirror = dynamic_cgf(p, -lambda - a, cfg);
    return std::abs(s_here - s_mirror) / (std::abs(s_here) + 1e-300);
}

/// Entropy production rate implied by one cumulant set.
inline double entropy_production_rate(const CumulantSet& c) {
    return (c.c_d1 + c.c_g1) * c.affinity;
}

}  // namespace dqhe
