#pragma once

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "dqhe/error.hpp"

namespace dqhe {

using Mat5 = Eigen::Matrix<double, 5, 5>;
using Vec5 = Eigen::Matrix<double, 5, 1>;

/// Row vector annihilated from the left by the generator at zero counting
/// field: populations are traced with weight 1, the coherence with weight 0.
inline Vec5 trace_vector() {
    Vec5 v;
    v << 1.0, 1.0, 1.0, 1.0, 0.0;
    return v;
}

/// Static parameters of the four-level engine and its temperature-driving
/// protocol. Units: k_B = 1 and a single energy scale shared by level
/// energies and temperatures; r, g and omega are rates in the same units.
///
/// The two degenerate lower levels sit at E1 = E2; |b> and |a> lie above
/// them. The hot bath drives the E1 <-> Ea transitions, the cold bath the
/// E1 <-> Eb ones, and the cavity exchanges photons across Ea - Eb.
/// Geometric (driving-induced) contributions to the counting statistics
/// scale linearly in omega, so rescaling the frequency unit rescales them
/// by a known factor; dynamic contributions are omega-independent.
struct EngineParams {
    double T_c0 = 0.6;  ///< cold-bath base temperature
    double T_h0 = 1.6;  ///< hot-bath base temperature
    double T_l = 0.7;   ///< cavity temperature (undriven)
    double phi = 0.0;   ///< phase difference between the two protocols
    double p_h = 0.5;   ///< hot-bath coherence control in [0, 1]
    double p_c = 0.5;   ///< cold-bath coherence control in [0, 1]

    double A0 = 0.007;  ///< driving amplitude
    double omega = 0.7; ///< driving angular frequency
    double E1 = 0.1;
    double E2 = 0.1;
    double Eb = 0.3;
    double Ea = 1.5;
    double r = 5.0;     ///< system-bath coupling
    double g = 10.0;    ///< system-cavity coupling

    double period() const { return 2.0 * std::numbers::pi / omega; }
    double gap_cold() const { return Eb - E1; }
    double gap_hot() const { return Ea - E1; }
    double gap_cavity() const { return Ea - Eb; }
    bool driven() const { return A0 != 0.0; }

    /// Throws errc::invalid_params unless every structural constraint holds.
    /// A0 < T_c0 and T_h0 - T_c0 > 2*A0 keep both protocols positive and
    /// ordered (T_h(t) > T_c(t)) at all times.
    void validate() const {
        auto fail = [](const char* what) { raise(errc::invalid_params, what); };
        if (!(T_c0 > 0.0)) fail("T_c0 must be positive");
        if (!(T_h0 > T_c0)) fail("T_h0 must exceed T_c0");
        if (!(T_l > 0.0)) fail("T_l must be positive");
        if (!(A0 >= 0.0)) fail("A0 must be nonnegative");
        if (!(A0 < T_c0)) fail("A0 must stay below T_c0");
        if (!(T_h0 - T_c0 > 2.0 * A0)) fail("T_h0 - T_c0 must exceed 2*A0");
        if (!(omega > 0.0)) fail("omega must be positive");
        if (E1 != E2) fail("E1 and E2 must be degenerate");
        if (!(E1 < Eb && Eb < Ea)) fail("level ordering E1 = E2 < Eb < Ea required");
        if (!(p_h >= 0.0 && p_h <= 1.0)) fail("p_h must lie in [0, 1]");
        if (!(p_c >= 0.0 && p_c <= 1.0)) fail("p_c must lie in [0, 1]");
        if (!(phi >= 0.0 && phi <= 2.0 * std::numbers::pi)) fail("phi must lie in [0, 2*pi]");
        if (!(r > 0.0)) fail("r must be positive");
        if (!(g >= 0.0)) fail("g must be nonnegative");
        if (!std::isfinite(T_c0 + T_h0 + T_l + phi + p_h + p_c + A0 + omega + r + g))
            fail("parameters must be finite");
    }
};

struct DriveTemperatures {
    double T_c;
    double T_h;
};

/// Instantaneous bath temperatures
///   T_c(t) = T_c0 - A0 sin(omega t),
///   T_h(t) = T_h0 - A0 sin(omega t + phi).
inline DriveTemperatures drive_temperatures(const EngineParams& p, double t) {
    p.validate();
    return {p.T_c0 - p.A0 * std::sin(p.omega * t),
            p.T_h0 - p.A0 * std::sin(p.omega * t + p.phi)};
}

/// Bose-Einstein occupation 1/(e^{gap/T} - 1) for gap > 0, T > 0.
inline double bose_occupation(double gap, double T) {
    if (!(gap > 0.0) || !std::isfinite(gap)) raise(errc::domain_error, "gap must be positive");
    if (!(T > 0.0) || !std::isfinite(T)) raise(errc::domain_error, "temperature must be positive");
    return 1.0 / std::expm1(gap / T);
}

/// Occupation numbers entering the generator at one instant.
struct OccupationSet {
    double n_c;  ///< cold bath at gap Eb - E1
    double n_h;  ///< hot bath at gap Ea - E1
    double n_l;  ///< cavity at gap Ea - Eb
};

inline OccupationSet occupations(const EngineParams& p, double t) {
    const auto [T_c, T_h] = drive_temperatures(p, t);
    return {bose_occupation(p.gap_cold(), T_c),
            bose_occupation(p.gap_hot(), T_h),
            bose_occupation(p.gap_cavity(), p.T_l)};
}

/// Counting-field-dressed generator on the basis
/// (rho_11, rho_22, rho_aa, rho_bb, Re rho_12).
///
/// Cavity gain terms carry the counting factors: the a <- b absorption
/// entry (row 3, col 4) is dressed by e^{-lambda} and the b <- a emission
/// entry (row 4, col 3) by e^{+lambda}, so positive counts are photons
/// deposited in the cavity. At lambda = 0 the columns sum to zero under
/// trace_vector().
inline Mat5 build_liouvillian(const EngineParams& p, double lambda, double t) {
    const auto [n_c, n_h, n_l] = occupations(p, t);
    const double nt_c = n_c + 1.0;
    const double nt_h = n_h + 1.0;
    const double nt_l = n_l + 1.0;
    const double n = -(n_c + n_h);
    const double y = -(n_c * p.p_c + n_h * p.p_h);
    const double r = p.r;
    const double g2 = p.g * p.g;

    Mat5 m;
    m << r * n,       0.0,         r * nt_h,                    r * nt_c,                    r * y,
         0.0,         r * n,       r * nt_h,                    r * nt_c,                    r * y,
         r * n_h,     r * n_h,     -g2 * nt_l - 2.0 * r * nt_h, g2 * n_l * std::exp(-lambda), 2.0 * r * p.p_h * n_h,
         r * n_c,     r * n_c,     g2 * nt_l * std::exp(lambda), -g2 * n_l - 2.0 * r * nt_c,  2.0 * r * p.p_c * n_c,
         r * y / 2.0, r * y / 2.0, r * p.p_h * nt_h,            r * p.p_c * nt_c,            r * n;
    return m;
}

}  // namespace dqhe
