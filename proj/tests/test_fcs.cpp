#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "dqhe/fcs.hpp"
#include "dqhe/rng.hpp"

using namespace dqhe;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

EngineParams reference_point() {
    EngineParams p;
    p.T_c0 = 0.6;
    p.T_h0 = 1.6;
    p.T_l = 0.7;
    p.phi = std::numbers::pi / 2.0;
    p.p_h = 0.5;
    p.p_c = 0.5;
    return p;
}

// Cavity temperature at which the static engine satisfies detailed balance,
// so both the photon flux and the affinity vanish.
double equilibrium_cavity_temperature(const EngineParams& p) {
    return p.gap_cavity() / (p.gap_hot() / p.T_h0 - p.gap_cold() / p.T_c0);
}

}  // namespace

TEST_CASE("dynamic CGF") {
    const EngineParams p = reference_point();
    const FcsConfig cfg;

    SECTION("vanishes at zero counting field") {
        CHECK(std::abs(dynamic_cgf(p, 0.0, cfg)) < 1e-10);
    }

    SECTION("undriven case reduces to the static eigenvalue") {
        EngineParams q = p;
        q.A0 = 0.0;
        const double s = dynamic_cgf(q, 2e-3, cfg);
        const double direct = dominant_eig(build_liouvillian(q, 2e-3, 0.0)).zeta;
        CHECK(s == direct);
        CHECK(geometric_cgf(q, 2e-3, cfg) == 0.0);
    }

    SECTION("matches a dense-grid reference") {
        FcsConfig dense = cfg;
        dense.grid_points = 8192;
        const double coarse = dynamic_cgf(p, 1e-3, cfg);
        const double fine = dynamic_cgf(p, 1e-3, dense);
        CHECK_THAT(coarse, WithinRel(fine, 1e-9));
    }

    SECTION("an unreachable tolerance reports no-convergence at the cap") {
        FcsConfig strict = cfg;
        strict.grid_points = 64;
        strict.max_grid_points = 128;
        strict.integral_tol = 1e-17;
        try {
            dynamic_cgf(p, 1e-3, strict);
            FAIL("expected no-convergence");
        } catch (const error& e) {
            CHECK(e.code() == errc::no_convergence);
        }
    }
}

TEST_CASE("geometric CGF") {
    const EngineParams p = reference_point();
    const FcsConfig cfg;

    SECTION("vanishes at zero counting field") {
        CHECK(std::abs(geometric_cgf(p, 0.0, cfg)) < 1e-10);
    }

    SECTION("vanishes for zero phase difference at every stencil node") {
        EngineParams q = p;
        q.phi = 0.0;
        for (double lambda : {-2e-3, -1e-3, 0.0, 1e-3, 2e-3})
            CHECK(std::abs(geometric_cgf(q, lambda, cfg)) < 1e-10);
    }

    SECTION("fourth-order derivative stencil agrees with the default") {
        FcsConfig wide = cfg;
        wide.fourth_order_rdot = true;
        const double second = geometric_cgf(p, 1e-3, cfg);
        const double fourth = geometric_cgf(p, 1e-3, wide);
        CHECK_THAT(fourth, WithinRel(second, 1e-3));
    }

    SECTION("loop integral is invariant under a positive periodic gauge change") {
        // the rescale shifts the discrete integral only through the O(dt^2)
        // derivative stencil, so the drift must shrink quadratically
        auto drift_at = [&](int n) {
            const SpectralTrack base = spectral_track(p, 1e-3, n);
            SpectralTrack scaled = base;
            for (int k = 0; k < n; ++k) {
                const double theta = 2.0 * std::numbers::pi * k / n;
                const double c = 1.3 + 0.5 * std::sin(theta) - 0.15 * std::cos(3.0 * theta);
                scaled.triples[static_cast<std::size_t>(k)].right *= c;
                scaled.triples[static_cast<std::size_t>(k)].left /= c;
            }
            return std::abs(geometric_average(scaled) - geometric_average(base));
        };
        const double coarse = drift_at(256);
        const double fine = drift_at(512);
        CHECK(fine < 1e-5);
        CHECK(fine < coarse / 3.0);
    }
}

TEST_CASE("cumulants") {
    const EngineParams p = reference_point();
    const FcsConfig cfg;

    SECTION("first cumulant matches the perturbation-theory flux when undriven") {
        EngineParams q = p;
        q.A0 = 0.0;
        const SpectralTriple triple = dominant_eig(build_liouvillian(q, 0.0, 0.0));
        const Vec5 state = triple.right / trace_vector().dot(triple.right);
        const double n_l = bose_occupation(q.gap_cavity(), q.T_l);
        const double flux = q.g * q.g * ((1.0 + n_l) * state(2) - n_l * state(3));
        const CumulantSet c = cumulants(q, cfg);
        CHECK_THAT(c.c_d1, WithinRel(flux, 1e-6));
    }

    SECTION("static cumulants match the characteristic-polynomial oracle") {
        // frozen from implicit differentiation of det(M(lambda) - zeta) = 0
        // at the static reference point, evaluated in 30-digit arithmetic:
        // zeta' = -p_l/p_z and zeta'' = -(p_ll + 2 p_lz zeta' + p_zz zeta'^2)/p_z
        EngineParams q = p;
        q.A0 = 0.0;
        q.phi = 0.0;
        const CumulantSet c = cumulants(q, cfg);
        CHECK_THAT(c.c_d1, WithinRel(1.3338469994661184, 1e-8));
        CHECK_THAT(c.c_d2, WithinRel(2.4834308904651930, 1e-6));
    }

    SECTION("detailed-balance point has zero flux and zero affinity") {
        EngineParams q = p;
        q.A0 = 0.0;
        q.T_l = equilibrium_cavity_temperature(q);
        const CumulantSet c = cumulants(q, cfg);
        CHECK_THAT(c.c_d1, WithinAbs(0.0, 1e-9));
        CHECK_THAT(c.affinity, WithinAbs(0.0, 1e-12));
        CHECK(c.c_d2 > 0.0);
    }

    SECTION("Fano identity and nonnegative dynamic variance on random points") {
        SplitMix64 rng(17);
        for (int trial = 0; trial < 4; ++trial) {
            EngineParams q = p;
            q.T_c0 = rng.uniform(0.2, 0.7);
            q.T_h0 = q.T_c0 + rng.uniform(0.5, 1.2);
            q.T_l = rng.uniform(0.1, 1.0);
            q.phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
            q.p_h = rng.uniform(0.0, 1.0);
            q.p_c = rng.uniform(0.0, 1.0);
            const CumulantSet c = cumulants(q, cfg);
            CHECK(c.fano == (c.c_d2 + c.c_g2) / (c.c_d1 + c.c_g1));
            CHECK(c.tur_product == c.fano * c.affinity);
            CHECK(c.c_d2 >= 0.0);
            CHECK(std::isfinite(c.fano));
        }
    }

    SECTION("plain central differences agree with the extrapolated route") {
        FcsConfig plain = cfg;
        plain.richardson = false;
        const CumulantSet a = cumulants(p, cfg);
        const CumulantSet b = cumulants(p, plain);
        CHECK_THAT(b.c_d1, WithinRel(a.c_d1, 1e-5));
        CHECK_THAT(b.c_d2, WithinRel(a.c_d2, 1e-5));
    }

    SECTION("decoupled cavity raises zero-flux") {
        EngineParams q = p;
        q.g = 0.0;
        try {
            cumulants(q, cfg);
            FAIL("expected zero-flux");
        } catch (const error& e) {
            CHECK(e.code() == errc::zero_flux);
        }
    }

    SECTION("antibunched and bunched regimes at low cavity temperature") {
        EngineParams q = p;
        q.T_l = 0.1;
        q.phi = std::numbers::pi;
        q.p_h = 0.1;
        CHECK(cumulants(q, cfg).fano < 1.0);
        q.p_h = 0.95;
        CHECK(cumulants(q, cfg).fano > 1.0);
    }
}

TEST_CASE("affinity") {
    const EngineParams p = reference_point();
    const FcsConfig cfg;

    SECTION("static closed form") {
        EngineParams q = p;
        q.A0 = 0.0;
        const double n_c = bose_occupation(q.gap_cold(), q.T_c0);
        const double n_h = bose_occupation(q.gap_hot(), q.T_h0);
        const double n_l = bose_occupation(q.gap_cavity(), q.T_l);
        const double expected =
            std::log(((1.0 + n_l) * (1.0 + n_c) * n_h) / (n_l * n_c * (1.0 + n_h)));
        CHECK_THAT(affinity(q, cfg), WithinRel(expected, 1e-14));
    }

    SECTION("vanishes at the detailed-balance cavity temperature") {
        EngineParams q = p;
        q.A0 = 0.0;
        q.T_l = equilibrium_cavity_temperature(q);
        CHECK_THAT(affinity(q, cfg), WithinAbs(0.0, 1e-12));
    }

    SECTION("driven value matches a dense-grid reference") {
        FcsConfig dense = cfg;
        dense.grid_points = 8192;
        CHECK_THAT(affinity(p, cfg), WithinRel(affinity(p, dense), 1e-9));
    }
}

TEST_CASE("fluctuation-theorem symmetry of the static CGF") {
    EngineParams p = reference_point();
    p.A0 = 0.0;
    p.phi = 0.0;
    const FcsConfig cfg;

    SECTION("fixed point of the symmetry map") {
        const double a = affinity(p, cfg);
        CHECK(gc_symmetry_residual(p, -a / 2.0, cfg) == 0.0);
    }

    SECTION("zero maps to minus the affinity") {
        const double a = affinity(p, cfg);
        CHECK(std::abs(dynamic_cgf(p, -a, cfg)) < 1e-10);
    }

    SECTION("residual at a finite counting field") {
        CHECK(gc_symmetry_residual(p, 0.1, cfg) < 1e-8);
    }

    SECTION("rejects driven parameters") {
        EngineParams q = p;
        q.A0 = 0.007;
        try {
            gc_symmetry_residual(q, 0.1, cfg);
            FAIL("expected not-static");
        } catch (const error& e) {
            CHECK(e.code() == errc::not_static);
        }
    }
}

TEST_CASE("geometric cumulants scale with the drive") {
    const EngineParams p = reference_point();
    const FcsConfig cfg;
    const CumulantSet base = cumulants(p, cfg);

    SECTION("linear in omega while dynamic parts stay put") {
        EngineParams q = p;
        q.omega *= 2.0;
        const CumulantSet doubled = cumulants(q, cfg);
        CHECK_THAT(doubled.c_g1, WithinRel(2.0 * base.c_g1, 1e-8));
        CHECK_THAT(doubled.c_g2, WithinRel(2.0 * base.c_g2, 1e-8));
        CHECK_THAT(doubled.c_d1, WithinRel(base.c_d1, 1e-8));
        CHECK_THAT(doubled.c_d2, WithinRel(base.c_d2, 1e-8));
    }

    SECTION("odd under phase reflection") {
        EngineParams q = p;
        q.phi = 1.0;
        EngineParams w = p;
        w.phi = 2.0 * std::numbers::pi - 1.0;
        const CumulantSet a = cumulants(q, cfg);
        const CumulantSet b = cumulants(w, cfg);
        CHECK_THAT(a.c_g1, WithinRel(-b.c_g1, 1e-4));
    }

    SECTION("suppressed at phase multiples of pi") {
        for (double phi : {0.0, std::numbers::pi, 2.0 * std::numbers::pi}) {
            EngineParams q = p;
            q.phi = phi;
            const CumulantSet c = cumulants(q, cfg);
            const double dyn = std::max(std::abs(c.c_d1), std::abs(c.c_d2));
            CHECK(std::abs(c.c_g1) < 1e-8 * dyn);
            CHECK(std::abs(c.c_g2) < 1e-8 * dyn);
        }
    }
}

TEST_CASE("entropy production rate") {
    const CumulantSet c{1.5, 3.0, 0.25, 0.0, 0.0, 2.0, 0.0};
    CHECK_THAT(entropy_production_rate(c), WithinRel((1.5 + 0.25) * 2.0, 1e-15));
}
