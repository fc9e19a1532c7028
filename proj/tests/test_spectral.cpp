#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <numbers>

#include "dqhe/engine.hpp"
#include "dqhe/spectral.hpp"

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

// Shifted inverse iteration with hand-rolled Gaussian elimination; an
// eigenvalue oracle that shares nothing with the Eigen-based solver path.
double inverse_iteration_eigenvalue(const Mat5& m, double shift) {
    std::array<std::array<double, 5>, 5> a{};
    std::array<double, 5> v{1.0, 1.0, 1.0, 1.0, 1.0};
    double zeta = shift;
    for (int iter = 0; iter < 200; ++iter) {
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 5; ++j) a[i][j] = m(i, j) - (i == j ? zeta : 0.0);
        std::array<double, 5> x = v;
        std::array<int, 5> perm{0, 1, 2, 3, 4};
        for (int col = 0; col < 5; ++col) {
            int pivot = col;
            for (int rr = col + 1; rr < 5; ++rr)
                if (std::abs(a[perm[rr]][col]) > std::abs(a[perm[pivot]][col])) pivot = rr;
            std::swap(perm[col], perm[pivot]);
            const double diag = a[perm[col]][col];
            if (diag == 0.0) break;  // exactly singular: zeta is the eigenvalue
            for (int rr = col + 1; rr < 5; ++rr) {
                const double f = a[perm[rr]][col] / diag;
                for (int cc = col; cc < 5; ++cc) a[perm[rr]][cc] -= f * a[perm[col]][cc];
                x[perm[rr]] -= f * x[perm[col]];
            }
        }
        std::array<double, 5> w{};
        for (int row = 4; row >= 0; --row) {
            double s = x[perm[row]];
            for (int cc = row + 1; cc < 5; ++cc) s -= a[perm[row]][cc] * w[cc];
            w[row] = s / a[perm[row]][row];
        }
        double norm = 0.0;
        for (double c : w) norm += c * c;
        norm = std::sqrt(norm);
        for (int i = 0; i < 5; ++i) v[i] = w[i] / norm;
        // Rayleigh-quotient update for cubic convergence
        double num = 0.0;
        for (int i = 0; i < 5; ++i) {
            double row = 0.0;
            for (int j = 0; j < 5; ++j) row += m(i, j) * v[j];
            num += v[i] * row;
        }
        const double next = num;
        if (std::abs(next - zeta) < 1e-14 * (1.0 + std::abs(next)) && iter > 2) return next;
        zeta = next;
    }
    return zeta;
}

}  // namespace

TEST_CASE("dominant eigenpair at zero counting field") {
    const EngineParams p = reference_point();
    const SpectralTriple triple = dominant_eig(build_liouvillian(p, 0.0, 0.0));
    const Vec5 one = trace_vector();

    SECTION("zero mode with the trace left vector") {
        CHECK_THAT(triple.zeta, WithinAbs(0.0, 1e-11));
        const Vec5 scaled = triple.left / triple.left(0);
        CHECK((scaled - one).cwiseAbs().maxCoeff() < 1e-10);
    }

    SECTION("right vector is the steady state") {
        const Vec5 state = triple.right / one.dot(triple.right);
        double total = 0.0;
        for (int i = 0; i < 4; ++i) {
            CHECK(state(i) >= 0.0);
            CHECK(state(i) <= 1.0);
            total += state(i);
        }
        CHECK_THAT(total, WithinRel(1.0, 1e-12));
    }

    SECTION("biorthonormal and small residuals") {
        const Mat5 m = build_liouvillian(p, 0.0, 0.0);
        CHECK_THAT(triple.left.dot(triple.right), WithinRel(1.0, 1e-12));
        CHECK((m * triple.right - triple.zeta * triple.right).norm() < 1e-10 * m.norm());
        CHECK((triple.left.transpose() * m).norm() < 1e-10 * m.norm());
    }
}

TEST_CASE("dominant eigenvalue agrees with the inverse-iteration oracle") {
    EngineParams p = reference_point();
    p.p_h = 0.0;
    p.p_c = 0.0;
    const Mat5 m = build_liouvillian(p, 1e-3, 0.0);
    const SpectralTriple triple = dominant_eig(m);
    const double oracle = inverse_iteration_eigenvalue(m, triple.zeta > 0 ? 1e-4 : -1e-4);
    CHECK_THAT(triple.zeta, WithinAbs(oracle, 1e-10));
}

TEST_CASE("degenerate and complex dominant guards") {
    SECTION("two equal leading real parts") {
        Mat5 m = Mat5::Zero();
        m.diagonal() << -1.0, -1.0, -2.0, -3.0, -4.0;
        try {
            dominant_eig(m);
            FAIL("expected degenerate-dominant");
        } catch (const error& e) {
            CHECK(e.code() == errc::degenerate_dominant);
        }
    }
    SECTION("rotation block on top") {
        Mat5 m = Mat5::Zero();
        m(0, 0) = -1.0;
        m(0, 1) = 5.0;
        m(1, 0) = -5.0;
        m(1, 1) = -1.0;
        m.diagonal().tail<3>() << -30.0, -40.0, -50.0;
        try {
            dominant_eig(m);
            FAIL("expected a guard error");
        } catch (const error& e) {
            const bool guarded = e.code() == errc::complex_dominant ||
                                 e.code() == errc::degenerate_dominant;
            CHECK(guarded);
        }
    }
}

TEST_CASE("spectral track") {
    const EngineParams p = reference_point();

    SECTION("grid size contract") {
        for (int bad : {32, 63, 65, 127}) {
            try {
                spectral_track(p, 0.0, bad);
                FAIL("expected invalid-params");
            } catch (const error& e) {
                CHECK(e.code() == errc::invalid_params);
            }
        }
    }

    SECTION("undriven track is constant") {
        EngineParams q = p;
        q.A0 = 0.0;
        const SpectralTrack track = spectral_track(q, 1e-3, 64);
        for (const auto& triple : track.triples) {
            CHECK(triple.zeta == track.triples.front().zeta);
            CHECK(triple.right == track.triples.front().right);
        }
    }

    SECTION("steady-state populations stay nonnegative along the drive") {
        const SpectralTrack track = spectral_track(p, 0.0, 256);
        const Vec5 one = trace_vector();
        for (const auto& triple : track.triples) {
            const Vec5 state = triple.right / one.dot(triple.right);
            for (int i = 0; i < 4; ++i) REQUIRE(state(i) >= -1e-14);
        }
    }

    SECTION("gauge continuity and closure") {
        const SpectralTrack track = spectral_track(p, 1e-3, 256);
        const int n = track.size();
        for (int k = 0; k < n; ++k) {
            const auto& cur = track.triples[static_cast<std::size_t>(k)];
            const auto& nxt = track.triples[static_cast<std::size_t>((k + 1) % n)];
            REQUIRE(cur.right.dot(nxt.right) > 0.0);
            REQUIRE_THAT(cur.left.dot(cur.right), WithinRel(1.0, 1e-12));
        }
    }

    SECTION("refinement leaves shared grid points unchanged") {
        const SpectralTrack coarse = spectral_track(p, 1e-3, 256);
        const SpectralTrack fine = spectral_track(p, 1e-3, 512);
        for (int k = 0; k < coarse.size(); ++k) {
            const double a = coarse.triples[static_cast<std::size_t>(k)].zeta;
            const double b = fine.triples[static_cast<std::size_t>(2 * k)].zeta;
            REQUIRE_THAT(a, WithinAbs(b, 1e-12));
        }
    }
}
