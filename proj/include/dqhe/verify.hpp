#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "dqhe/dataset.hpp"
#include "dqhe/engine.hpp"
#include "dqhe/fcs.hpp"
#include "dqhe/network.hpp"
#include "dqhe/spectral.hpp"
#include "dqhe/train.hpp"

namespace dqhe {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

namespace detail {

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

inline EngineParams reference_point() {
    EngineParams p;
    p.T_c0 = 0.6;
    p.T_h0 = 1.6;
    p.T_l = 0.7;
    p.phi = std::numbers::pi / 2.0;
    p.p_h = 0.5;
    p.p_c = 0.5;
    return p;
}

}  // namespace detail

/// Runs every structural invariant of the pipeline at the reference
/// parameter point and reports one pass/fail row per invariant. Designed to
/// finish in well under a minute.
inline std::vector<CheckResult> run_invariant_suite(const FcsConfig& cfg = {}) {
    std::vector<CheckResult> results;
    auto check = [&](const std::string& name, bool pass, const std::string& detail) {
        results.push_back({name, pass, detail});
    };
    // one failing block must not take the rest of the table down with it
    auto guarded = [&](const std::string& name, auto&& body) {
        try {
            body();
        } catch (const std::exception& e) {
            check(name, false, std::string("threw: ") + e.what());
        }
    };
    const EngineParams ref = detail::reference_point();
    const Vec5 one = trace_vector();

    // --- generator-level invariants ---
    guarded("trace-conservation", [&] {
        double worst = 0.0;
        SplitMix64 rng(12345);
        for (int trial = 0; trial < 16; ++trial) {
            EngineParams p = ref;
            p.T_c0 = rng.uniform(0.2, 0.7);
            p.T_h0 = p.T_c0 + rng.uniform(0.5, 1.2);
            p.T_l = rng.uniform(0.1, 1.0);
            p.phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
            p.p_h = rng.uniform(0.0, 1.0);
            p.p_c = rng.uniform(0.0, 1.0);
            const double t = rng.uniform(0.0, p.period());
            const Mat5 m = build_liouvillian(p, 0.0, t);
            worst = std::max(worst, (one.transpose() * m).cwiseAbs().maxCoeff() / m.cwiseAbs().maxCoeff());
        }
        check("trace-conservation", worst < 1e-14, "max |1.M| / |M| = " + detail::fmt(worst));
    });
    guarded("generator-periodicity", [&] {
        const Mat5 a = build_liouvillian(ref, 0.02, 0.37);
        const Mat5 b = build_liouvillian(ref, 0.02, 0.37 + ref.period());
        const double diff = (a - b).cwiseAbs().maxCoeff() / a.cwiseAbs().maxCoeff();
        check("generator-periodicity", diff < 1e-12, "relative period mismatch " + detail::fmt(diff));
    });
    guarded("counting-field-locality", [&] {
        const double lambda = 0.02;
        const Mat5 dressed = build_liouvillian(ref, lambda, 0.1);
        const Mat5 bare = build_liouvillian(ref, 0.0, 0.1);
        Mat5 diff = dressed - bare;
        const double off34 = diff(2, 3), off43 = diff(3, 2);
        diff(2, 3) = diff(3, 2) = 0.0;
        const bool localized = diff.cwiseAbs().maxCoeff() == 0.0;
        const auto occ = occupations(ref, 0.1);
        const double g2 = ref.g * ref.g;
        const double want34 = g2 * occ.n_l * std::expm1(-lambda);
        const double want43 = g2 * (1.0 + occ.n_l) * std::expm1(lambda);
        const bool values_match = std::abs(off34 - want34) < 1e-12 * g2 &&
                                  std::abs(off43 - want43) < 1e-12 * g2;
        check("counting-field-locality", localized && values_match,
              localized ? "dressing confined to the cavity exchange entries" : "unexpected dressed entries");
    });
    guarded("protocol-phase-reflection", [&] {
        // time reflection about the half-period fixes T_c and maps
        // phi -> 2*pi - phi on the hot protocol
        EngineParams p = ref;
        p.phi = 1.1;
        EngineParams q = ref;
        q.phi = 2.0 * std::numbers::pi - 1.1;
        double worst = 0.0;
        for (int k = 0; k < 7; ++k) {
            const double t = k * p.period() / 7.0;
            const auto a = drive_temperatures(p, t);
            const auto b = drive_temperatures(q, p.period() / 2.0 - t);
            worst = std::max(worst, std::abs(a.T_h - b.T_h));
            worst = std::max(worst, std::abs(a.T_c - b.T_c));
        }
        check("protocol-phase-reflection", worst < 1e-13, "max protocol mismatch = " + detail::fmt(worst));
    });

    // --- spectral invariants ---
    guarded("eigen-residuals", [&] {
        const SpectralTrack track = spectral_track(ref, 1e-3, 128);
        double worst_bi = 0.0, worst_res = 0.0;
        const double dt = track.period / track.size();
        for (int k = 0; k < track.size(); ++k) {
            const auto& triple = track.triples[static_cast<std::size_t>(k)];
            worst_bi = std::max(worst_bi, std::abs(triple.left.dot(triple.right) - 1.0));
            const Mat5 m = build_liouvillian(ref, 1e-3, k * dt);
            const double scale = m.norm();
            worst_res = std::max(worst_res, (m * triple.right - triple.zeta * triple.right).norm() / scale);
            worst_res = std::max(worst_res,
                                 (triple.left.transpose() * m - triple.zeta * triple.left.transpose()).norm() / scale);
        }
        check("biorthonormality", worst_bi < 1e-12, "max |<L|R> - 1| = " + detail::fmt(worst_bi));
        check("eigen-residuals", worst_res < 1e-10, "max residual / |M| = " + detail::fmt(worst_res));
    });
    guarded("zero-mode", [&] {
        const SpectralTriple triple = dominant_eig(build_liouvillian(ref, 0.0, 0.0));
        const double zeta_size = std::abs(triple.zeta);
        Vec5 left_dir = triple.left / triple.left(0);
        const double left_err = (left_dir - one).cwiseAbs().maxCoeff();
        check("zero-mode", zeta_size < 1e-10 && left_err < 1e-9,
              "|zeta| = " + detail::fmt(zeta_size) + ", left deviation " + detail::fmt(left_err));
    });
    guarded("gauge-freedom", [&] {
        // gauge freedom: a smooth positive periodic rescale of (R, L) moves
        // the loop integral only at the O(dt^2) level of the derivative
        // stencil, so the drift must vanish quadratically under refinement
        auto drift_at = [&](int n) {
            const SpectralTrack base = spectral_track(ref, 1e-3, n);
            SpectralTrack scaled = base;
            for (int k = 0; k < n; ++k) {
                const double theta = 2.0 * std::numbers::pi * k / n;
                const double c = 1.0 + 0.35 * std::sin(theta) + 0.2 * std::cos(2.0 * theta);
                scaled.triples[static_cast<std::size_t>(k)].right *= c;
                scaled.triples[static_cast<std::size_t>(k)].left /= c;
            }
            return std::abs(geometric_average(scaled) - geometric_average(base));
        };
        const double coarse = drift_at(256);
        const double fine = drift_at(512);
        check("gauge-freedom", fine < 1e-5 && fine < coarse / 3.0,
              "drift " + detail::fmt(coarse) + " -> " + detail::fmt(fine) + " under refinement");
    });

    // --- counting-statistics invariants ---
    guarded("cgf-zero-at-origin", [&] {
        const double s_d0 = std::abs(dynamic_cgf(ref, 0.0, cfg));
        const double s_g0 = std::abs(geometric_cgf(ref, 0.0, cfg));
        check("cgf-zero-at-origin", s_d0 < 1e-10 && s_g0 < 1e-10,
              "|S_d(0)| = " + detail::fmt(s_d0) + ", |S_g(0)| = " + detail::fmt(s_g0));
    });
    guarded("geometric-vanishing-at-multiples-of-pi", [&] {
        bool pass = true;
        std::string detail_str;
        for (double phi : {0.0, std::numbers::pi, 2.0 * std::numbers::pi}) {
            EngineParams p = ref;
            p.phi = phi;
            const CumulantSet c = cumulants(p, cfg);
            const double dyn = std::max(std::abs(c.c_d1), std::abs(c.c_d2));
            const double geo = std::max(std::abs(c.c_g1), std::abs(c.c_g2));
            if (geo >= 1e-8 * dyn) pass = false;
            detail_str += detail::fmt(geo / dyn) + " ";
        }
        check("geometric-vanishing-at-multiples-of-pi", pass, "relative sizes: " + detail_str);
    });
    guarded("geometric-linear-in-omega", [&] {
        EngineParams doubled = ref;
        doubled.omega *= 2.0;
        const CumulantSet c1 = cumulants(ref, cfg);
        const CumulantSet c2 = cumulants(doubled, cfg);
        const double geo_err = std::max(std::abs(c2.c_g1 - 2.0 * c1.c_g1) / std::abs(2.0 * c1.c_g1),
                                        std::abs(c2.c_g2 - 2.0 * c1.c_g2) / std::abs(2.0 * c1.c_g2));
        const double dyn_err = std::max(std::abs(c2.c_d1 - c1.c_d1) / std::abs(c1.c_d1),
                                        std::abs(c2.c_d2 - c1.c_d2) / std::abs(c1.c_d2));
        check("geometric-linear-in-omega", geo_err < 1e-8 && dyn_err < 1e-8,
              "geometric dev " + detail::fmt(geo_err) + ", dynamic dev " + detail::fmt(dyn_err));
    });
    guarded("first-cumulant-vs-perturbation-flux", [&] {
        EngineParams p = ref;
        p.A0 = 0.0;
        const SpectralTriple triple = dominant_eig(build_liouvillian(p, 0.0, 0.0));
        const Vec5 state = triple.right / one.dot(triple.right);
        const double n_l = bose_occupation(p.gap_cavity(), p.T_l);
        const double flux_hf = p.g * p.g * ((1.0 + n_l) * state(2) - n_l * state(3));
        const CumulantSet c = cumulants(p, cfg);
        const double rel = std::abs(flux_hf - c.c_d1) / std::abs(flux_hf);
        check("first-cumulant-vs-perturbation-flux", rel < 1e-6, "relative deviation " + detail::fmt(rel));
    });
    guarded("static-fluctuation-symmetry", [&] {
        EngineParams p = ref;
        p.A0 = 0.0;
        p.phi = 0.0;
        const double residual = gc_symmetry_residual(p, 0.1, cfg);
        check("static-fluctuation-symmetry", residual < 1e-8, "residual " + detail::fmt(residual));
    });
    guarded("geometric-antisymmetry-in-phi", [&] {
        EngineParams p = ref;
        p.phi = 1.0;
        EngineParams q = ref;
        q.phi = 2.0 * std::numbers::pi - 1.0;
        const CumulantSet cp = cumulants(p, cfg);
        const CumulantSet cq = cumulants(q, cfg);
        const double rel = std::abs(cp.c_g1 + cq.c_g1) / std::abs(cp.c_g1);
        check("geometric-antisymmetry-in-phi", rel < 1e-4, "relative asymmetry " + detail::fmt(rel));
    });
    guarded("stencil-robustness", [&] {
        // Richardson agreement is enforced inside cumulants(); surviving the
        // call at both step sizes is the robustness statement.
        FcsConfig halved = cfg;
        halved.lambda_step = cfg.lambda_step / 2.0;
        const CumulantSet a = cumulants(ref, cfg);
        const CumulantSet b = cumulants(ref, halved);
        const double scale = std::max(std::abs(a.c_d1), std::abs(a.c_d2));
        const double dev = std::max(std::abs(a.c_d1 - b.c_d1), std::abs(a.c_d2 - b.c_d2)) / scale;
        check("stencil-robustness", dev < 1e-6, "step-halving deviation " + detail::fmt(dev));
    });
    guarded("uncertainty-bound-at-zero-geometric-phase", [&] {
        // The doubly-maximal-coherence corner is excluded: the generator
        // turns reducible toward p_h = p_c = 1 (a dark state closes the
        // spectral gap), where no unique dominant branch defines the
        // long-time statistics. F*A grows toward that corner, so the bound
        // is not at risk there.
        bool pass = true;
        double worst = 10.0;
        for (double phi : {0.0, std::numbers::pi, 2.0 * std::numbers::pi}) {
            for (double p_h : {0.0, 0.5, 0.9, 1.0}) {
                for (double p_c : {0.0, 0.5, 0.9}) {
                    EngineParams p = ref;
                    p.phi = phi;
                    p.p_h = p_h;
                    p.p_c = p_c;
                    const CumulantSet c = cumulants(p, cfg);
                    worst = std::min(worst, c.tur_product);
                    if (c.tur_product < 2.0) pass = false;
                }
            }
        }
        check("uncertainty-bound-at-zero-geometric-phase", pass, "min F*A = " + detail::fmt(worst));
    });

    // --- dataset invariants ---
    guarded("dataset-invariants", [&] {
        FcsConfig quick = cfg;
        const Dataset a = generate(24, 99, quick);
        const Dataset b = generate(24, 99, quick, {}, {}, /*threads=*/2);
        bool in_range = true;
        for (const auto& rec : a.records) {
            in_range &= rec.inputs[0] >= 0.2 && rec.inputs[0] <= 0.7;
            in_range &= rec.inputs[1] - rec.inputs[0] >= 0.5 && rec.inputs[1] - rec.inputs[0] <= 1.2;
            in_range &= rec.inputs[2] >= 0.1 && rec.inputs[2] <= 1.0;
            in_range &= rec.inputs[3] >= 0.0 && rec.inputs[3] <= 2.0 * std::numbers::pi;
            in_range &= rec.inputs[4] >= 0.0 && rec.inputs[4] <= 1.0;
            in_range &= rec.inputs[5] >= 0.0 && rec.inputs[5] <= 1.0;
        }
        int n_train = 0, n_val = 0, n_test = 0, n_ok = 0;
        for (const auto& rec : a.records) {
            if (rec.status != RecordStatus::ok) continue;
            ++n_ok;
            if (rec.split == Split::train) ++n_train;
            if (rec.split == Split::validation) ++n_val;
            if (rec.split == Split::test) ++n_test;
        }
        const bool splits_ok = n_train + n_val + n_test == n_ok &&
                               std::abs(n_train - 0.70 * n_ok) <= 1.0 &&
                               std::abs(n_val - 0.15 * n_ok) <= 1.0 &&
                               std::abs(n_test - 0.15 * n_ok) <= 1.0;
        check("dataset-determinism", a.manifest.digest == b.manifest.digest,
              "digest " + a.manifest.digest);
        check("dataset-range-containment", in_range, "all sampled inputs inside the box");
        check("dataset-split-proportions", splits_ok,
              std::to_string(n_train) + "/" + std::to_string(n_val) + "/" + std::to_string(n_test));
    });

    // --- network invariants ---
    guarded("jacobian-vs-finite-differences", [&] {
        const std::vector<int> probe_layers{6, 4, 1};
        Eigen::VectorXd lo = Eigen::VectorXd::Constant(6, -1.0);
        Eigen::VectorXd hi = Eigen::VectorXd::Constant(6, 1.0);
        NetworkModel probe = make_network(probe_layers, 7, lo, hi);
        SplitMix64 rng(3);
        Eigen::MatrixXd x(5, 6);
        Eigen::VectorXd y(5);
        for (long i = 0; i < x.rows(); ++i) {
            for (long j = 0; j < x.cols(); ++j) x(i, j) = rng.uniform(-1.0, 1.0);
            y(i) = rng.uniform(-1.0, 1.0);
        }
        const Eigen::MatrixXd analytic = jacobian(probe, x, y);
        Eigen::MatrixXd numeric(analytic.rows(), analytic.cols());
        const double h = 1e-6;
        Eigen::VectorXd z = detail::flatten(probe);
        for (long j = 0; j < z.size(); ++j) {
            NetworkModel plus = probe, minus = probe;
            Eigen::VectorXd zp = z, zm = z;
            zp(j) += h;
            zm(j) -= h;
            detail::unflatten(plus, zp);
            detail::unflatten(minus, zm);
            numeric.col(j) = ((y - forward_batch(plus, x)) - (y - forward_batch(minus, x))) / (2.0 * h);
        }
        const double worst = (analytic - numeric).cwiseAbs().maxCoeff();
        check("jacobian-vs-finite-differences", worst < 1e-6, "max abs deviation " + detail::fmt(worst));

        const std::string path = "/tmp/dqhe_verify_model.txt";
        save_network(probe, path);
        const NetworkModel loaded = load_network(path);
        bool identical = true;
        for (int trial = 0; trial < 8; ++trial) {
            Eigen::VectorXd probe_x(6);
            for (int j = 0; j < 6; ++j) probe_x(j) = rng.uniform(-1.0, 1.0);
            if (forward(probe, probe_x) != forward(loaded, probe_x)) identical = false;
        }
        std::remove(path.c_str());
        check("model-serialization-roundtrip", identical, "bitwise-identical predictions");
    });
    guarded("training-invariants", [&] {
        // tiny training run: accepted-step monotonicity and seed determinism
        FcsConfig quick = cfg;
        const Dataset ds = generate(60, 11, quick);
        TrainConfig tc;
        tc.hidden = {6};
        tc.max_epochs = 12;
        tc.seed = 5;
        const auto [model_a, report_a] = train(ds, tc);
        const auto [model_b, report_b] = train(ds, tc);
        bool monotone = true;
        for (std::size_t i = 1; i < report_a.train_mse.size(); ++i)
            if (report_a.train_mse[i] > report_a.train_mse[i - 1]) monotone = false;
        bool deterministic = report_a.train_mse == report_b.train_mse &&
                             report_a.val_mse == report_b.val_mse &&
                             detail::flatten(model_a) == detail::flatten(model_b);
        check("training-monotone-accepted-error", monotone,
              std::to_string(report_a.train_mse.size()) + " accepted epochs");
        check("training-seed-determinism", deterministic, "identical reports and weights");
    });

    return results;
}

}  // namespace dqhe
