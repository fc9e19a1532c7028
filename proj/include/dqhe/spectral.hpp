#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "dqhe/engine.hpp"
#include "dqhe/error.hpp"

namespace dqhe {

/// Dominant eigenvalue of the generator together with its biorthonormal
/// left/right eigenvectors: <L|R> = 1, R has unit Euclidean norm with the
/// largest-magnitude entry positive.
struct SpectralTriple {
    double zeta = 0.0;
    Vec5 left = Vec5::Zero();
    Vec5 right = Vec5::Zero();
};

namespace detail {

// Absolute real-part gap below which branch selection is unreliable.
inline constexpr double kDegenerateGap = 1e-10;
// Imaginary part of the dominant eigenvalue must stay below this, relative
// to 1 + |zeta|.
inline constexpr double kImagTol = 1e-9;

}  // namespace detail

/// Eigen-decomposes a 5x5 generator and extracts the branch with the largest
/// real part. The left eigenvector comes from the corresponding row of the
/// inverse eigenvector matrix, which fixes <L|R> = 1 up to roundoff.
///
/// Throws errc::degenerate_dominant when the two largest real parts are
/// closer than 1e-10 (branch tracking would be ambiguous) and
/// errc::complex_dominant when the selected eigenvalue or its eigenvectors
/// carry a non-negligible imaginary part.
inline SpectralTriple dominant_eig(const Mat5& m) {
    if (!m.allFinite()) raise(errc::invalid_params, "matrix has non-finite entries");

    Eigen::EigenSolver<Mat5> solver(m, /*computeEigenvectors=*/true);
    if (solver.info() != Eigen::Success)
        raise(errc::singular_system, "eigendecomposition failed");

    const auto& values = solver.eigenvalues();
    int top = 0, second = -1;
    for (int i = 1; i < 5; ++i)
        if (values(i).real() > values(top).real()) top = i;
    for (int i = 0; i < 5; ++i) {
        if (i == top) continue;
        if (second < 0 || values(i).real() > values(second).real()) second = i;
    }
    if (values(top).real() - values(second).real() < detail::kDegenerateGap)
        raise(errc::degenerate_dominant, "two leading real parts closer than 1e-10");

    const std::complex<double> zeta = values(top);
    if (std::abs(zeta.imag()) > detail::kImagTol * (1.0 + std::abs(zeta)))
        raise(errc::complex_dominant, "dominant eigenvalue is not real");

    const Eigen::Matrix<std::complex<double>, 5, 5> vectors = solver.eigenvectors();
    const Eigen::Matrix<std::complex<double>, 5, 5> inverse = vectors.inverse();
    const Eigen::Matrix<std::complex<double>, 5, 1> right_c = vectors.col(top);
    const Eigen::Matrix<std::complex<double>, 5, 1> left_c = inverse.row(top).transpose();

    const double vec_scale = right_c.norm() + left_c.norm();
    if (right_c.imag().norm() + left_c.imag().norm() > detail::kImagTol * vec_scale)
        raise(errc::complex_dominant, "dominant eigenvectors are not real");

    SpectralTriple out;
    out.zeta = zeta.real();
    Vec5 right = right_c.real();
    Vec5 left = left_c.real();

    int largest = 0;
    right.cwiseAbs().maxCoeff(&largest);
    const double sign = right(largest) >= 0.0 ? 1.0 : -1.0;
    const double norm = right.norm();
    right *= sign / norm;
    left *= norm / sign;
    left /= left.dot(right);  // polish the biorthonormalization
    out.right = right;
    out.left = left;
    return out;
}

/// Gauge-aligned eigen-decomposition along one driving period.
/// triples[k] belongs to t_k = k * period / size.
struct SpectralTrack {
    double period = 0.0;
    double lambda = 0.0;
    std::vector<SpectralTriple> triples;

    int size() const { return static_cast<int>(triples.size()); }
};

/// Decomposes the generator on a uniform n_points grid over one period and
/// aligns the eigenvector gauge sequentially so consecutive right vectors
/// overlap positively, including across the periodic wrap. A non-positive
/// overlap that sign flipping cannot repair signals an eigenvalue crossing
/// along the grid; callers should shrink lambda or refine the grid.
inline SpectralTrack spectral_track(const EngineParams& p, double lambda, int n_points) {
    p.validate();
    if (n_points < 64 || n_points % 2 != 0)
        raise(errc::invalid_params, "grid size must be even and at least 64");

    SpectralTrack track;
    track.period = p.period();
    track.lambda = lambda;
    track.triples.resize(static_cast<std::size_t>(n_points));
    const double dt = track.period / n_points;
    for (int k = 0; k < n_points; ++k)
        track.triples[static_cast<std::size_t>(k)] = dominant_eig(build_liouvillian(p, lambda, k * dt));

    for (int k = 1; k < n_points; ++k) {
        auto& cur = track.triples[static_cast<std::size_t>(k)];
        const auto& prev = track.triples[static_cast<std::size_t>(k - 1)];
        double overlap = prev.right.dot(cur.right);
        if (overlap < 0.0) {
            cur.right = -cur.right;
            cur.left = -cur.left;
            overlap = -overlap;
        }
        if (!(overlap > 0.0))
            raise(errc::gauge_discontinuity, "consecutive right eigenvectors are orthogonal");
    }
    if (!(track.triples.back().right.dot(track.triples.front().right) > 0.0))
        raise(errc::gauge_discontinuity, "gauge alignment fails to close around the period");
    return track;
}

}  // namespace dqhe
