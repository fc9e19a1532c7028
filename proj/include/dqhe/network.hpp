#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dqhe/error.hpp"
#include "dqhe/rng.hpp"

namespace dqhe {

/// Fully connected feedforward regression network. Hidden layers apply
/// tanh, the output layer is linear. weights[l] has shape
/// (units in layer l) x (units in layer l+1); the flattened parameter
/// vector used by the optimizer and the file format is
/// [W_0 row-major, b_0, W_1, b_1, ...].
///
/// Inputs are affinely rescaled per feature to [-1, 1] using the stored
/// min/max (frozen from the training split); labels are never transformed.
struct NetworkModel {
    std::vector<int> layer_sizes;           ///< e.g. {6, 20, 20, 20, 20, 1}
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
    Eigen::VectorXd scale_min;
    Eigen::VectorXd scale_max;
    std::uint64_t seed = 0;
    std::string dataset_digest;

    int input_dim() const { return layer_sizes.empty() ? 0 : layer_sizes.front(); }

    int parameter_count() const {
        int n = 0;
        for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l)
            n += layer_sizes[l] * layer_sizes[l + 1] + layer_sizes[l + 1];
        return n;
    }

    void validate() const {
        if (layer_sizes.size() < 2) raise(errc::shape_mismatch, "need at least input and output layers");
        if (layer_sizes.back() != 1) raise(errc::shape_mismatch, "output layer must have one unit");
        if (weights.size() != layer_sizes.size() - 1 || biases.size() != weights.size())
            raise(errc::shape_mismatch, "weight/bias count does not match layer sizes");
        for (std::size_t l = 0; l < weights.size(); ++l) {
            if (weights[l].rows() != layer_sizes[l] || weights[l].cols() != layer_sizes[l + 1])
                raise(errc::shape_mismatch, "weight matrix shape mismatch");
            if (biases[l].size() != layer_sizes[l + 1])
                raise(errc::shape_mismatch, "bias vector shape mismatch");
            if (!weights[l].allFinite() || !biases[l].allFinite())
                raise(errc::shape_mismatch, "non-finite network parameters");
        }
        if (scale_min.size() != input_dim() || scale_max.size() != input_dim())
            raise(errc::shape_mismatch, "input scaling constants shape mismatch");
    }
};

/// Fresh network with symmetric-uniform weights of scale 1/sqrt(fan-in) and
/// zero biases, seeded deterministically.
inline NetworkModel make_network(const std::vector<int>& layer_sizes, std::uint64_t seed,
                                 const Eigen::VectorXd& scale_min,
                                 const Eigen::VectorXd& scale_max) {
    NetworkModel m;
    m.layer_sizes = layer_sizes;
    m.seed = seed;
    m.scale_min = scale_min;
    m.scale_max = scale_max;
    SplitMix64 rng = substream(seed, 0);
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        const int fan_in = layer_sizes[l];
        const int fan_out = layer_sizes[l + 1];
        const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
        Eigen::MatrixXd w(fan_in, fan_out);
        for (int i = 0; i < fan_in; ++i)
            for (int j = 0; j < fan_out; ++j) w(i, j) = rng.symmetric(scale);
        m.weights.push_back(std::move(w));
        m.biases.push_back(Eigen::VectorXd::Zero(fan_out));
    }
    m.validate();
    return m;
}

/// Scales a batch of raw inputs (rows = samples) to [-1, 1] per feature.
/// Features with a degenerate min == max range map to 0.
inline Eigen::MatrixXd scale_inputs(const NetworkModel& m, const Eigen::MatrixXd& x) {
    if (x.cols() != m.input_dim()) raise(errc::shape_mismatch, "input feature count mismatch");
    Eigen::MatrixXd s(x.rows(), x.cols());
    for (int j = 0; j < x.cols(); ++j) {
        const double span = m.scale_max(j) - m.scale_min(j);
        if (span == 0.0) {
            s.col(j).setZero();
        } else {
            s.col(j) = (2.0 / span) * (x.col(j).array() - m.scale_min(j)) - 1.0;
        }
    }
    return s;
}

/// Forward pass over a batch; returns one prediction per row of x.
inline Eigen::VectorXd forward_batch(const NetworkModel& m, const Eigen::MatrixXd& x) {
    m.validate();
    Eigen::MatrixXd h = scale_inputs(m, x);
    const std::size_t n_layers = m.weights.size();
    for (std::size_t l = 0; l + 1 < n_layers; ++l)
        h = ((h * m.weights[l]).rowwise() + m.biases[l].transpose()).array().tanh().matrix();
    return (h * m.weights[n_layers - 1]).rowwise() + m.biases[n_layers - 1].transpose();
}

inline double forward(const NetworkModel& m, const Eigen::VectorXd& x) {
    if (x.size() != m.input_dim()) raise(errc::shape_mismatch, "input feature count mismatch");
    return forward_batch(m, x.transpose())(0);
}

namespace detail {

inline void write_values(std::ofstream& out, const double* data, long n) {
    char buf[32];
    for (long i = 0; i < n; ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", data[i]);
        out << (i ? " " : "") << buf;
    }
    out << "\n";
}

}  // namespace detail

/// Self-describing text serialization; 17 significant digits round-trip
/// doubles exactly, so save -> load -> forward is bitwise stable.
inline void save_network(const NetworkModel& m, const std::string& path) {
    m.validate();
    std::ofstream out(path);
    if (!out) raise(errc::io_error, "cannot open " + path + " for writing");
    out << "dqhe-network v1\n";
    out << "layers";
    for (int n : m.layer_sizes) out << " " << n;
    out << "\n";
    out << "seed " << m.seed << "\n";
    out << "dataset_digest " << (m.dataset_digest.empty() ? "-" : m.dataset_digest) << "\n";
    out << "scale_min\n";
    detail::write_values(out, m.scale_min.data(), m.scale_min.size());
    out << "scale_max\n";
    detail::write_values(out, m.scale_max.data(), m.scale_max.size());
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
        out << "weights " << l << "\n";
        // row-major order to match the flattened parameter layout
        const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w = m.weights[l];
        detail::write_values(out, w.data(), w.size());
        out << "biases " << l << "\n";
        detail::write_values(out, m.biases[l].data(), m.biases[l].size());
    }
}

inline NetworkModel load_network(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(errc::io_error, "cannot open " + path);
    std::string token;
    std::getline(in, token);
    if (token != "dqhe-network v1") raise(errc::io_error, path + ": unrecognized header");

    NetworkModel m;
    in >> token;
    if (token != "layers") raise(errc::io_error, path + ": expected layer sizes");
    std::string rest;
    std::getline(in, rest);
    std::istringstream layer_stream(rest);
    int n;
    while (layer_stream >> n) m.layer_sizes.push_back(n);
    if (m.layer_sizes.size() < 2) raise(errc::io_error, path + ": bad layer list");

    in >> token >> m.seed;
    if (token != "seed") raise(errc::io_error, path + ": expected seed");
    in >> token >> m.dataset_digest;
    if (token != "dataset_digest") raise(errc::io_error, path + ": expected dataset digest");
    if (m.dataset_digest == "-") m.dataset_digest.clear();

    const int d = m.layer_sizes.front();
    m.scale_min.resize(d);
    m.scale_max.resize(d);
    in >> token;
    for (int i = 0; i < d; ++i) in >> m.scale_min(i);
    in >> token;
    for (int i = 0; i < d; ++i) in >> m.scale_max(i);

    for (std::size_t l = 0; l + 1 < m.layer_sizes.size(); ++l) {
        const int fan_in = m.layer_sizes[l];
        const int fan_out = m.layer_sizes[l + 1];
        std::size_t idx;
        in >> token >> idx;
        if (token != "weights" || idx != l) raise(errc::io_error, path + ": expected weights block");
        Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w(fan_in, fan_out);
        for (long i = 0; i < w.size(); ++i) in >> w.data()[i];
        m.weights.emplace_back(w);
        in >> token >> idx;
        if (token != "biases" || idx != l) raise(errc::io_error, path + ": expected biases block");
        Eigen::VectorXd b(fan_out);
        for (int i = 0; i < fan_out; ++i) in >> b(i);
        m.biases.push_back(std::move(b));
    }
    if (!in) raise(errc::io_error, path + ": truncated parameter data");
    m.validate();
    return m;
}

}  // namespace dqhe
