#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "dqhe/dataset.hpp"
#include "dqhe/error.hpp"
#include "dqhe/network.hpp"

namespace dqhe {

/// Levenberg-Marquardt training settings. sigma is the damping parameter:
/// divided by 1/sigma_dec after an accepted step, multiplied by sigma_inc
/// after a rejected one. Training stops on `patience` consecutive
/// validation-MSE increases, on max_epochs, or when sigma exceeds sigma_max.
struct TrainConfig {
    double sigma0 = 1e-3;
    double sigma_dec = 0.1;
    double sigma_inc = 10.0;
    double sigma_max = 1e10;
    int patience = 6;
    int max_epochs = 1000;
    std::uint64_t seed = 0;
    std::vector<int> hidden{20, 20, 20, 20};

    void validate() const {
        if (!(sigma0 > 0.0)) raise(errc::bad_config, "sigma0 must be positive");
        if (!(sigma_dec > 0.0 && sigma_dec < 1.0)) raise(errc::bad_config, "sigma_dec must lie in (0, 1)");
        if (!(sigma_inc > 1.0)) raise(errc::bad_config, "sigma_inc must exceed 1");
        if (patience < 1) raise(errc::bad_config, "patience must be at least 1");
        if (max_epochs < 1) raise(errc::bad_config, "max_epochs must be at least 1");
        for (int h : hidden)
            if (h < 1) raise(errc::bad_config, "hidden layer sizes must be positive");
    }
};

struct Metrics {
    double mse = 0.0;
    double rmse = 0.0;
    double r2 = 0.0;
    double mae = 0.0;
    double mape = 0.0;  ///< percent
};

enum class StopReason { patience, max_epochs, damping_abort };

inline const char* stop_reason_name(StopReason r) noexcept {
    switch (r) {
        case StopReason::patience:      return "patience";
        case StopReason::max_epochs:    return "max-epochs";
        case StopReason::damping_abort: return "damping-abort";
    }
    return "max-epochs";
}

/// One proposal in the damping loop; epochs advance only on accepted steps.
struct StepEvent {
    int epoch = 0;
    double sigma = 0.0;
    bool accepted = false;
    double train_mse = 0.0;  ///< candidate training MSE
};

struct TrainReport {
    std::vector<double> train_mse;  ///< per accepted epoch
    std::vector<double> val_mse;    ///< per accepted epoch
    std::vector<StepEvent> steps;
    StopReason stop = StopReason::max_epochs;
    int best_epoch = 0;             ///< epoch of the returned snapshot
    Metrics final_train, final_validation, final_test;
};

namespace detail {

inline Eigen::VectorXd flatten(const NetworkModel& m) {
    Eigen::VectorXd z(m.parameter_count());
    long at = 0;
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
        const auto& w = m.weights[l];
        for (long i = 0; i < w.rows(); ++i)
            for (long j = 0; j < w.cols(); ++j) z(at++) = w(i, j);
        for (long j = 0; j < m.biases[l].size(); ++j) z(at++) = m.biases[l](j);
    }
    return z;
}

inline void unflatten(NetworkModel& m, const Eigen::VectorXd& z) {
    long at = 0;
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
        auto& w = m.weights[l];
        for (long i = 0; i < w.rows(); ++i)
            for (long j = 0; j < w.cols(); ++j) w(i, j) = z(at++);
        for (long j = 0; j < m.biases[l].size(); ++j) m.biases[l](j) = z(at++);
    }
}

}  // namespace detail

/// Jacobian of the per-sample errors e_i = y_i - prediction_i with respect
/// to the flattened parameters, accumulated in reverse mode through the
/// tanh chain. Row i holds de_i/dz.
inline Eigen::MatrixXd jacobian(const NetworkModel& m, const Eigen::MatrixXd& x,
                                const Eigen::VectorXd& y) {
    m.validate();
    if (x.rows() == 0) raise(errc::shape_mismatch, "empty batch");
    if (y.size() != x.rows()) raise(errc::shape_mismatch, "label count does not match batch");

    const long n = x.rows();
    const std::size_t n_layers = m.weights.size();

    // forward pass, keeping every activation
    std::vector<Eigen::MatrixXd> act(n_layers + 1);
    act[0] = scale_inputs(m, x);
    for (std::size_t l = 0; l + 1 < n_layers; ++l)
        act[l + 1] = ((act[l] * m.weights[l]).rowwise() + m.biases[l].transpose())
                         .array().tanh().matrix();
    act[n_layers] = (act[n_layers - 1] * m.weights[n_layers - 1]).rowwise() +
                    m.biases[n_layers - 1].transpose();

    Eigen::MatrixXd jac(n, m.parameter_count());

    // delta = d(prediction)/d(pre-activation of layer l+1); de/dz = -dpred/dz
    Eigen::MatrixXd delta = Eigen::MatrixXd::Ones(n, 1);
    long block_end = m.parameter_count();
    for (std::size_t l = n_layers; l-- > 0;) {
        const long fan_in = m.weights[l].rows();
        const long fan_out = m.weights[l].cols();
        const long block_begin = block_end - fan_in * fan_out - fan_out;
        // W_l block, row-major within the block: dpred/dW(a,b) = act[l](.,a) * delta(.,b)
        for (long a = 0; a < fan_in; ++a)
            for (long b = 0; b < fan_out; ++b)
                jac.col(block_begin + a * fan_out + b) =
                    -act[l].col(a).cwiseProduct(delta.col(b));
        for (long b = 0; b < fan_out; ++b)
            jac.col(block_begin + fan_in * fan_out + b) = -delta.col(b);
        if (l > 0) {
            // propagate through tanh: act[l] holds the post-activations
            delta = (delta * m.weights[l].transpose()).array() *
                    (1.0 - act[l].array().square());
        }
        block_end = block_begin;
    }
    return jac;
}

/// One damped Gauss-Newton proposal: solves (J^T J + sigma I) step = J^T e
/// by Cholesky factorization and applies z - step without committing.
/// Returns the candidate model and its training MSE.
inline std::pair<NetworkModel, double> lm_step(const NetworkModel& m, const Eigen::MatrixXd& x,
                                               const Eigen::VectorXd& y, double sigma) {
    if (!(sigma > 0.0)) raise(errc::bad_config, "sigma must be positive");
    const Eigen::MatrixXd jac = jacobian(m, x, y);
    const Eigen::VectorXd errors = y - forward_batch(m, x);
    if (!jac.allFinite() || !errors.allFinite())
        raise(errc::singular_system, "non-finite Jacobian or error vector");

    const long np = jac.cols();
    Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(np, np);
    normal.selfadjointView<Eigen::Lower>().rankUpdate(jac.transpose());
    normal = normal.selfadjointView<Eigen::Lower>();
    normal.diagonal().array() += sigma;
    Eigen::LLT<Eigen::MatrixXd> llt(normal);
    if (llt.info() != Eigen::Success)
        raise(errc::singular_system, "damped normal equations are not positive definite");

    const Eigen::VectorXd gradient = jac.transpose() * errors;
    const Eigen::VectorXd step = llt.solve(gradient);

    NetworkModel candidate = m;
    detail::unflatten(candidate, detail::flatten(m) - step);
    const Eigen::VectorXd residual = y - forward_batch(candidate, x);
    return {std::move(candidate), residual.squaredNorm() / static_cast<double>(y.size())};
}

/// Full metric suite on raw (unscaled) labels. R^2 needs non-constant
/// labels; MAPE skips samples with |label| < 1e-12.
inline Metrics metrics(const NetworkModel& m, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    if (y.size() == 0) raise(errc::empty_dataset, "no records to evaluate");
    const Eigen::VectorXd pred = forward_batch(m, x);
    const Eigen::VectorXd err = y - pred;
    Metrics out;
    const double n = static_cast<double>(y.size());
    out.mse = err.squaredNorm() / n;
    out.rmse = std::sqrt(out.mse);
    out.mae = err.cwiseAbs().sum() / n;
    const double mean = y.mean();
    const double total_var = (y.array() - mean).square().sum();
    if (total_var <= 0.0) raise(errc::zero_variance, "labels are constant; R^2 undefined");
    out.r2 = 1.0 - err.squaredNorm() / total_var;
    double mape_sum = 0.0;
    long mape_n = 0;
    for (long i = 0; i < y.size(); ++i) {
        if (std::abs(y(i)) < 1e-12) continue;
        mape_sum += std::abs(err(i) / y(i));
        ++mape_n;
    }
    out.mape = mape_n ? 100.0 * mape_sum / static_cast<double>(mape_n) : 0.0;
    return out;
}

inline Metrics metrics(const NetworkModel& m, const std::vector<SampleRecord>& records) {
    Eigen::MatrixXd x(static_cast<long>(records.size()), 6);
    Eigen::VectorXd y(static_cast<long>(records.size()));
    for (std::size_t i = 0; i < records.size(); ++i) {
        for (int j = 0; j < 6; ++j) x(static_cast<long>(i), j) = records[i].inputs[static_cast<std::size_t>(j)];
        y(static_cast<long>(i)) = records[i].fano;
    }
    return metrics(m, x, y);
}

namespace detail {

struct SplitMatrices {
    Eigen::MatrixXd x_train, x_val, x_test;
    Eigen::VectorXd y_train, y_val, y_test;
};

inline SplitMatrices split_matrices(const Dataset& ds) {
    auto extract = [&](Split which, Eigen::MatrixXd& x, Eigen::VectorXd& y) {
        long count = 0;
        for (const auto& rec : ds.records)
            if (rec.status == RecordStatus::ok && rec.split == which) ++count;
        x.resize(count, 6);
        y.resize(count);
        long at = 0;
        for (const auto& rec : ds.records) {
            if (rec.status != RecordStatus::ok || rec.split != which) continue;
            for (int j = 0; j < 6; ++j) x(at, j) = rec.inputs[static_cast<std::size_t>(j)];
            y(at++) = rec.fano;
        }
    };
    SplitMatrices s;
    extract(Split::train, s.x_train, s.y_train);
    extract(Split::validation, s.x_val, s.y_val);
    extract(Split::test, s.x_test, s.y_test);
    return s;
}

inline double mse_of(const NetworkModel& m, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    return (y - forward_batch(m, x)).squaredNorm() / static_cast<double>(y.size());
}

// Damping floor; keeps the normal equations positive definite after long
// runs of accepted steps shrink sigma.
inline constexpr double kSigmaFloor = 1e-20;

}  // namespace detail

/// Trains on the dataset's train split with LM damping adaptation and
/// validation-patience early stopping. A proposal is accepted only if it
/// strictly decreases the training MSE, so the accepted-step error sequence
/// is non-increasing by construction. Returns the snapshot with the lowest
/// validation MSE together with the full report.
inline std::pair<NetworkModel, TrainReport> train(const Dataset& ds, const TrainConfig& cfg) {
    cfg.validate();
    const detail::SplitMatrices s = detail::split_matrices(ds);
    if (s.y_train.size() == 0 || s.y_val.size() == 0 || s.y_test.size() == 0)
        raise(errc::empty_split, "train, validation and test splits must all be nonempty");

    std::vector<int> layers;
    layers.push_back(6);
    for (int h : cfg.hidden) layers.push_back(h);
    layers.push_back(1);
    const Eigen::VectorXd lo = s.x_train.colwise().minCoeff();
    const Eigen::VectorXd hi = s.x_train.colwise().maxCoeff();
    NetworkModel model = make_network(layers, cfg.seed, lo, hi);
    model.dataset_digest = ds.manifest.digest;

    TrainReport report;
    double train_mse = detail::mse_of(model, s.x_train, s.y_train);
    double val_mse = detail::mse_of(model, s.x_val, s.y_val);
    NetworkModel best = model;
    double best_val = val_mse;
    int best_epoch = 0;
    double prev_val = val_mse;
    int val_streak = 0;
    double sigma = cfg.sigma0;
    report.stop = StopReason::max_epochs;

    // J depends only on the committed model, so rejected proposals reuse the
    // cached factorization inputs instead of re-deriving them.
    Eigen::MatrixXd jac, normal;
    Eigen::VectorXd gradient, z;
    bool cache_valid = false;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        bool accepted = false;
        while (!accepted) {
            if (!cache_valid) {
                jac = jacobian(model, s.x_train, s.y_train);
                const Eigen::VectorXd errors = s.y_train - forward_batch(model, s.x_train);
                if (!jac.allFinite() || !errors.allFinite())
                    raise(errc::singular_system, "non-finite Jacobian or error vector");
                const long np = jac.cols();
                normal = Eigen::MatrixXd::Zero(np, np);
                normal.selfadjointView<Eigen::Lower>().rankUpdate(jac.transpose());
                normal = normal.selfadjointView<Eigen::Lower>();
                gradient = jac.transpose() * errors;
                z = detail::flatten(model);
                cache_valid = true;
            }
            Eigen::MatrixXd damped = normal;
            damped.diagonal().array() += sigma;
            Eigen::LLT<Eigen::MatrixXd> llt(damped);
            if (llt.info() != Eigen::Success)
                raise(errc::singular_system, "damped normal equations are not positive definite");
            NetworkModel candidate = model;
            detail::unflatten(candidate, z - llt.solve(gradient));
            const double candidate_mse = detail::mse_of(candidate, s.x_train, s.y_train);

            report.steps.push_back({epoch, sigma, candidate_mse < train_mse, candidate_mse});
            if (candidate_mse < train_mse) {
                model = std::move(candidate);
                train_mse = candidate_mse;
                sigma = std::max(sigma * cfg.sigma_dec, detail::kSigmaFloor);
                cache_valid = false;
                accepted = true;
            } else {
                sigma *= cfg.sigma_inc;
                if (sigma > cfg.sigma_max) {
                    report.stop = StopReason::damping_abort;
                    goto done;
                }
            }
        }

        val_mse = detail::mse_of(model, s.x_val, s.y_val);
        report.train_mse.push_back(train_mse);
        report.val_mse.push_back(val_mse);
        if (val_mse < best_val) {
            best = model;
            best_val = val_mse;
            best_epoch = epoch;
        }
        val_streak = val_mse > prev_val ? val_streak + 1 : 0;
        prev_val = val_mse;
        if (val_streak >= cfg.patience) {
            report.stop = StopReason::patience;
            break;
        }
    }
done:
    report.best_epoch = best_epoch;
    report.final_train = metrics(best, s.x_train, s.y_train);
    report.final_validation = metrics(best, s.x_val, s.y_val);
    report.final_test = metrics(best, s.x_test, s.y_test);
    return {std::move(best), std::move(report)};
}

/// One cell of a convergence study: mean and population standard deviation
/// of the test RMSE and R^2 over seeded trials.
struct StudyCell {
    std::string label;
    int train_size = 0;
    std::vector<int> hidden;
    int trials = 0;
    double rmse_mean = 0.0, rmse_std = 0.0;
    double r2_mean = 0.0, r2_std = 0.0;
};

namespace detail {

inline StudyCell summarize_cell(std::string label, int train_size, std::vector<int> hidden,
                                const std::vector<Metrics>& results) {
    StudyCell cell;
    cell.label = std::move(label);
    cell.train_size = train_size;
    cell.hidden = std::move(hidden);
    cell.trials = static_cast<int>(results.size());
    const double n = static_cast<double>(results.size());
    for (const auto& m : results) {
        cell.rmse_mean += m.rmse;
        cell.r2_mean += m.r2;
    }
    cell.rmse_mean /= n;
    cell.r2_mean /= n;
    for (const auto& m : results) {
        cell.rmse_std += (m.rmse - cell.rmse_mean) * (m.rmse - cell.rmse_mean);
        cell.r2_std += (m.r2 - cell.r2_mean) * (m.r2 - cell.r2_mean);
    }
    cell.rmse_std = std::sqrt(cell.rmse_std / n);
    cell.r2_std = std::sqrt(cell.r2_std / n);
    return cell;
}

/// Copy of the dataset with the train split cut down to `size` records,
/// chosen by a seeded shuffle; validation and test are untouched.
inline Dataset subsample_train(const Dataset& ds, int size, std::uint64_t seed) {
    Dataset out = ds;
    std::vector<std::size_t> train_indices;
    for (std::size_t i = 0; i < out.records.size(); ++i)
        if (out.records[i].status == RecordStatus::ok && out.records[i].split == Split::train)
            train_indices.push_back(i);
    if (size > static_cast<int>(train_indices.size()))
        raise(errc::invalid_params, "requested train size exceeds available records");
    SplitMix64 rng = substream(seed, 0x5a5a5a5aULL);
    for (std::size_t i = train_indices.size(); i > 1; --i)
        std::swap(train_indices[i - 1], train_indices[static_cast<std::size_t>(rng.next() % i)]);
    for (std::size_t k = static_cast<std::size_t>(size); k < train_indices.size(); ++k)
        out.records[train_indices[k]].split = Split::none;
    return out;
}

}  // namespace detail

/// Test-set accuracy against training size, `trials` seeded runs per size.
inline std::vector<StudyCell> study_training_sizes(const Dataset& ds, const TrainConfig& cfg,
                                                   const std::vector<int>& sizes, int trials) {
    if (sizes.empty()) raise(errc::invalid_params, "no training sizes given");
    if (trials < 1) raise(errc::invalid_params, "need at least one trial");
    std::vector<StudyCell> cells;
    for (int size : sizes) {
        std::vector<Metrics> results;
        for (int t = 0; t < trials; ++t) {
            TrainConfig trial_cfg = cfg;
            trial_cfg.seed = substream(cfg.seed, static_cast<std::uint64_t>(t)).next();
            const Dataset cut = detail::subsample_train(ds, size, trial_cfg.seed);
            results.push_back(train(cut, trial_cfg).second.final_test);
        }
        cells.push_back(detail::summarize_cell("n=" + std::to_string(size), size, cfg.hidden, results));
    }
    return cells;
}

/// Test-set accuracy across a (hidden layers x neurons per layer) grid.
inline std::vector<StudyCell> study_architectures(const Dataset& ds, const TrainConfig& cfg,
                                                  const std::vector<int>& layer_counts,
                                                  const std::vector<int>& neuron_counts,
                                                  int trials) {
    if (layer_counts.empty() || neuron_counts.empty())
        raise(errc::invalid_params, "empty architecture grid");
    if (trials < 1) raise(errc::invalid_params, "need at least one trial");
    std::vector<StudyCell> cells;
    for (int neurons : neuron_counts) {
        for (int depth : layer_counts) {
            TrainConfig arch_cfg = cfg;
            arch_cfg.hidden.assign(static_cast<std::size_t>(depth), neurons);
            std::vector<Metrics> results;
            for (int t = 0; t < trials; ++t) {
                TrainConfig trial_cfg = arch_cfg;
                trial_cfg.seed = substream(cfg.seed, static_cast<std::uint64_t>(t)).next();
                results.push_back(train(ds, trial_cfg).second.final_test);
            }
            cells.push_back(detail::summarize_cell(
                std::to_string(depth) + "x" + std::to_string(neurons), 0, arch_cfg.hidden, results));
        }
    }
    return cells;
}

}  // namespace dqhe
