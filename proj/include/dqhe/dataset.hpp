#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "dqhe/error.hpp"
#include "dqhe/fcs.hpp"
#include "dqhe/parallel.hpp"
#include "dqhe/rng.hpp"

namespace dqhe {

enum class Split { train, validation, test, none };

inline const char* split_name(Split s) noexcept {
    switch (s) {
        case Split::train:      return "train";
        case Split::validation: return "validation";
        case Split::test:       return "test";
        case Split::none:       return "none";
    }
    return "none";
}

enum class RecordStatus { ok, zero_flux, solver_failure };

inline const char* status_name(RecordStatus s) noexcept {
    switch (s) {
        case RecordStatus::ok:             return "ok";
        case RecordStatus::zero_flux:      return "zero-flux";
        case RecordStatus::solver_failure: return "solver-failure";
    }
    return "solver-failure";
}

/// One labeled sample: the six sampled engine inputs in the order
/// (T_c0, T_h0, T_l, phi, p_h, p_c) and the Fano factor label.
struct SampleRecord {
    std::array<double, 6> inputs{};
    double fano = std::numeric_limits<double>::quiet_NaN();
    Split split = Split::none;
    RecordStatus status = RecordStatus::solver_failure;
};

/// Sampling box for the six engine inputs. T_h0 is drawn as T_c0 plus a
/// uniform offset, so the hot-bath range tracks the drawn T_c0.
struct ParamRanges {
    double t_c0_min = 0.2, t_c0_max = 0.7;
    double dt_h_min = 0.5, dt_h_max = 1.2;
    double t_l_min = 0.1, t_l_max = 1.0;
    double phi_min = 0.0, phi_max = 2.0 * std::numbers::pi;
    double p_h_min = 0.0, p_h_max = 1.0;
    double p_c_min = 0.0, p_c_max = 1.0;

    void validate() const {
        if (t_c0_min > t_c0_max || dt_h_min > dt_h_max || t_l_min > t_l_max ||
            phi_min > phi_max || p_h_min > p_h_max || p_c_min > p_c_max)
            raise(errc::invalid_params, "parameter range bounds are inverted");
        if (!(t_c0_min > 0.0) || !(t_l_min > 0.0) || !(dt_h_min > 0.0))
            raise(errc::invalid_params, "sampled temperatures must stay positive");
    }
};

struct SplitFractions {
    double train = 0.70;
    double validation = 0.15;
    double test = 0.15;
};

struct DatasetManifest {
    std::uint64_t seed = 0;
    int count = 0;
    SplitFractions fractions{};
    EngineParams fixed{};   ///< only the non-sampled fields are meaningful
    FcsConfig fcs{};
    std::string digest;     ///< FNV-1a 64 over the serialized data file
};

struct Dataset {
    std::vector<SampleRecord> records;
    DatasetManifest manifest;
};

/// 64-bit FNV-1a over a byte string; hex-encoded.
inline std::string fnv1a_digest(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

/// Draws one engine-parameter tuple uniformly from the box. Draw order is
/// fixed (T_c0, dT_h, T_l, phi, p_h, p_c) as part of the determinism
/// contract. Non-sampled fields are copied from `fixed`.
inline EngineParams sample_params(SplitMix64& rng, const ParamRanges& ranges,
                                  const EngineParams& fixed = {}) {
    ranges.validate();
    EngineParams p = fixed;
    p.T_c0 = rng.uniform(ranges.t_c0_min, ranges.t_c0_max);
    p.T_h0 = p.T_c0 + rng.uniform(ranges.dt_h_min, ranges.dt_h_max);
    p.T_l = rng.uniform(ranges.t_l_min, ranges.t_l_max);
    p.phi = rng.uniform(ranges.phi_min, ranges.phi_max);
    p.p_h = rng.uniform(ranges.p_h_min, ranges.p_h_max);
    p.p_c = rng.uniform(ranges.p_c_min, ranges.p_c_max);
    return p;
}

/// Canonical text form of the record table: CSV with one header line and
/// 17-significant-digit floats. This is both the on-disk format and the
/// digest input.
inline std::string serialize_records(const std::vector<SampleRecord>& records) {
    std::string out = "T_c0,T_h0,T_l,phi,p_h,p_c,F,split,status\n";
    char buf[32];
    for (const auto& rec : records) {
        for (double v : rec.inputs) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            out += buf;
            out += ',';
        }
        std::snprintf(buf, sizeof buf, "%.17g", rec.fano);
        out += buf;
        out += ',';
        out += split_name(rec.split);
        out += ',';
        out += status_name(rec.status);
        out += '\n';
    }
    return out;
}

namespace detail {

inline constexpr std::uint64_t kShuffleStream = ~0ULL;

}  // namespace detail

/// Samples and labels `count` records. Labeling failures are captured in the
/// record status (zero-flux or solver-failure) and never abort the batch;
/// flagged records are excluded from the train/validation/test assignment.
/// The result is bitwise reproducible for a given (count, seed, cfg, ranges),
/// independent of the worker count.
inline Dataset generate(int count, std::uint64_t seed, const FcsConfig& cfg = {},
                        const ParamRanges& ranges = {}, const EngineParams& fixed = {},
                        int threads = 1, SplitFractions fractions = {}) {
    if (count < 1) raise(errc::invalid_params, "count must be at least 1");
    ranges.validate();
    cfg.validate();
    const double frac_sum = fractions.train + fractions.validation + fractions.test;
    if (std::abs(frac_sum - 1.0) > 1e-12)
        raise(errc::bad_config, "split fractions must sum to 1");

    Dataset ds;
    ds.records.resize(static_cast<std::size_t>(count));
    parallel_for(count, threads, [&](int i) {
        SplitMix64 rng = substream(seed, static_cast<std::uint64_t>(i));
        const EngineParams p = sample_params(rng, ranges, fixed);
        SampleRecord& rec = ds.records[static_cast<std::size_t>(i)];
        rec.inputs = {p.T_c0, p.T_h0, p.T_l, p.phi, p.p_h, p.p_c};
        try {
            rec.fano = cumulants(p, cfg).fano;
            rec.status = RecordStatus::ok;
        } catch (const error& e) {
            rec.status = e.code() == errc::zero_flux ? RecordStatus::zero_flux
                                                     : RecordStatus::solver_failure;
            rec.fano = std::numeric_limits<double>::quiet_NaN();
        }
        rec.split = Split::none;
    });

    // Seeded shuffle of the ok records, then contiguous split assignment.
    std::vector<int> ok_indices;
    ok_indices.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i)
        if (ds.records[static_cast<std::size_t>(i)].status == RecordStatus::ok)
            ok_indices.push_back(i);
    SplitMix64 shuffle_rng = substream(seed, detail::kShuffleStream);
    for (std::size_t i = ok_indices.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(shuffle_rng.next() % i);
        std::swap(ok_indices[i - 1], ok_indices[j]);
    }
    const auto n_ok = static_cast<int>(ok_indices.size());
    const int n_train = static_cast<int>(std::floor(fractions.train * n_ok + 0.5));
    const int n_val = static_cast<int>(std::floor(fractions.validation * n_ok + 0.5));
    for (int k = 0; k < n_ok; ++k) {
        Split s = Split::test;
        if (k < n_train) s = Split::train;
        else if (k < n_train + n_val) s = Split::validation;
        ds.records[static_cast<std::size_t>(ok_indices[static_cast<std::size_t>(k)])].split = s;
    }

    ds.manifest.seed = seed;
    ds.manifest.count = count;
    ds.manifest.fractions = fractions;
    ds.manifest.fixed = fixed;
    ds.manifest.fcs = cfg;
    ds.manifest.digest = fnv1a_digest(serialize_records(ds.records));
    return ds;
}

/// Summary statistics of the label distribution over ok records.
struct DistributionStats {
    double mean = 0.0;
    double mode = 0.0;            ///< center of the densest 0.05-wide bin
    double frac_above_one = 0.0;  ///< F > 1
    double frac_below_one = 0.0;  ///< F < 1
    double frac_near_one = 0.0;   ///< |F - 1| < 0.025
    std::vector<std::pair<double, double>> histogram;  ///< (bin center, density)
};

inline constexpr double kHistogramBinWidth = 0.05;

inline DistributionStats distribution_stats(const std::vector<SampleRecord>& records) {
    std::vector<double> labels;
    labels.reserve(records.size());
    for (const auto& rec : records)
        if (rec.status == RecordStatus::ok) labels.push_back(rec.fano);
    if (labels.empty()) raise(errc::empty_dataset, "no ok records to summarize");

    DistributionStats stats;
    const double n = static_cast<double>(labels.size());
    long lowest = std::numeric_limits<long>::max(), highest = std::numeric_limits<long>::min();
    for (double f : labels) {
        stats.mean += f;
        if (f > 1.0) stats.frac_above_one += 1.0;
        if (f < 1.0) stats.frac_below_one += 1.0;
        if (std::abs(f - 1.0) < 0.025) stats.frac_near_one += 1.0;
        const long bin = static_cast<long>(std::floor(f / kHistogramBinWidth));
        lowest = std::min(lowest, bin);
        highest = std::max(highest, bin);
    }
    stats.mean /= n;
    stats.frac_above_one /= n;
    stats.frac_below_one /= n;
    stats.frac_near_one /= n;

    std::vector<double> counts(static_cast<std::size_t>(highest - lowest + 1), 0.0);
    for (double f : labels)
        counts[static_cast<std::size_t>(std::floor(f / kHistogramBinWidth) - lowest)] += 1.0;
    std::size_t mode_bin = 0;
    for (std::size_t b = 0; b < counts.size(); ++b)
        if (counts[b] > counts[mode_bin]) mode_bin = b;
    stats.mode = (static_cast<double>(lowest + static_cast<long>(mode_bin)) + 0.5) * kHistogramBinWidth;
    stats.histogram.reserve(counts.size());
    for (std::size_t b = 0; b < counts.size(); ++b)
        stats.histogram.emplace_back(
            (static_cast<double>(lowest + static_cast<long>(b)) + 0.5) * kHistogramBinWidth,
            counts[b] / (n * kHistogramBinWidth));
    return stats;
}

namespace detail {

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace detail

/// Writes the data file plus a human-readable `<path>.manifest` holding the
/// generation settings and the content digest.
inline void save_dataset(const Dataset& ds, const std::string& path) {
    const std::string body = serialize_records(ds.records);
    {
        std::ofstream out(path, std::ios::binary);
        if (!out) raise(errc::io_error, "cannot open " + path + " for writing");
        out << body;
    }
    std::ofstream mf(path + ".manifest");
    if (!mf) raise(errc::io_error, "cannot open " + path + ".manifest for writing");
    const auto& m = ds.manifest;
    mf << "dqhe-dataset-manifest v1\n";
    mf << "seed " << m.seed << "\n";
    mf << "count " << m.count << "\n";
    mf << "frac_train " << detail::format_double(m.fractions.train) << "\n";
    mf << "frac_validation " << detail::format_double(m.fractions.validation) << "\n";
    mf << "frac_test " << detail::format_double(m.fractions.test) << "\n";
    mf << "A0 " << detail::format_double(m.fixed.A0) << "\n";
    mf << "omega " << detail::format_double(m.fixed.omega) << "\n";
    mf << "E1 " << detail::format_double(m.fixed.E1) << "\n";
    mf << "E2 " << detail::format_double(m.fixed.E2) << "\n";
    mf << "Eb " << detail::format_double(m.fixed.Eb) << "\n";
    mf << "Ea " << detail::format_double(m.fixed.Ea) << "\n";
    mf << "r " << detail::format_double(m.fixed.r) << "\n";
    mf << "g " << detail::format_double(m.fixed.g) << "\n";
    mf << "fcs_grid_points " << m.fcs.grid_points << "\n";
    mf << "fcs_lambda_step " << detail::format_double(m.fcs.lambda_step) << "\n";
    mf << "fcs_richardson " << (m.fcs.richardson ? 1 : 0) << "\n";
    mf << "fcs_integral_tol " << detail::format_double(m.fcs.integral_tol) << "\n";
    mf << "digest " << m.digest << "\n";
}

/// Reads a data file written by save_dataset. If the sibling manifest is
/// present, the stored digest is checked against the file content.
inline Dataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(errc::io_error, "cannot open " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string body = buffer.str();

    Dataset ds;
    std::istringstream lines(body);
    std::string line;
    if (!std::getline(lines, line) || line != "T_c0,T_h0,T_l,phi,p_h,p_c,F,split,status")
        raise(errc::io_error, path + ": unrecognized header");
    while (std::getline(lines, line)) {
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string field;
        SampleRecord rec;
        for (int c = 0; c < 7; ++c) {
            if (!std::getline(fields, field, ','))
                raise(errc::io_error, path + ": truncated record");
            const double v = std::strtod(field.c_str(), nullptr);
            if (c < 6) rec.inputs[static_cast<std::size_t>(c)] = v;
            else rec.fano = v;
        }
        if (!std::getline(fields, field, ',')) raise(errc::io_error, path + ": missing split");
        if (field == "train") rec.split = Split::train;
        else if (field == "validation") rec.split = Split::validation;
        else if (field == "test") rec.split = Split::test;
        else rec.split = Split::none;
        if (!std::getline(fields, field, ',')) raise(errc::io_error, path + ": missing status");
        if (field == "ok") rec.status = RecordStatus::ok;
        else if (field == "zero-flux") rec.status = RecordStatus::zero_flux;
        else rec.status = RecordStatus::solver_failure;
        ds.records.push_back(rec);
    }

    ds.manifest.count = static_cast<int>(ds.records.size());
    ds.manifest.digest = fnv1a_digest(serialize_records(ds.records));
    std::ifstream mf(path + ".manifest");
    if (mf) {
        std::string key;
        while (mf >> key) {
            if (key == "seed") mf >> ds.manifest.seed;
            else if (key == "count") mf >> ds.manifest.count;
            else if (key == "frac_train") mf >> ds.manifest.fractions.train;
            else if (key == "frac_validation") mf >> ds.manifest.fractions.validation;
            else if (key == "frac_test") mf >> ds.manifest.fractions.test;
            else if (key == "A0") mf >> ds.manifest.fixed.A0;
            else if (key == "omega") mf >> ds.manifest.fixed.omega;
            else if (key == "E1") mf >> ds.manifest.fixed.E1;
            else if (key == "E2") mf >> ds.manifest.fixed.E2;
            else if (key == "Eb") mf >> ds.manifest.fixed.Eb;
            else if (key == "Ea") mf >> ds.manifest.fixed.Ea;
            else if (key == "r") mf >> ds.manifest.fixed.r;
            else if (key == "g") mf >> ds.manifest.fixed.g;
            else if (key == "fcs_grid_points") mf >> ds.manifest.fcs.grid_points;
            else if (key == "fcs_lambda_step") mf >> ds.manifest.fcs.lambda_step;
            else if (key == "fcs_richardson") mf >> ds.manifest.fcs.richardson;
            else if (key == "fcs_integral_tol") mf >> ds.manifest.fcs.integral_tol;
            else if (key == "digest") {
                std::string stored;
                mf >> stored;
                if (stored != ds.manifest.digest)
                    raise(errc::io_error, path + ": manifest digest does not match data file");
            }
        }
    }
    return ds;
}

}  // namespace dqhe
