#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <set>

#include "dqhe/dataset.hpp"

using namespace dqhe;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("sample_params") {
    SECTION("degenerate ranges collapse to a point") {
        ParamRanges ranges;
        ranges.t_c0_min = ranges.t_c0_max = 0.35;
        ranges.dt_h_min = ranges.dt_h_max = 0.8;
        ranges.t_l_min = ranges.t_l_max = 0.5;
        ranges.phi_min = ranges.phi_max = 1.0;
        ranges.p_h_min = ranges.p_h_max = 0.25;
        ranges.p_c_min = ranges.p_c_max = 0.75;
        SplitMix64 rng(1);
        const EngineParams p = sample_params(rng, ranges);
        CHECK(p.T_c0 == 0.35);
        CHECK_THAT(p.T_h0, WithinRel(1.15, 1e-15));
        CHECK(p.T_l == 0.5);
        CHECK(p.phi == 1.0);
        CHECK(p.p_h == 0.25);
        CHECK(p.p_c == 0.75);
    }

    SECTION("hot-bath offset stays inside its window") {
        SplitMix64 rng(2);
        const ParamRanges ranges;
        for (int i = 0; i < 2000; ++i) {
            const EngineParams p = sample_params(rng, ranges);
            const double offset = p.T_h0 - p.T_c0;
            REQUIRE(offset >= 0.5);
            REQUIRE(offset <= 1.2);
            REQUIRE(p.T_c0 >= 0.2);
            REQUIRE(p.T_c0 <= 0.7);
        }
    }

    SECTION("cold base passes a Kolmogorov-Smirnov uniformity test") {
        const int n = 10000;
        std::vector<double> draws;
        draws.reserve(n);
        const ParamRanges ranges;
        for (int i = 0; i < n; ++i) {
            SplitMix64 rng = substream(77, static_cast<std::uint64_t>(i));
            draws.push_back(sample_params(rng, ranges).T_c0);
        }
        std::sort(draws.begin(), draws.end());
        double ks = 0.0;
        for (int i = 0; i < n; ++i) {
            const double cdf = (draws[static_cast<std::size_t>(i)] - 0.2) / 0.5;
            ks = std::max(ks, std::abs(cdf - (i + 1.0) / n));
            ks = std::max(ks, std::abs(cdf - static_cast<double>(i) / n));
        }
        // 1% critical value for the one-sample KS statistic
        CHECK(ks < 1.628 / std::sqrt(static_cast<double>(n)));
    }
}

TEST_CASE("generate") {
    FcsConfig cfg;

    SECTION("identical seeds give bitwise-identical outputs") {
        const Dataset a = generate(2, 123, cfg);
        const Dataset b = generate(2, 123, cfg);
        CHECK(serialize_records(a.records) == serialize_records(b.records));
        CHECK(a.manifest.digest == b.manifest.digest);
    }

    SECTION("worker count does not change the result") {
        const Dataset serial = generate(12, 5, cfg, {}, {}, 1);
        const Dataset threaded = generate(12, 5, cfg, {}, {}, 4);
        CHECK(serialize_records(serial.records) == serialize_records(threaded.records));
    }

    SECTION("split assignment is disjoint, exhaustive and proportional") {
        const Dataset ds = generate(40, 9, cfg);
        int n_ok = 0, n_train = 0, n_val = 0, n_test = 0;
        for (const auto& rec : ds.records) {
            if (rec.status != RecordStatus::ok) {
                CHECK(rec.split == Split::none);
                continue;
            }
            ++n_ok;
            switch (rec.split) {
                case Split::train: ++n_train; break;
                case Split::validation: ++n_val; break;
                case Split::test: ++n_test; break;
                case Split::none: FAIL("ok record left unassigned");
            }
        }
        CHECK(n_train + n_val + n_test == n_ok);
        CHECK(std::abs(n_train - 0.70 * n_ok) <= 1.0);
        CHECK(std::abs(n_val - 0.15 * n_ok) <= 1.0);
        CHECK(std::abs(n_test - 0.15 * n_ok) <= 1.0);
    }

    SECTION("labels are finite on ok records and ranges are honored") {
        const Dataset ds = generate(30, 31, cfg);
        for (const auto& rec : ds.records) {
            if (rec.status == RecordStatus::ok) REQUIRE(std::isfinite(rec.fano));
            REQUIRE(rec.inputs[0] >= 0.2);
            REQUIRE(rec.inputs[0] <= 0.7);
            REQUIRE(rec.inputs[1] - rec.inputs[0] >= 0.5);
            REQUIRE(rec.inputs[1] - rec.inputs[0] <= 1.2);
            REQUIRE(rec.inputs[2] >= 0.1);
            REQUIRE(rec.inputs[2] <= 1.0);
            REQUIRE(rec.inputs[3] >= 0.0);
            REQUIRE(rec.inputs[3] <= 2.0 * std::numbers::pi);
        }
    }
}

TEST_CASE("distribution statistics") {
    auto record = [](double f) {
        SampleRecord rec;
        rec.fano = f;
        rec.status = RecordStatus::ok;
        return rec;
    };

    SECTION("single record") {
        const std::vector<SampleRecord> recs{record(2.0)};
        const DistributionStats s = distribution_stats(recs);
        CHECK(s.mean == 2.0);
        CHECK(s.frac_above_one == 1.0);
        CHECK(s.frac_below_one == 0.0);
        CHECK_THAT(s.mode, WithinAbs(2.025, 1e-12));
    }

    SECTION("two records straddling one") {
        const std::vector<SampleRecord> recs{record(0.5), record(1.5)};
        const DistributionStats s = distribution_stats(recs);
        CHECK(s.frac_above_one == 0.5);
        CHECK(s.frac_below_one == 0.5);
        CHECK(s.frac_near_one == 0.0);
        CHECK_THAT(s.mean, WithinRel(1.0, 1e-15));
    }

    SECTION("histogram densities integrate to one") {
        std::vector<SampleRecord> recs;
        SplitMix64 rng(8);
        for (int i = 0; i < 500; ++i) recs.push_back(record(rng.uniform(0.3, 4.0)));
        const DistributionStats s = distribution_stats(recs);
        double integral = 0.0;
        for (const auto& [center, density] : s.histogram) integral += density * kHistogramBinWidth;
        CHECK_THAT(integral, WithinRel(1.0, 1e-12));
    }

    SECTION("flagged records are ignored and empty input is an error") {
        std::vector<SampleRecord> recs{record(1.0)};
        recs[0].status = RecordStatus::zero_flux;
        try {
            distribution_stats(recs);
            FAIL("expected empty-dataset");
        } catch (const error& e) {
            CHECK(e.code() == errc::empty_dataset);
        }
    }
}

TEST_CASE("dataset round trip through disk") {
    FcsConfig cfg;
    const Dataset ds = generate(10, 2024, cfg);
    const std::string path = "/tmp/dqhe_test_dataset.csv";
    save_dataset(ds, path);
    const Dataset loaded = load_dataset(path);
    CHECK(loaded.manifest.digest == ds.manifest.digest);
    CHECK(serialize_records(loaded.records) == serialize_records(ds.records));
    CHECK(loaded.manifest.seed == ds.manifest.seed);
    CHECK(loaded.manifest.fractions.train == ds.manifest.fractions.train);
    std::remove(path.c_str());
    std::remove((path + ".manifest").c_str());

    SECTION("digest mismatch is detected") {
        save_dataset(ds, path);
        {
            std::ofstream out(path, std::ios::app);
            out << "0.5,1.2,0.5,1.0,0.5,0.5,1.0,train,ok\n";
        }
        try {
            load_dataset(path);
            FAIL("expected io-error");
        } catch (const error& e) {
            CHECK(e.code() == errc::io_error);
        }
        std::remove(path.c_str());
        std::remove((path + ".manifest").c_str());
    }
}
