#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "weca/datagen.hpp"
#include "weca/error.hpp"

using namespace weca;

namespace {

double autocorrelation(const std::vector<double>& v, std::size_t lag) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double num = 0.0, den = 0.0;
    for (std::size_t t = 0; t < v.size(); ++t) {
        den += (v[t] - m) * (v[t] - m);
        if (t + lag < v.size()) num += (v[t] - m) * (v[t + lag] - m);
    }
    return num / den;
}

SeriesSet ramp_set(std::vector<std::size_t> lengths) {
    SeriesSet set;
    for (std::size_t s = 0; s < lengths.size(); ++s) {
        Series series{"s" + std::to_string(s), {}, parse_iso_date("2023-01-01")};
        for (std::size_t t = 0; t < lengths[s]; ++t) series.values.push_back(static_cast<double>(t) + 100.0 * s);
        set.series.push_back(series);
    }
    return set;
}

}  // namespace

TEST_CASE("synthetic generation is deterministic per seed") {
    SyntheticConfig cfg;
    cfg.n_series = 1;
    cfg.length = 200;
    cfg.seed = 7;
    const auto a = generate_synthetic(cfg);
    const auto b = generate_synthetic(cfg);
    CHECK(a.series[0].values == b.series[0].values);
    cfg.seed = 8;
    CHECK(generate_synthetic(cfg).series[0].values != a.series[0].values);
}

TEST_CASE("noise-free series is periodic with period 7 after trend removal") {
    SyntheticConfig cfg;
    cfg.n_series = 4;
    cfg.length = 200;
    cfg.noise_scale = 0.0;
    cfg.trend_scale = 0.05;
    const auto set = generate_synthetic(cfg);
    for (const auto& s : set.series) {
        // x[t+7] - x[t] == 7 * slope for every t when only the trend is non-periodic.
        const double step = s.values[7] - s.values[0];
        for (std::size_t t = 0; t + 7 < s.values.size(); ++t) {
            CHECK(std::fabs((s.values[t + 7] - s.values[t]) - step) < 1e-9);
        }
    }
}

TEST_CASE("desk-scale synthetic data is non-negative and weekly") {
    SyntheticConfig cfg;
    cfg.n_series = 64;
    cfg.length = 730;
    cfg.seed = 1;
    const auto set = generate_synthetic(cfg);
    REQUIRE(set.series.size() == 64);
    for (const auto& s : set.series) {
        REQUIRE(s.values.size() == 730);
        for (double v : s.values) CHECK(v >= 0.0);
        CHECK(autocorrelation(s.values, 7) > autocorrelation(s.values, 3));
    }
}

TEST_CASE("synthetic length must cover two windows") {
    SyntheticConfig cfg;
    cfg.length = 2 * cfg.window.span() - 1;
    CHECK_THROWS_AS(generate_synthetic(cfg), DataError);
}

TEST_CASE("csv: two rows, one id") {
    std::istringstream in("series_id,date,value\nA,2024-02-28,1.5\nA,2024-02-29,2\n");
    const auto set = read_csv(in);
    REQUIRE(set.series.size() == 1);
    CHECK(set.series[0].id == "A");
    CHECK(set.series[0].values == std::vector<double>{1.5, 2.0});
    CHECK(format_iso_date(set.series[0].start) == "2024-02-28");
}

TEST_CASE("csv: contract violations are reported") {
    auto error_of = [](const std::string& text) {
        std::istringstream in(text);
        try {
            (void)read_csv(in);
        } catch (const DataError& e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };
    const auto dup = error_of("series_id,date,value\nA,2024-01-01,1\nA,2024-01-02,2\nA,2024-01-01,3\n");
    CHECK(dup.find("duplicate") != std::string::npos);
    CHECK(dup.find("2024-01-01") != std::string::npos);
    CHECK(error_of("series_id,date,value\nA,2024-01-01,1\nA,2024-01-01,1\n").find("duplicate") != std::string::npos);
    CHECK(error_of("series_id,date,value\nA,2024-01-02,1\nA,2024-01-01,1\n").find("non-monotone") != std::string::npos);
    CHECK(error_of("series_id,date,value\nA,2024-01-01,1\nA,2024-01-03,1\n").find("missing dates") != std::string::npos);
    CHECK(error_of("series_id,date,value\nA,2024-01-01,abc\n").find("row 2") != std::string::npos);
    CHECK(error_of("series_id,date,value\nA,2024-01-01\n").find("row 2: malformed") != std::string::npos);
    CHECK(error_of("series_id,date,value\nA,2024-13-01,1\n").find("row 2") != std::string::npos);
    CHECK(error_of("id,date,value\n").find("header") != std::string::npos);
}

TEST_CASE("csv round trip preserves values exactly") {
    SyntheticConfig cfg;
    cfg.n_series = 3;
    cfg.length = 150;
    const auto set = generate_synthetic(cfg);
    const auto path = std::filesystem::temp_directory_path() / "weca_roundtrip.csv";
    write_csv(set, path);
    const auto back = load_csv(path);
    std::filesystem::remove(path);
    REQUIRE(back.series.size() == set.series.size());
    for (std::size_t s = 0; s < set.series.size(); ++s) {
        CHECK(back.series[s].id == set.series[s].id);
        CHECK(back.series[s].start == set.series[s].start);
        CHECK(back.series[s].values == set.series[s].values);
    }
}

TEST_CASE("split of a length-100 series is 70/10/20") {
    const auto parts = split(ramp_set({100}), SplitSpec{}, 1);
    CHECK(parts.train.length(0) == 70);
    CHECK(parts.val.length(0) == 10);
    CHECK(parts.test.length(0) == 20);
    CHECK(parts.val.series[0].values.front() == 70.0);
    CHECK(parts.test.series[0].values.front() == 80.0);
    CHECK(format_iso_date(parts.test.series[0].start) == "2023-03-22");
}

TEST_CASE("degenerate split leaves evaluation partitions too short") {
    CHECK_THROWS_AS(split(ramp_set({100}), SplitSpec{1.0, 0.0, 0.0}, 10), DataError);
    CHECK_THROWS_AS(split(ramp_set({100}), SplitSpec{0.5, 0.1, 0.1}, 1), DataError);
}

TEST_CASE("split rounding assigns the deficit to train") {
    for (std::size_t len = 100; len <= 110; ++len) {
        const auto parts = split(ramp_set({len}), SplitSpec{}, 1);
        // Oracle in integer arithmetic: test = floor(len/5), val + test = floor(3 len/10).
        std::size_t test = 0, tail = 0;
        while (5 * (test + 1) <= len) ++test;
        while (10 * (tail + 1) <= 3 * len) ++tail;
        const std::size_t val = tail - test;
        CHECK(parts.val.length(0) == val);
        CHECK(parts.test.length(0) == test);
        CHECK(parts.train.length(0) + val + test == len);
        CHECK(std::fabs(static_cast<double>(parts.train.length(0)) - 0.7 * static_cast<double>(len)) <= 1.0 + 1e-12);
    }
    const auto parts = split(ramp_set({101}), SplitSpec{}, 1);
    CHECK(parts.train.length(0) == 71);
}

TEST_CASE("window counts") {
    const WindowSpec w{5, 2};
    CHECK(enumerate_windows(ramp_set({7}), w).windows.size() == 1);
    CHECK(enumerate_windows(ramp_set({9}), w).windows.size() == 3);
    const auto idx = enumerate_windows(ramp_set({9, 4}), w);
    CHECK(idx.skipped_series == 1);
    CHECK(idx.windows.size() == 3);
}

TEST_CASE("window count formula matches enumeration at desk scale") {
    SyntheticConfig cfg;
    const auto set = generate_synthetic(cfg);
    const WindowSpec w{56, 14};
    const auto idx = enumerate_windows(set, w);
    std::size_t formula = 0;
    for (std::size_t s = 0; s < set.series.size(); ++s) formula += set.length(s) - w.input - w.horizon + 1;
    std::size_t brute = 0;
    for (std::size_t s = 0; s < set.series.size(); ++s)
        for (std::size_t start = 0; start < set.length(s); ++start)
            if (start + w.span() <= set.length(s)) ++brute;
    CHECK(idx.windows.size() == formula);
    CHECK(formula == brute);
    CHECK(formula == 64 * (730 - 70 + 1));
}

TEST_CASE("batches are contiguous, leak-free and deterministic") {
    const auto set = ramp_set({30, 25});
    const WindowSpec w{6, 3};
    const auto stream = make_batches(set, w, 8, 3, 0);
    CHECK(stream.window_count == (30 - 9 + 1) + (25 - 9 + 1));
    std::size_t seen = 0;
    for (const auto& b : stream.batches) {
        for (std::size_t i = 0; i < b.batch; ++i) {
            const auto& ref = b.refs[i];
            CHECK(ref.origin >= w.input);  // max input index origin-1 < min target index origin
            const double base = 100.0 * ref.series;
            for (std::size_t t = 0; t < w.input; ++t) {
                CHECK(b.inputs[i * w.input + t] == base + static_cast<double>(ref.origin - w.input + t));
            }
            for (std::size_t h = 0; h < w.horizon; ++h) {
                CHECK(b.targets[i * w.horizon + h] == base + static_cast<double>(ref.origin + h));
            }
            CHECK(b.series_ids[i] == set.series[ref.series].id);
        }
        seen += b.batch;
    }
    CHECK(seen == stream.window_count);
    CHECK(stream.batches.back().batch == stream.window_count % 8);

    const auto again = make_batches(set, w, 8, 3, 0);
    const auto next_epoch = make_batches(set, w, 8, 3, 1);
    CHECK(again.batches[0].inputs == stream.batches[0].inputs);
    CHECK(next_epoch.batches[0].inputs != stream.batches[0].inputs);
}

TEST_CASE("normalization") {
    SeriesSet constant;
    constant.series.push_back(Series{"c", std::vector<double>(20, 5.0), parse_iso_date("2023-01-01")});
    const auto cstats = compute_stats(constant);
    CHECK(cstats.std[0] == kStdFloor);
    const auto zeroed = normalize(cstats, constant);
    for (double v : zeroed.series[0].values) CHECK(v == 0.0);

    SyntheticConfig cfg;
    cfg.n_series = 5;
    cfg.length = 300;
    const auto set = generate_synthetic(cfg);
    const auto parts = split(set, SplitSpec{}, 20);
    const auto stats = compute_stats(parts.train);
    const auto back = denormalize(stats, normalize(stats, parts.test));
    for (std::size_t s = 0; s < set.series.size(); ++s)
        for (std::size_t t = 0; t < back.series[s].values.size(); ++t)
            CHECK(std::fabs(back.series[s].values[t] - parts.test.series[s].values[t]) <= 1e-10);

    // Stats see only the train partition.
    auto altered = set;
    for (auto& s : altered.series)
        for (std::size_t t = 250; t < s.values.size(); ++t) s.values[t] += 1000.0;
    const auto stats2 = compute_stats(split(altered, SplitSpec{}, 20).train);
    CHECK(stats2.mean == stats.mean);
    CHECK(stats2.std == stats.std);
}

TEST_CASE("empty train partition cannot be normalized") {
    SeriesSet empty;
    CHECK_THROWS_AS(compute_stats(empty), DataError);
    empty.series.push_back(Series{"e", {}, {}});
    CHECK_THROWS_AS(compute_stats(empty), DataError);
}
