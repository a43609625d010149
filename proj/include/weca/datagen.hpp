#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace weca {

using Date = std::chrono::sys_days;

Date parse_iso_date(const std::string& text);
std::string format_iso_date(Date date);

/// One daily series. `values` is time-major: values[t * channels + c].
struct Series {
    std::string id;
    std::vector<double> values;
    Date start{};
};

struct SeriesSet {
    std::vector<Series> series;
    std::size_t channels = 1;

    std::size_t length(std::size_t s) const { return series[s].values.size() / channels; }
    std::size_t total_samples() const;
    /// Index of the series with this id; throws DataError when absent.
    std::size_t index_of(const std::string& id) const;
};

struct WindowSpec {
    std::size_t input = 56;    // T
    std::size_t horizon = 14;  // H
    std::size_t span() const { return input + horizon; }
};

struct SyntheticConfig {
    std::size_t n_series = 64;
    std::size_t length = 730;
    std::uint64_t seed = 1;
    double level_min = 80.0;
    double level_max = 250.0;
    /// Weekly profile amplitude as a fraction of the level.
    double weekly_amplitude = 0.35;
    /// Std of the total drift over the whole series, as a fraction of the level.
    double trend_scale = 0.15;
    /// Gaussian noise std as a fraction of the level.
    double noise_scale = 0.08;
    WindowSpec window{};
    std::string start_date = "2022-01-01";
};

/// level + weekly profile + linear drift + noise, clipped at 0.
SeriesSet generate_synthetic(const SyntheticConfig& config);

/// CSV contract: header `series_id,date,value`, one row per (id, date).
SeriesSet load_csv(const std::filesystem::path& path);
SeriesSet read_csv(std::istream& in);
void write_csv(const SeriesSet& set, std::ostream& out);
void write_csv(const SeriesSet& set, const std::filesystem::path& path);

struct SplitSpec {
    double train_frac = 0.70;
    double val_frac = 0.10;
    double test_frac = 0.20;
};

struct Partitions {
    SeriesSet train;
    SeriesSet val;
    SeriesSet test;
};

/// Per-series chronological split. test takes floor(len * test_frac), val
/// takes floor(len * (val_frac + test_frac)) minus that, and train the
/// remainder. Throws DataError when any partition is
/// shorter than `min_length`.
Partitions split(const SeriesSet& set, const SplitSpec& spec, std::size_t min_length);

/// A window is identified by its series and the index of its first target
/// step: input covers [origin - T, origin), target [origin, origin + H).
struct WindowRef {
    std::size_t series = 0;
    std::size_t origin = 0;
};

struct WindowIndex {
    std::vector<WindowRef> windows;
    std::size_t skipped_series = 0;  // shorter than T + H
};

/// Every stride-1 window, in (series, origin) order.
WindowIndex enumerate_windows(const SeriesSet& set, const WindowSpec& window);

struct WindowBatch {
    std::size_t batch = 0;
    std::vector<double> inputs;   // B x T x C
    std::vector<double> targets;  // B x H x C
    std::vector<std::string> series_ids;
    std::vector<WindowRef> refs;
};

WindowBatch gather_batch(const SeriesSet& set, const WindowSpec& window, const std::vector<WindowRef>& refs);

struct BatchStream {
    std::vector<WindowBatch> batches;
    std::size_t window_count = 0;
    std::size_t skipped_series = 0;
};

/// Windows shuffled deterministically per (seed, epoch); the final partial
/// batch is kept.
BatchStream make_batches(const SeriesSet& set, const WindowSpec& window, std::size_t batch_size,
                         std::uint64_t seed, std::uint64_t epoch = 0);

/// Shuffled window order for (seed, epoch), shared with the trainer.
std::vector<WindowRef> shuffled_windows(const WindowIndex& index, std::uint64_t seed, std::uint64_t epoch);

/// Per-series, per-channel z-score statistics.
struct NormStats {
    std::vector<std::string> ids;
    std::vector<double> mean;  // [series * channels + c]
    std::vector<double> std;
    std::size_t channels = 1;
};

constexpr double kStdFloor = 1e-8;

NormStats compute_stats(const SeriesSet& train);
SeriesSet normalize(const NormStats& stats, const SeriesSet& set);
SeriesSet denormalize(const NormStats& stats, const SeriesSet& set);
double denormalize_value(const NormStats& stats, std::size_t series, std::size_t channel, double value);

}  // namespace weca
