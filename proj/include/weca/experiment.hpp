#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "weca/config.hpp"
#include "weca/eval.hpp"

namespace weca {

enum class LogLevel { Error, Info, Debug };

/// Reads WECA_LOG (error, info, debug); defaults to info.
LogLevel log_level_from_env();
void log_message(LogLevel level, const std::string& message);

/// Raw series, normalization statistics and the normalized partitions.
struct PreparedData {
    SeriesSet raw;
    NormStats stats;
    TrainData train;
    SeriesSet test;  // normalized
};

PreparedData prepare_data(const ExperimentConfig& config);

/// Fingerprint of the config alone, and of the config plus one run.
std::string config_fingerprint(const ExperimentConfig& config);
std::string run_fingerprint(const ExperimentConfig& config, Regime regime, std::uint64_t seed);

/// <out>/<REGIME>_s<seed>
std::filesystem::path run_dir(const ExperimentConfig& config, Regime regime, std::uint64_t seed);

/// Trains one run and writes checkpoint.ckpt and train_log.csv into its run
/// directory. FT reads the NT checkpoint of the same seed unless
/// train.from_checkpoint is set.
TrainResult run_train(const ExperimentConfig& config, const PreparedData& data, Regime regime, std::uint64_t seed);

/// Evaluates a run's checkpoint and writes report.csv and per_series.csv.
RunReport run_eval(const ExperimentConfig& config, const PreparedData& data, Regime regime, std::uint64_t seed);

struct BenchResult {
    std::vector<RunReport> reports;  // regime-major, then seed
    AggregateReport aggregate;
    bool complete = true;
};

/// Trains and evaluates every (regime, seed) of the config on up to `jobs`
/// threads, then writes runs.csv, aggregate.csv and report.txt. Failed runs
/// are listed in the report, which is then marked incomplete.
BenchResult run_bench(const ExperimentConfig& config, std::size_t jobs);

/// Rebuilds aggregate.csv and report.txt from <out>/runs.csv.
AggregateReport run_report(const ExperimentConfig& config);

struct PreviewRow {
    std::size_t t = 0;
    double original = 0.0;
    double anomaly = 0.0;
    double augmented = 0.0;
};

struct Preview {
    std::string series_id;
    AnomalyParams params;
    std::vector<PreviewRow> rows;  // T + H rows in original units
};

/// The series' first T + H days with one anomaly starting at input index
/// `onset` (sampled from the input tail when absent), in original units.
Preview preview_injection(const ExperimentConfig& config, const PreparedData& data, const std::string& series_id,
                          std::optional<std::size_t> onset, std::uint64_t seed);
void write_preview_csv(const Preview& preview, std::ostream& out);
/// Three aligned polylines (original, anomaly, augmented) with axes.
void write_preview_svg(const Preview& preview, std::ostream& out);

}  // namespace weca
