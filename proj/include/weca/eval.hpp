#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "weca/anomaly.hpp"
#include "weca/datagen.hpp"
#include "weca/model.hpp"
#include "weca/trainer.hpp"

namespace weca {

inline constexpr double kSmapeEps = 1e-8;

/// (100 / n) sum 2|yhat - y| / max(|y| + |yhat|, eps), in percent, range [0, 200].
double smape(const std::vector<double>& y, const std::vector<double>& yhat);

/// Matched normal (ND) and anomaly-affected (AD) test windows in normalized
/// units. Window k of both batches has the same origin.
struct TestSets {
    WindowBatch nd;
    WindowBatch ad;
    std::vector<std::size_t> injection_start;
};

/// Every stride-1 window of the test partition; each AD window carries one
/// injected anomaly drawn exactly as during training.
TestSets build_test_sets(const SeriesSet& test, const WindowSpec& window, const AnomalyConfig& config,
                         std::uint64_t seed);

struct SeriesScore {
    std::string id;
    double smape_nd = 0.0;
    double smape_ad = 0.0;
};

struct RunReport {
    std::string regime;
    std::uint64_t seed = 0;
    double smape_nd = 0.0;
    double smape_ad = 0.0;
    std::vector<SeriesScore> per_series;
    std::string fingerprint;
};

/// Normalized-unit forecasts (count x H x C) for windows [start, start + count) of `set`.
using Forecaster = std::function<std::vector<double>(const WindowBatch& set, std::size_t start, std::size_t count)>;

/// Forecasts both test sets, denormalizes with `stats`, and averages SMAPE
/// within each series and then across series. A non-finite forecast throws
/// NumericError naming the window (series id and origin).
RunReport evaluate(const Forecaster& forecaster, const TestSets& sets, const NormStats& stats,
                   const WindowSpec& window);
RunReport evaluate(const ModelParams& params, const ModelConfig& model, const TestSets& sets, const NormStats& stats,
                   const WindowSpec& window);

struct AggregateRow {
    std::string regime;
    std::size_t n = 0;
    double nd_mean = 0.0, nd_std = 0.0, nd_delta = 0.0;
    double ad_mean = 0.0, ad_std = 0.0, ad_delta = 0.0;
};

struct AggregateReport {
    std::vector<AggregateRow> rows;
    /// "regime/seed" of runs that failed; a non-empty list marks the report incomplete.
    std::vector<std::string> failed;
    std::string fingerprint;
};

/// Mean and sample std per regime, deltas against NT. Rows follow the
/// regime order NT, FT, CL-IL, WECA, ablations; the result does not depend on
/// the order of `reports`. Throws ConfigError when NT is absent.
AggregateReport aggregate(const std::vector<RunReport>& reports);

/// 64-bit FNV-1a of `text`, as 16 hex digits.
std::string fingerprint(const std::string& text);

void write_run_reports_csv(const std::vector<RunReport>& reports, std::ostream& out);
std::vector<RunReport> read_run_reports_csv(std::istream& in);
void write_per_series_csv(const RunReport& report, std::ostream& out);
void write_aggregate_csv(const AggregateReport& report, std::ostream& out);
/// Plain-text table: regime, ND SMAPE +- std, ND delta, AD SMAPE +- std, AD delta.
void write_aggregate_table(const AggregateReport& report, std::ostream& out);

}  // namespace weca
