#include "weca/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>

#include "weca/error.hpp"
#include "weca/ops.hpp"
#include "weca/rng.hpp"

namespace weca {

namespace {

constexpr std::uint64_t kTestAnomalyStream = 0x7e57;
constexpr std::size_t kEvalBatch = 256;

std::string num(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

double parse_double(const std::string& s, const char* what) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw DataError(std::string("report: bad ") + what + " '" + s + "'");
    }
    return v;
}

// Summation over sorted values so the result ignores input order.
double sorted_mean(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(std::vector<double> v, double mean) {
    if (v.size() < 2) return 0.0;
    std::sort(v.begin(), v.end());
    double sq = 0.0;
    for (double x : v) sq += (x - mean) * (x - mean);
    return std::sqrt(sq / static_cast<double>(v.size() - 1));
}

int regime_rank(const std::string& name) {
    try {
        return static_cast<int>(parse_regime(name));
    } catch (const ConfigError&) {
        return 1000;
    }
}

// Per-window SMAPE in original units, in window order.
std::vector<double> score_windows(const WindowBatch& set, const Forecaster& forecaster, const NormStats& stats,
                                  const WindowSpec& window) {
    const std::size_t c = stats.channels;
    const std::size_t out_len = window.horizon * c;
    std::vector<double> out(set.batch, 0.0);
    for (std::size_t start = 0; start < set.batch; start += kEvalBatch) {
        const std::size_t b = std::min(set.batch, start + kEvalBatch) - start;
        const auto pred = forecaster(set, start, b);
        if (pred.size() != b * out_len) throw ShapeError("evaluate: forecaster returned the wrong number of values");
        for (std::size_t k = 0; k < b; ++k) {
            const std::size_t w = start + k;
            const std::size_t series = set.refs[w].series;
            std::vector<double> y(out_len), yhat(out_len);
            for (std::size_t h = 0; h < window.horizon; ++h) {
                for (std::size_t ch = 0; ch < c; ++ch) {
                    const std::size_t j = h * c + ch;
                    y[j] = denormalize_value(stats, series, ch, set.targets[w * out_len + j]);
                    yhat[j] = denormalize_value(stats, series, ch, pred[k * out_len + j]);
                    if (!std::isfinite(yhat[j])) {
                        throw NumericError("non-finite forecast for window " + set.series_ids[w] + "@" +
                                           std::to_string(set.refs[w].origin));
                    }
                }
            }
            out[w] = smape(y, yhat);
        }
    }
    return out;
}

}  // namespace

double smape(const std::vector<double>& y, const std::vector<double>& yhat) {
    if (y.size() != yhat.size() || y.empty()) {
        throw ShapeError("smape: sizes " + std::to_string(y.size()) + " and " + std::to_string(yhat.size()));
    }
    double total = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) {
        const double denom = std::max(std::fabs(y[k]) + std::fabs(yhat[k]), kSmapeEps);
        total += 2.0 * std::fabs(yhat[k] - y[k]) / denom;
    }
    return std::min(200.0, 100.0 * total / static_cast<double>(y.size()));
}

TestSets build_test_sets(const SeriesSet& test, const WindowSpec& window, const AnomalyConfig& config,
                         std::uint64_t seed) {
    const auto index = enumerate_windows(test, window);
    if (index.windows.empty()) throw DataError("test partition has no complete window");
    TestSets sets;
    sets.nd = gather_batch(test, window, index.windows);
    Rng rng(derive_seed(seed, {kTestAnomalyStream}));
    const auto aug = augment_batch(sets.nd, window, test.channels, config, 1.0, rng);
    sets.ad = sets.nd;
    sets.ad.inputs = aug.inputs;
    sets.ad.targets = aug.targets;
    sets.injection_start = aug.injection_start;
    return sets;
}

RunReport evaluate(const ModelParams& params, const ModelConfig& model, const TestSets& sets, const NormStats& stats,
                   const WindowSpec& window) {
    const std::size_t c = model.encoder.input_channels;
    const std::size_t in_len = window.input * c;
    const Forecaster f = [&](const WindowBatch& set, std::size_t start, std::size_t count) {
        std::vector<double> x(set.inputs.begin() + start * in_len, set.inputs.begin() + (start + count) * in_len);
        try {
            const Tensor pred = forecast(Tensor::constant({count, window.input, c}, std::move(x)), params, model);
            return std::vector<double>(pred.data().begin(), pred.data().end());
        } catch (const NumericError&) {
            for (std::size_t k = start; k < start + count; ++k) {
                try {
                    forecast(Tensor::constant({window.input, c}, std::vector<double>(set.inputs.begin() + k * in_len,
                                                                                    set.inputs.begin() + (k + 1) * in_len)),
                             params, model);
                } catch (const NumericError& e) {
                    throw NumericError("non-finite forecast for window " + set.series_ids[k] + "@" +
                                       std::to_string(set.refs[k].origin) + ": " + e.what());
                }
            }
            throw;
        }
    };
    return evaluate(f, sets, stats, window);
}

RunReport evaluate(const Forecaster& forecaster, const TestSets& sets, const NormStats& stats,
                   const WindowSpec& window) {
    if (sets.nd.batch != sets.ad.batch) throw ShapeError("evaluate: ND and AD sets differ in size");
    const auto nd = score_windows(sets.nd, forecaster, stats, window);
    const auto ad = score_windows(sets.ad, forecaster, stats, window);

    // Within-series means, ordered by series index.
    std::map<std::size_t, std::pair<std::vector<double>, std::vector<double>>> by_series;
    for (std::size_t w = 0; w < nd.size(); ++w) {
        auto& entry = by_series[sets.nd.refs[w].series];
        entry.first.push_back(nd[w]);
        entry.second.push_back(ad[w]);
    }
    RunReport report;
    std::vector<double> nd_means, ad_means;
    for (const auto& [series, scores] : by_series) {
        SeriesScore s;
        s.id = stats.ids.at(series);
        s.smape_nd = std::accumulate(scores.first.begin(), scores.first.end(), 0.0) / scores.first.size();
        s.smape_ad = std::accumulate(scores.second.begin(), scores.second.end(), 0.0) / scores.second.size();
        nd_means.push_back(s.smape_nd);
        ad_means.push_back(s.smape_ad);
        report.per_series.push_back(std::move(s));
    }
    report.smape_nd = std::accumulate(nd_means.begin(), nd_means.end(), 0.0) / nd_means.size();
    report.smape_ad = std::accumulate(ad_means.begin(), ad_means.end(), 0.0) / ad_means.size();
    return report;
}

AggregateReport aggregate(const std::vector<RunReport>& reports) {
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> groups;
    for (const auto& r : reports) {
        groups[r.regime].first.push_back(r.smape_nd);
        groups[r.regime].second.push_back(r.smape_ad);
    }
    if (!groups.count("NT")) throw ConfigError("aggregate: no NT runs to compare against");

    AggregateReport out;
    for (const auto& [regime, values] : groups) {
        AggregateRow row;
        row.regime = regime;
        row.n = values.first.size();
        row.nd_mean = sorted_mean(values.first);
        row.ad_mean = sorted_mean(values.second);
        row.nd_std = sample_std(values.first, row.nd_mean);
        row.ad_std = sample_std(values.second, row.ad_mean);
        out.rows.push_back(row);
    }
    std::stable_sort(out.rows.begin(), out.rows.end(), [](const AggregateRow& a, const AggregateRow& b) {
        return regime_rank(a.regime) < regime_rank(b.regime);
    });
    const auto nt = *std::find_if(out.rows.begin(), out.rows.end(), [](const auto& r) { return r.regime == "NT"; });
    for (auto& row : out.rows) {
        row.nd_delta = row.regime == "NT" ? 0.0 : row.nd_mean - nt.nd_mean;
        row.ad_delta = row.regime == "NT" ? 0.0 : row.ad_mean - nt.ad_mean;
    }
    return out;
}

std::string fingerprint(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_run_reports_csv(const std::vector<RunReport>& reports, std::ostream& out) {
    out << "regime,seed,smape_nd,smape_ad,fingerprint\n";
    for (const auto& r : reports) {
        out << r.regime << ',' << r.seed << ',' << num(r.smape_nd) << ',' << num(r.smape_ad) << ',' << r.fingerprint
            << '\n';
    }
}

std::vector<RunReport> read_run_reports_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "regime,seed,smape_nd,smape_ad,fingerprint") {
        throw DataError("run report: unexpected header");
    }
    std::vector<RunReport> reports;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::size_t from = 0;
        for (std::size_t comma; (comma = line.find(',', from)) != std::string::npos; from = comma + 1) {
            f.push_back(line.substr(from, comma - from));
        }
        f.push_back(line.substr(from));
        if (f.size() != 5) throw DataError("run report row " + std::to_string(row) + ": expected 5 fields");
        RunReport r;
        r.regime = f[0];
        r.seed = static_cast<std::uint64_t>(parse_double(f[1], "seed"));
        r.smape_nd = parse_double(f[2], "smape_nd");
        r.smape_ad = parse_double(f[3], "smape_ad");
        r.fingerprint = f[4];
        reports.push_back(std::move(r));
    }
    return reports;
}

void write_per_series_csv(const RunReport& report, std::ostream& out) {
    out << "series_id,smape_nd,smape_ad\n";
    for (const auto& s : report.per_series) out << s.id << ',' << num(s.smape_nd) << ',' << num(s.smape_ad) << '\n';
}

void write_aggregate_csv(const AggregateReport& report, std::ostream& out) {
    out << "regime,n,nd_mean,nd_std,nd_delta,ad_mean,ad_std,ad_delta,fingerprint\n";
    for (const auto& r : report.rows) {
        out << r.regime << ',' << r.n << ',' << num(r.nd_mean) << ',' << num(r.nd_std) << ',' << num(r.nd_delta)
            << ',' << num(r.ad_mean) << ',' << num(r.ad_std) << ',' << num(r.ad_delta) << ',' << report.fingerprint
            << '\n';
    }
}

void write_aggregate_table(const AggregateReport& report, std::ostream& out) {
    out << "# SMAPE in percent, 0-200 convention: 200/n * sum |yhat - y| / max(|y| + |yhat|, 1e-8)\n";
    out << "# mean +- sample std over seeds; delta = regime mean - NT mean (negative is better)\n";
    if (!report.fingerprint.empty()) out << "# config " << report.fingerprint << '\n';
    if (!report.failed.empty()) {
        out << "# INCOMPLETE: failed runs";
        for (const auto& f : report.failed) out << ' ' << f;
        out << '\n';
    }
    char line[256];
    std::snprintf(line, sizeof(line), "%-10s %3s  %-16s %8s  %-16s %8s\n", "regime", "n", "ND SMAPE", "ND delta",
                  "AD SMAPE", "AD delta");
    out << line;
    for (const auto& r : report.rows) {
        char nd[32], ad[32];
        std::snprintf(nd, sizeof(nd), "%.2f +- %.2f", r.nd_mean, r.nd_std);
        std::snprintf(ad, sizeof(ad), "%.2f +- %.2f", r.ad_mean, r.ad_std);
        std::snprintf(line, sizeof(line), "%-10s %3zu  %-16s %+8.2f  %-16s %+8.2f%s\n", r.regime.c_str(), r.n, nd,
                      r.nd_delta, ad, r.ad_delta, r.n == 1 ? "  (n=1, std not estimable)" : "");
        out << line;
    }
}

}  // namespace weca
