#include "weca/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "weca/error.hpp"
#include "weca/rng.hpp"

namespace weca {

namespace {

constexpr std::uint64_t kPreviewStream = 0x9e7;

std::mutex& log_mutex() {
    static std::mutex m;
    return m;
}

std::string num(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    return out;
}

std::filesystem::path checkpoint_path(const ExperimentConfig& config, Regime regime, std::uint64_t seed) {
    return run_dir(config, regime, seed) / "checkpoint.ckpt";
}

void write_bench_outputs(const ExperimentConfig& config, const std::vector<RunReport>& reports,
                         AggregateReport& aggregate) {
    std::filesystem::create_directories(config.out_dir);
    {
        auto out = open_out(config.out_dir / "runs.csv");
        write_run_reports_csv(reports, out);
    }
    {
        auto out = open_out(config.out_dir / "aggregate.csv");
        write_aggregate_csv(aggregate, out);
    }
    auto out = open_out(config.out_dir / "report.txt");
    write_aggregate_table(aggregate, out);
}

}  // namespace

LogLevel log_level_from_env() {
    const char* v = std::getenv("WECA_LOG");
    if (!v) return LogLevel::Info;
    const std::string s(v);
    if (s == "error") return LogLevel::Error;
    if (s == "debug") return LogLevel::Debug;
    return LogLevel::Info;
}

void log_message(LogLevel level, const std::string& message) {
    if (static_cast<int>(level) > static_cast<int>(log_level_from_env())) return;
    static const char* names[] = {"error", "info", "debug"};
    std::lock_guard<std::mutex> lock(log_mutex());
    std::cerr << "[" << names[static_cast<int>(level)] << "] " << message << '\n';
}

PreparedData prepare_data(const ExperimentConfig& config) {
    config.validate();
    PreparedData d;
    if (config.data_source == "csv") {
        d.raw = load_csv(config.csv_path);
    } else {
        SyntheticConfig sc = config.synthetic;
        sc.window = config.window;
        d.raw = generate_synthetic(sc);
    }
    const auto parts = split(d.raw, config.split, config.window.span());
    d.stats = compute_stats(parts.train);
    d.train = {normalize(d.stats, parts.train), normalize(d.stats, parts.val), config.window};
    d.test = normalize(d.stats, parts.test);
    return d;
}

std::string config_fingerprint(const ExperimentConfig& config) { return fingerprint(canonical_config(config)); }

std::string run_fingerprint(const ExperimentConfig& config, Regime regime, std::uint64_t seed) {
    return fingerprint(canonical_config(config) + "run.regime=" + regime_name(regime) +
                       "\nrun.seed=" + std::to_string(seed) + "\n");
}

std::filesystem::path run_dir(const ExperimentConfig& config, Regime regime, std::uint64_t seed) {
    return config.out_dir / (regime_name(regime) + "_s" + std::to_string(seed));
}

TrainResult run_train(const ExperimentConfig& config, const PreparedData& data, Regime regime, std::uint64_t seed) {
    TrainConfig tc = config.train_for(regime, seed);
    if (regime == Regime::FT && tc.from_checkpoint.empty()) {
        tc.from_checkpoint = checkpoint_path(config, Regime::NT, seed);
        if (!std::filesystem::exists(tc.from_checkpoint)) {
            throw ConfigError("FT seed " + std::to_string(seed) + " needs the NT checkpoint '" +
                              tc.from_checkpoint.string() + "'; train NT with the same seed first");
        }
    }
    const auto dir = run_dir(config, regime, seed);
    std::filesystem::create_directories(dir);
    log_message(LogLevel::Info, "train " + regime_name(regime) + " seed " + std::to_string(seed));
    const auto result = train(data.train, config.model_for(data.raw.channels), tc);
    save_checkpoint(result.params, dir / "checkpoint.ckpt",
                    {{"fingerprint", run_fingerprint(config, regime, seed)},
                     {"regime", regime_name(regime)},
                     {"seed", std::to_string(seed)},
                     {"best_epoch", std::to_string(result.best_epoch)},
                     {"best_val_mae", num(result.best_val_mae)}});
    auto log = open_out(dir / "train_log.csv");
    write_train_log(result.log, log);
    log_message(LogLevel::Debug, regime_name(regime) + " seed " + std::to_string(seed) + ": best epoch " +
                                     std::to_string(result.best_epoch) + " of " + std::to_string(result.log.size()) +
                                     ", val MAE " + num(result.best_val_mae));
    return result;
}

RunReport run_eval(const ExperimentConfig& config, const PreparedData& data, Regime regime, std::uint64_t seed) {
    const auto path = checkpoint_path(config, regime, seed);
    if (!std::filesystem::exists(path)) {
        throw ConfigError("no checkpoint at '" + path.string() + "'; train " + regime_name(regime) + " first");
    }
    const auto params = load_checkpoint(path);
    const auto sets = build_test_sets(data.test, config.window, config.anomaly, config.eval_seed);
    auto report = evaluate(params, config.model_for(data.raw.channels), sets, data.stats, config.window);
    report.regime = regime_name(regime);
    report.seed = seed;
    report.fingerprint = run_fingerprint(config, regime, seed);
    const auto dir = run_dir(config, regime, seed);
    {
        auto out = open_out(dir / "report.csv");
        write_run_reports_csv({report}, out);
    }
    auto out = open_out(dir / "per_series.csv");
    write_per_series_csv(report, out);
    log_message(LogLevel::Info, report.regime + " seed " + std::to_string(seed) + ": ND " + num(report.smape_nd) +
                                    " AD " + num(report.smape_ad));
    return report;
}

BenchResult run_bench(const ExperimentConfig& config, std::size_t jobs) {
    const auto data = prepare_data(config);
    const auto& regimes = config.regimes;
    const bool has_nt = std::find(regimes.begin(), regimes.end(), Regime::NT) != regimes.end();
    if (!has_nt) throw ConfigError("bench.regimes must include NT");

    struct Task {
        Regime regime;
        std::uint64_t seed;
        std::optional<RunReport> report;
        std::string error;
    };
    std::vector<Task> tasks;
    for (auto r : regimes) {
        for (auto s : config.seeds) tasks.push_back({r, s, std::nullopt, {}});
    }

    // FT depends on NT's checkpoint, so it runs in a second wave.
    auto run_wave = [&](bool ft_wave) {
        std::vector<Task*> wave;
        for (auto& t : tasks) {
            if ((t.regime == Regime::FT) == ft_wave) wave.push_back(&t);
        }
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (std::size_t i; (i = next.fetch_add(1)) < wave.size();) {
                Task& t = *wave[i];
                if (t.regime == Regime::FT) {
                    const bool nt_failed = std::any_of(tasks.begin(), tasks.end(), [&](const Task& o) {
                        return o.regime == Regime::NT && o.seed == t.seed && !o.report;
                    });
                    if (nt_failed) {
                        t.error = "NT run for this seed failed";
                        continue;
                    }
                }
                try {
                    run_train(config, data, t.regime, t.seed);
                    t.report = run_eval(config, data, t.regime, t.seed);
                } catch (const std::exception& e) {
                    t.error = e.what();
                    log_message(LogLevel::Error,
                                regime_name(t.regime) + " seed " + std::to_string(t.seed) + " failed: " + t.error);
                }
            }
        };
        const std::size_t n = std::max<std::size_t>(1, std::min(jobs, wave.size()));
        std::vector<std::thread> pool;
        for (std::size_t k = 1; k < n; ++k) pool.emplace_back(worker);
        worker();
        for (auto& th : pool) th.join();
    };
    run_wave(false);
    run_wave(true);

    BenchResult result;
    std::vector<std::string> failed;
    for (const auto& t : tasks) {
        if (t.report) {
            result.reports.push_back(*t.report);
        } else {
            failed.push_back(regime_name(t.regime) + "/" + std::to_string(t.seed));
        }
    }
    result.complete = failed.empty();
    const bool nt_ok = std::any_of(result.reports.begin(), result.reports.end(),
                                   [](const RunReport& r) { return r.regime == "NT"; });
    if (nt_ok) result.aggregate = aggregate(result.reports);
    result.aggregate.failed = failed;
    result.aggregate.fingerprint = config_fingerprint(config);
    write_bench_outputs(config, result.reports, result.aggregate);
    return result;
}

AggregateReport run_report(const ExperimentConfig& config) {
    const auto path = config.out_dir / "runs.csv";
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path.string() + "'; run bench first");
    const auto reports = read_run_reports_csv(in);
    auto agg = aggregate(reports);
    for (auto r : config.regimes) {
        for (auto s : config.seeds) {
            const bool present = std::any_of(reports.begin(), reports.end(), [&](const RunReport& x) {
                return x.regime == regime_name(r) && x.seed == s;
            });
            if (!present) agg.failed.push_back(regime_name(r) + "/" + std::to_string(s));
        }
    }
    agg.fingerprint = config_fingerprint(config);
    write_bench_outputs(config, reports, agg);
    return agg;
}

Preview preview_injection(const ExperimentConfig& config, const PreparedData& data, const std::string& series_id,
                          std::optional<std::size_t> onset, std::uint64_t seed) {
    const std::size_t index = data.raw.index_of(series_id);
    const auto& series = data.raw.series[index];
    const std::size_t c = data.raw.channels;
    const std::size_t span = config.window.span();
    if (series.values.size() / c < span) throw DataError("series '" + series_id + "' is shorter than T + H");

    Rng rng(derive_seed(seed, {kPreviewStream}));
    Preview p;
    p.series_id = series_id;
    p.params = sample_params(rng, config.anomaly, config.window.input);
    if (onset) {
        if (*onset >= config.window.input) {
            throw DataError("onset " + std::to_string(*onset) + " must be below the input length " +
                            std::to_string(config.window.input));
        }
        p.params.onset = *onset;
    }
    // Same rule as inject(), first channel, scaled back to original units.
    const double sd = data.stats.std[index * c];
    for (std::size_t t = 0; t < span; ++t) {
        PreviewRow row;
        row.t = t;
        row.original = series.values[t * c];
        if (t >= p.params.onset) {
            row.anomaly = p.params.sign * config.anomaly.scale *
                          anomaly_curve(static_cast<double>(t - p.params.onset), p.params) * sd;
        }
        row.augmented = row.original + row.anomaly;
        p.rows.push_back(row);
    }
    return p;
}

void write_preview_csv(const Preview& preview, std::ostream& out) {
    out << "t,original,anomaly,augmented\n";
    for (const auto& r : preview.rows) {
        out << r.t << ',' << num(r.original) << ',' << num(r.anomaly) << ',' << num(r.augmented) << '\n';
    }
}

void write_preview_svg(const Preview& preview, std::ostream& out) {
    constexpr double W = 800, H = 320, L = 60, R = 20, T = 30, B = 40;
    double lo = 0.0, hi = 0.0;
    bool first = true;
    for (const auto& r : preview.rows) {
        for (double v : {r.original, r.anomaly, r.augmented}) {
            lo = first ? v : std::min(lo, v);
            hi = first ? v : std::max(hi, v);
            first = false;
        }
    }
    if (hi == lo) hi = lo + 1.0;
    const double n = static_cast<double>(std::max<std::size_t>(1, preview.rows.size() - 1));
    auto x = [&](std::size_t t) { return L + (W - L - R) * static_cast<double>(t) / n; };
    auto y = [&](double v) { return T + (H - T - B) * (hi - v) / (hi - lo); };
    char buf[128];
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    std::snprintf(buf, sizeof(buf), "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n", L, H - B,
                  W - R, H - B);
    out << buf;
    std::snprintf(buf, sizeof(buf), "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n", L, T, L,
                  H - B);
    out << buf;
    std::snprintf(buf, sizeof(buf), "<text x=\"%g\" y=\"%g\" font-size=\"11\">%.1f</text>\n", 4.0, T + 4, hi);
    out << buf;
    std::snprintf(buf, sizeof(buf), "<text x=\"%g\" y=\"%g\" font-size=\"11\">%.1f</text>\n", 4.0, H - B, lo);
    out << buf;
    std::snprintf(buf, sizeof(buf), "<text x=\"%g\" y=\"%g\" font-size=\"11\">t = %zu</text>\n", W - R - 50,
                  H - B + 16, preview.rows.size() - 1);
    out << buf;
    out << "<text x=\"" << L << "\" y=\"18\" font-size=\"13\">" << preview.series_id << ", onset "
        << preview.params.onset << "</text>\n";
    const struct {
        const char* name;
        const char* color;
        double PreviewRow::*field;
    } lines[] = {{"original", "#1f77b4", &PreviewRow::original},
                 {"anomaly", "#d62728", &PreviewRow::anomaly},
                 {"augmented", "#2ca02c", &PreviewRow::augmented}};
    double legend_x = W - R - 260;
    for (const auto& line : lines) {
        out << "<polyline fill=\"none\" stroke=\"" << line.color << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& r : preview.rows) {
            std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", x(r.t), y(r.*line.field));
            out << buf;
        }
        out << "\"/>\n";
        out << "<text x=\"" << legend_x << "\" y=\"18\" font-size=\"12\" fill=\"" << line.color << "\">"
            << line.name << "</text>\n";
        legend_x += 85;
    }
    out << "</svg>\n";
}

}  // namespace weca
