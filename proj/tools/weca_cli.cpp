// weca: data generation, anomaly preview, training, evaluation and benchmark
// reports for the weighted contrastive forecaster.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

#include "weca/error.hpp"
#include "weca/experiment.hpp"

namespace {

constexpr int kUsageError = 1;
constexpr int kRuntimeError = 2;

struct CommonFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string regime;
    std::size_t jobs = 1;
    std::string out;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool with_regime, bool with_jobs) {
    cmd->add_option("--config", f.config_path, "Config file (dotted key=value lines)")->check(CLI::ExistingFile);
    cmd->add_option("--seed", f.seed, "Run seed");
    if (with_regime) cmd->add_option("--regime", f.regime, "NT, FT, CL-IL, WECA, ABL-IL, ABL-TL or ABL-ILTL");
    if (with_jobs) cmd->add_option("--jobs", f.jobs, "Parallel runs")->check(CLI::PositiveNumber);
    cmd->add_option("--out", f.out, "Output directory (overrides out.dir)");
    cmd->add_option("--set", f.overrides, "Config override key=value (repeatable)");
}

weca::ExperimentConfig load(const CommonFlags& f) {
    auto config = f.config_path.empty() ? weca::ExperimentConfig{} : weca::load_config(f.config_path);
    for (const auto& kv : f.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw weca::ConfigError("--set expects key=value, got '" + kv + "'");
        weca::set_config_value(config, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!f.out.empty()) config.out_dir = f.out;
    config.validate();
    return config;
}

std::uint64_t seed_or_first(const CommonFlags& f, const weca::ExperimentConfig& config) {
    return f.seed ? *f.seed : config.seeds.front();
}

weca::Regime required_regime(const CommonFlags& f) {
    if (f.regime.empty()) throw weca::ConfigError("--regime is required");
    return weca::parse_regime(f.regime);
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw weca::DataError("cannot write '" + path.string() + "'");
    return out;
}

int cmd_gen(const CommonFlags& f) {
    const auto config = load(f);
    const auto data = weca::prepare_data(config);
    std::filesystem::create_directories(config.out_dir);
    const auto path = config.out_dir / "data.csv";
    weca::write_csv(data.raw, path);
    std::cout << "wrote " << data.raw.total_samples() << " rows to " << path.string() << " (config "
              << weca::config_fingerprint(config) << ")\n";
    return 0;
}

int cmd_preview(const CommonFlags& f, const std::string& series, std::optional<std::size_t> onset, bool svg) {
    const auto config = load(f);
    const auto data = weca::prepare_data(config);
    const auto preview = weca::preview_injection(config, data, series, onset, seed_or_first(f, config));
    std::filesystem::create_directories(config.out_dir);
    const auto stem = config.out_dir / ("preview_" + series);
    {
        auto out = open_out(stem.string() + ".csv");
        weca::write_preview_csv(preview, out);
    }
    if (svg) {
        auto out = open_out(stem.string() + ".svg");
        weca::write_preview_svg(preview, out);
    }
    std::cout << "preview of " << series << ": onset " << preview.params.onset << ", A "
              << preview.params.amplitude << ", C " << preview.params.shape << ", sign " << preview.params.sign
              << " -> " << stem.string() << ".csv\n";
    return 0;
}

int cmd_train(const CommonFlags& f) {
    const auto config = load(f);
    const auto data = weca::prepare_data(config);
    const auto regime = required_regime(f);
    const auto seed = seed_or_first(f, config);
    const auto result = weca::run_train(config, data, regime, seed);
    std::cout << weca::regime_name(regime) << " seed " << seed << ": best epoch " << result.best_epoch << " of "
              << result.log.size() << ", val MAE " << result.best_val_mae << " -> "
              << weca::run_dir(config, regime, seed).string() << "\n";
    return 0;
}

int cmd_eval(const CommonFlags& f) {
    const auto config = load(f);
    const auto data = weca::prepare_data(config);
    const auto regime = required_regime(f);
    const auto seed = seed_or_first(f, config);
    const auto report = weca::run_eval(config, data, regime, seed);
    std::cout << report.regime << " seed " << seed << ": SMAPE ND " << report.smape_nd << ", AD " << report.smape_ad
              << " (fingerprint " << report.fingerprint << ")\n";
    return 0;
}

int cmd_bench(const CommonFlags& f) {
    auto config = load(f);
    if (f.seed) config.seeds = {*f.seed};
    if (!f.regime.empty()) throw weca::ConfigError("bench runs bench.regimes; use --set bench.regimes=... instead");
    const auto result = weca::run_bench(config, f.jobs);
    weca::write_aggregate_table(result.aggregate, std::cout);
    return result.complete ? 0 : kRuntimeError;
}

int cmd_report(const CommonFlags& f) {
    const auto config = load(f);
    const auto agg = weca::run_report(config);
    weca::write_aggregate_table(agg, std::cout);
    return agg.failed.empty() ? 0 : kRuntimeError;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Weighted contrastive anomaly-aware forecasting experiments"};
    app.require_subcommand(1);

    CommonFlags gen_f, prev_f, train_f, eval_f, bench_f, report_f;
    auto* gen = app.add_subcommand("gen", "Write the dataset as CSV to <out>/data.csv");
    add_common(gen, gen_f, false, false);

    auto* prev = app.add_subcommand("inject-preview", "Show one injected anomaly as CSV and SVG");
    add_common(prev, prev_f, false, false);
    std::string series;
    std::optional<std::size_t> onset;
    bool no_svg = false;
    prev->add_option("--series", series, "Series id")->required();
    prev->add_option("--onset", onset, "Input index where the anomaly starts (default: sampled)");
    prev->add_flag("--no-svg", no_svg, "Skip the SVG plot");

    auto* tr = app.add_subcommand("train", "Train one (regime, seed) run");
    add_common(tr, train_f, true, false);
    auto* ev = app.add_subcommand("eval", "Evaluate a trained run on ND and AD test sets");
    add_common(ev, eval_f, true, false);
    auto* bench = app.add_subcommand("bench", "Train and evaluate every regime and seed, then aggregate");
    add_common(bench, bench_f, true, true);
    auto* report = app.add_subcommand("report", "Rebuild the aggregate report from <out>/runs.csv");
    add_common(report, report_f, false, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kUsageError;
    }

    try {
        if (*gen) return cmd_gen(gen_f);
        if (*prev) return cmd_preview(prev_f, series, onset, !no_svg);
        if (*tr) return cmd_train(train_f);
        if (*ev) return cmd_eval(eval_f);
        if (*bench) return cmd_bench(bench_f);
        if (*report) return cmd_report(report_f);
    } catch (const weca::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsageError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntimeError;
    }
    return kUsageError;
}
