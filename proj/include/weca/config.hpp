#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "weca/anomaly.hpp"
#include "weca/datagen.hpp"
#include "weca/model.hpp"
#include "weca/trainer.hpp"

namespace weca {

/// Everything an experiment needs. Every field has a default; the defaults
/// are the desk-scale synthetic benchmark.
struct ExperimentConfig {
    std::string data_source = "synthetic";  // or "csv"
    std::filesystem::path csv_path;
    SyntheticConfig synthetic;
    WindowSpec window;
    SplitSpec split;
    ModelConfig model;
    AnomalyConfig anomaly;
    TrainConfig train;  // regime and seed are set per run
    std::uint64_t eval_seed = 1234;
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    std::vector<Regime> regimes{Regime::NT, Regime::FT, Regime::CL_IL, Regime::WECA};
    std::filesystem::path out_dir = "runs";

    ExperimentConfig();
    /// Cross-field checks; also verifies that referenced paths exist.
    void validate() const;
    /// Model section with channel count and horizon filled in.
    ModelConfig model_for(std::size_t channels) const;
    /// Train section with the anomaly settings, regime and seed applied.
    TrainConfig train_for(Regime regime, std::uint64_t seed) const;
};

/// Applies one `key=value` assignment. Throws ConfigError for unknown keys
/// or unparsable values.
void set_config_value(ExperimentConfig& config, const std::string& key, const std::string& value);

/// Flat text: one dotted `key=value` per line, `#` comments, blank lines
/// ignored. Unknown and repeated keys are rejected with the line number.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Every key except out.dir with its current value, sorted by key; input to
/// fingerprints.
std::string canonical_config(const ExperimentConfig& config);

std::vector<std::string> config_keys();

}  // namespace weca
