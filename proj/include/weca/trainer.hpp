#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "weca/anomaly.hpp"
#include "weca/datagen.hpp"
#include "weca/losses.hpp"
#include "weca/model.hpp"

namespace weca {

enum class Regime { NT, FT, CL_IL, WECA, ABL_IL, ABL_TL, ABL_ILTL };

std::string regime_name(Regime regime);
/// Accepts the names printed by regime_name ("NT", "CL-IL", "ABL-ILTL", ...).
Regime parse_regime(const std::string& name);
bool is_contrastive(Regime regime);

struct TrainConfig {
    double learning_rate = 1e-3;
    std::size_t batch_size = 32;
    std::size_t max_epochs = 100;
    std::size_t early_stop_patience = 10;
    double lambda = 1.0;
    Regime regime = Regime::NT;
    std::uint64_t seed = 0;
    /// Fraction of windows augmented in contrastive regimes. FT augments every window.
    double p_aug = 0.5;
    /// CL-IL/WECA/ablations: also fit the decoder on the augmented view.
    bool forecast_on_augmented = true;
    bool normalize_latents = true;
    /// 0 uses every training window each epoch; otherwise the first n of the shuffled order.
    std::size_t windows_per_epoch = 0;
    /// Starting checkpoint. Required for FT; optional pretrained start elsewhere.
    std::filesystem::path from_checkpoint;
    AnomalyConfig anomaly;

    void validate() const;
};

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t step = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;

    static AdamState zeros_like(const ModelParams& params);
};

/// One bias-corrected Adam update from the gradients stored on `params`.
/// Missing gradients count as zero. A non-finite gradient throws
/// NumericError naming the parameter, before anything is modified.
void adam_step(ModelParams& params, AdamState& state, double lr);

/// Normalized training and validation partitions.
struct TrainData {
    SeriesSet train;
    SeriesSet val;
    WindowSpec window;
};

struct EpochLog {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_mae = 0.0;
    double lr = 0.0;
    double wall_ms = 0.0;
};

struct TrainResult {
    ModelParams params;  // restored best-validation parameters
    std::vector<EpochLog> log;
    std::vector<double> batch_losses;
    std::size_t best_epoch = 0;
    double best_val_mae = 0.0;
    bool stopped_early = false;
};

struct BatchLossParts {
    Tensor total;
    double forecast = 0.0;
    double contrastive = 0.0;
};

/// Per-batch objective of `config.regime`. `augmented` is required for FT
/// and the contrastive regimes and ignored for NT.
BatchLossParts regime_loss(const WindowBatch& batch, const AugmentedBatch* augmented, const ModelParams& params,
                           const ModelConfig& model, const TrainConfig& config, const WindowSpec& window);

/// Forecast MAE over all windows of `set`, normalized units, no tape.
double validation_mae(const SeriesSet& set, const WindowSpec& window, const ModelParams& params,
                      const ModelConfig& model);

/// Trains from `config.from_checkpoint` when set, else from a seeded init.
/// Throws ConfigError for FT without a checkpoint and DivergenceError when a
/// loss or gradient turns non-finite.
TrainResult train(const TrainData& data, const ModelConfig& model, const TrainConfig& config);

void write_train_log(const std::vector<EpochLog>& log, std::ostream& out);

}  // namespace weca
