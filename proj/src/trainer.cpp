#include "weca/trainer.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>

#include "weca/error.hpp"
#include "weca/ops.hpp"
#include "weca/rng.hpp"

namespace weca {

namespace {

constexpr std::uint64_t kShuffleStream = 0x5f1e;
constexpr std::uint64_t kAugmentStream = 0xa06;
constexpr std::size_t kEvalBatch = 256;

struct RegimeInfo {
    Regime regime;
    const char* name;
};

constexpr RegimeInfo kRegimes[] = {
    {Regime::NT, "NT"},         {Regime::FT, "FT"},         {Regime::CL_IL, "CL-IL"},
    {Regime::WECA, "WECA"},     {Regime::ABL_IL, "ABL-IL"}, {Regime::ABL_TL, "ABL-TL"},
    {Regime::ABL_ILTL, "ABL-ILTL"},
};

Tensor window_tensor(const std::vector<double>& values, std::size_t batch, std::size_t steps,
                     std::size_t channels) {
    return Tensor::constant({batch, steps, channels}, values);
}

}  // namespace

std::string regime_name(Regime regime) {
    for (const auto& r : kRegimes) {
        if (r.regime == regime) return r.name;
    }
    throw ConfigError("unknown regime");
}

Regime parse_regime(const std::string& name) {
    for (const auto& r : kRegimes) {
        if (name == r.name) return r.regime;
    }
    throw ConfigError("unknown regime '" + name + "' (expected NT, FT, CL-IL, WECA, ABL-IL, ABL-TL or ABL-ILTL)");
}

bool is_contrastive(Regime regime) { return regime != Regime::NT && regime != Regime::FT; }

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be > 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (early_stop_patience < 1) throw ConfigError("early_stop_patience must be >= 1");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be >= 0");
    if (!(p_aug >= 0.0 && p_aug <= 1.0)) throw ConfigError("p_aug must lie in [0,1]");
}

AdamState AdamState::zeros_like(const ModelParams& params) {
    AdamState s;
    for (const auto& t : params.tensors()) {
        s.m.emplace_back(t.size(), 0.0);
        s.v.emplace_back(t.size(), 0.0);
    }
    return s;
}

void adam_step(ModelParams& params, AdamState& state, double lr) {
    if (state.m.size() != params.size()) throw ShapeError("adam_step: state does not match parameters");
    for (std::size_t p = 0; p < params.size(); ++p) {
        const auto& t = params.tensors()[p];
        if (state.m[p].size() != t.size()) {
            throw ShapeError("adam_step: moment buffer size mismatch for '" + params.names()[p] + "'");
        }
        if (!t.has_grad()) continue;
        for (double g : t.grad()) {
            if (!std::isfinite(g)) throw NumericError("adam_step: non-finite gradient in '" + params.names()[p] + "'");
        }
    }
    ++state.step;
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto& t = params.tensors()[p];
        auto values = t.mutable_data();
        auto& m = state.m[p];
        auto& v = state.v[p];
        for (std::size_t k = 0; k < values.size(); ++k) {
            const double g = t.has_grad() ? t.grad()[k] : 0.0;
            m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g;
            v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g * g;
            const double m_hat = m[k] / c1;
            const double v_hat = v[k] / c2;
            values[k] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
        }
    }
}

BatchLossParts regime_loss(const WindowBatch& batch, const AugmentedBatch* augmented, const ModelParams& params,
                           const ModelConfig& model, const TrainConfig& config, const WindowSpec& window) {
    const std::size_t b = batch.batch;
    const std::size_t c = model.encoder.input_channels;
    const Tensor x = window_tensor(batch.inputs, b, window.input, c);
    const Tensor y = window_tensor(batch.targets, b, window.horizon, c);
    BatchLossParts parts;
    if (config.regime == Regime::NT) {
        parts.total = forecast_mae(forecast(x, params, model), y);
        parts.forecast = parts.total.item();
        return parts;
    }
    if (!augmented) throw ConfigError("regime " + regime_name(config.regime) + " needs an augmented batch");
    const Tensor xa = window_tensor(augmented->inputs, b, window.input, c);
    const Tensor ya = window_tensor(augmented->targets, b, window.horizon, c);
    if (config.regime == Regime::FT) {
        parts.total = forecast_mae(forecast(xa, params, model), ya);
        parts.forecast = parts.total.item();
        return parts;
    }

    const Tensor z = encode(x, params, model);
    const Tensor zt = encode(xa, params, model);
    Tensor fit = forecast_mae(decode(z, params, model), y);
    if (config.forecast_on_augmented) {
        fit = ops::scale(ops::add(fit, forecast_mae(decode(zt, params, model), ya)), 0.5);
    }
    Tensor contrast;
    switch (config.regime) {
        case Regime::WECA:
            contrast = weca_loss({z, zt, augmented->weights}, config.normalize_latents);
            break;
        case Regime::CL_IL:
        case Regime::ABL_IL:
            contrast = instance_loss(z, zt, config.normalize_latents);
            break;
        case Regime::ABL_TL:
            contrast = temporal_loss(z, zt, config.normalize_latents);
            break;
        case Regime::ABL_ILTL:
            contrast = ops::add(instance_loss(z, zt, config.normalize_latents),
                                temporal_loss(z, zt, config.normalize_latents));
            break;
        default:
            throw ConfigError("regime_loss: unhandled regime");
    }
    parts.forecast = fit.item();
    parts.contrastive = contrast.item();
    parts.total = ops::add(fit, ops::scale(contrast, config.lambda));
    return parts;
}

double validation_mae(const SeriesSet& set, const WindowSpec& window, const ModelParams& params,
                      const ModelConfig& model) {
    const auto index = enumerate_windows(set, window);
    if (index.windows.empty()) throw DataError("validation partition has no complete window");
    double total = 0.0;
    for (std::size_t start = 0; start < index.windows.size(); start += kEvalBatch) {
        const std::size_t end = std::min(index.windows.size(), start + kEvalBatch);
        const std::vector<WindowRef> refs(index.windows.begin() + start, index.windows.begin() + end);
        const auto batch = gather_batch(set, window, refs);
        const std::size_t c = set.channels;
        const Tensor pred = forecast(window_tensor(batch.inputs, batch.batch, window.input, c), params, model);
        const Tensor y = window_tensor(batch.targets, batch.batch, window.horizon, c);
        total += forecast_mae(pred, y).item() * static_cast<double>(batch.batch);
    }
    return total / static_cast<double>(index.windows.size());
}

TrainResult train(const TrainData& data, const ModelConfig& model, const TrainConfig& config) {
    config.validate();
    model.validate();
    if (data.train.channels != model.encoder.input_channels || data.train.channels != model.decoder.output_channels) {
        throw ConfigError("train: data has " + std::to_string(data.train.channels) +
                          " channels but the model expects " + std::to_string(model.encoder.input_channels));
    }
    if (model.decoder.horizon != data.window.horizon) throw ConfigError("train: decoder horizon != window horizon");

    ModelParams params;
    if (!config.from_checkpoint.empty()) {
        params = load_checkpoint(config.from_checkpoint);
        const auto expected = parameter_shapes(model);
        bool ok = expected.size() == params.size();
        for (std::size_t i = 0; ok && i < expected.size(); ++i) {
            ok = expected[i].first == params.names()[i] && expected[i].second == params.tensors()[i].shape();
        }
        if (!ok) throw ConfigError("checkpoint '" + config.from_checkpoint.string() + "' does not match the model");
    } else if (config.regime == Regime::FT) {
        throw ConfigError("FT regime needs an NT checkpoint (set from_checkpoint)");
    } else {
        params = init_params(model, config.seed);
    }

    const auto index = enumerate_windows(data.train, data.window);
    if (index.windows.empty()) throw DataError("training partition has no complete window");
    const std::uint64_t shuffle_seed = derive_seed(config.seed, {kShuffleStream});
    const double p_aug = config.regime == Regime::FT ? 1.0 : config.p_aug;
    const bool needs_aug = config.regime != Regime::NT;

    AdamState adam = AdamState::zeros_like(params);
    TrainResult result;
    result.best_val_mae = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;
    std::size_t last_good = 0;

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        auto order = shuffled_windows(index, shuffle_seed, epoch);
        if (config.windows_per_epoch > 0 && order.size() > config.windows_per_epoch) {
            order.resize(config.windows_per_epoch);
        }
        Rng aug_rng(derive_seed(config.seed, {kAugmentStream, epoch}));
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            const std::vector<WindowRef> refs(order.begin() + start, order.begin() + end);
            const auto batch = gather_batch(data.train, data.window, refs);
            std::optional<AugmentedBatch> aug;
            if (needs_aug) {
                aug = augment_batch(batch, data.window, data.train.channels, config.anomaly, p_aug, aug_rng);
            }
            try {
                params.zero_grad();
                Tape tape;
                Recording rec(tape);
                const auto parts = regime_loss(batch, aug ? &*aug : nullptr, params, model, config, data.window);
                const double value = parts.total.item();
                if (!std::isfinite(value)) throw NumericError("loss is " + std::to_string(value));
                tape.backward(parts.total);
                adam_step(params, adam, config.learning_rate);
                loss_sum += value;
                result.batch_losses.push_back(value);
                ++batches;
            } catch (const NumericError& e) {
                throw DivergenceError(regime_name(config.regime) + " seed " + std::to_string(config.seed) +
                                          " diverged in epoch " + std::to_string(epoch) + ", batch " +
                                          std::to_string(batches) + ": " + e.what() + "; last good epoch " +
                                          std::to_string(last_good) + ", best checkpoint epoch " +
                                          std::to_string(result.best_epoch),
                                      static_cast<int>(last_good));
            }
        }

        EpochLog row;
        row.epoch = epoch;
        row.train_loss = loss_sum / static_cast<double>(batches);
        row.val_mae = validation_mae(data.val, data.window, params, model);
        row.lr = config.learning_rate;
        row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        result.log.push_back(row);
        last_good = epoch;

        if (row.val_mae < result.best_val_mae) {
            result.best_val_mae = row.val_mae;
            result.best_epoch = epoch;
            result.params = params.clone();
            since_best = 0;
        } else if (++since_best >= config.early_stop_patience) {
            result.stopped_early = epoch < config.max_epochs;
            break;
        }
    }
    if (result.params.size() == 0) result.params = params.clone();
    return result;
}

void write_train_log(const std::vector<EpochLog>& log, std::ostream& out) {
    out << "epoch,train_loss,val_mae,lr,wall_ms\n";
    out.precision(17);
    for (const auto& r : log) {
        out << r.epoch << ',' << r.train_loss << ',' << r.val_mae << ',' << r.lr << ',' << r.wall_ms << '\n';
    }
}

}  // namespace weca
