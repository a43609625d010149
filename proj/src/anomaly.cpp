#include "weca/anomaly.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "weca/error.hpp"

namespace weca {

namespace {

// Rejection-sampled normal on [lower, 2 mean - lower]. The window is
// symmetric about the mean, so truncation does not shift it.
double truncated_normal(Rng& rng, double mean, double sd, double lower) {
    std::normal_distribution<double> dist(mean, sd);
    const double upper = 2.0 * mean - lower;
    for (;;) {
        const double v = dist(rng);
        if (v >= lower && v <= upper) return v;
    }
}

}  // namespace

double anomaly_curve(double n, const AnomalyParams& params) {
    if (!std::isfinite(n) || !std::isfinite(params.amplitude) || !std::isfinite(params.decay) ||
        !std::isfinite(params.shape)) {
        throw NumericError("anomaly_curve: non-finite parameters");
    }
    if (n < 0.0) throw ConfigError("anomaly_curve: day index must be >= 0");
    if (params.decay <= 0.0 || params.shape <= 0.0) {
        throw ConfigError("anomaly_curve: decay B and shape C must be positive");
    }
    if (n == 0.0) return 0.0;
    return params.amplitude * n * std::exp(-params.decay * std::pow(n, params.shape)) / kAnomalyNormalizer;
}

std::size_t tail_start(std::size_t input_length, double tail_fraction) {
    const auto tail = static_cast<std::size_t>(std::ceil(static_cast<double>(input_length) * tail_fraction));
    const std::size_t width = std::clamp<std::size_t>(tail, 1, input_length);
    return input_length - width;
}

AnomalyParams sample_params(Rng& rng, const AnomalyConfig& config, std::size_t input_length) {
    if (input_length < 1) throw ConfigError("sample_params: input length must be >= 1");
    AnomalyParams p;
    p.amplitude = truncated_normal(rng, config.amplitude_mean, config.amplitude_std, config.amplitude_min);
    p.shape = truncated_normal(rng, config.shape_mean, config.shape_std, config.shape_min);
    p.decay = config.decay;
    p.sign = std::bernoulli_distribution(0.5)(rng) ? 1 : -1;
    std::uniform_int_distribution<std::size_t> onset(tail_start(input_length, config.tail_fraction),
                                                     input_length - 1);
    p.onset = onset(rng);
    return p;
}

AugmentedPair inject(const std::vector<double>& input, const std::vector<double>& target, const WindowSpec& window,
                     std::size_t channels, const AnomalyParams& params, std::size_t injection_start,
                     const AnomalyConfig& config) {
    const std::size_t steps = window.input;
    if (injection_start >= steps) {
        throw DataError("inject: injection_start " + std::to_string(injection_start) + " outside [0, " +
                        std::to_string(steps) + ")");
    }
    if (input.size() != steps * channels || target.size() != window.horizon * channels) {
        throw ShapeError("inject: window buffers do not match T x C / H x C");
    }
    AugmentedPair pair;
    pair.input = input;
    pair.target = target;
    pair.augmented_input = input;
    pair.augmented_target = target;
    pair.params = params;
    pair.injection_start = injection_start;

    const double gain = static_cast<double>(params.sign) * config.scale;
    for (std::size_t t = injection_start; t < steps; ++t) {
        const double delta = gain * anomaly_curve(static_cast<double>(t - injection_start), params);
        for (std::size_t c = 0; c < channels; ++c) pair.augmented_input[t * channels + c] += delta;
    }
    for (std::size_t h = 0; h < window.horizon; ++h) {
        const double delta = gain * anomaly_curve(static_cast<double>(steps - injection_start + h), params);
        for (std::size_t c = 0; c < channels; ++c) pair.augmented_target[h * channels + c] += delta;
    }
    pair.weights = compute_weights(pair.input, pair.augmented_input, steps, channels, config.weight_sigma);
    return pair;
}

std::vector<double> compute_weights(const std::vector<double>& original, const std::vector<double>& augmented,
                                    std::size_t steps, std::size_t channels, double sigma) {
    if (original.size() != steps * channels || augmented.size() != original.size()) {
        throw ShapeError("compute_weights: expected two " + std::to_string(steps) + "x" +
                         std::to_string(channels) + " inputs, got sizes " + std::to_string(original.size()) +
                         " and " + std::to_string(augmented.size()));
    }
    if (!(sigma > 0.0)) throw ConfigError("compute_weights: sigma must be positive");
    std::vector<double> weights(steps);
    for (std::size_t t = 0; t < steps; ++t) {
        double sq = 0.0;
        for (std::size_t c = 0; c < channels; ++c) {
            const double d = original[t * channels + c] - augmented[t * channels + c];
            sq += d * d;
        }
        weights[t] = std::exp(-sq / (2.0 * sigma * sigma));
    }
    return weights;
}

AugmentedBatch augment_batch(const WindowBatch& batch, const WindowSpec& window, std::size_t channels,
                             const AnomalyConfig& config, double p_aug, Rng& rng) {
    const std::size_t in_len = window.input * channels;
    const std::size_t out_len = window.horizon * channels;
    AugmentedBatch out;
    out.inputs = batch.inputs;
    out.targets = batch.targets;
    out.weights.assign(batch.batch * window.input, 1.0);
    out.augmented.assign(batch.batch, false);
    out.injection_start.assign(batch.batch, window.input);
    out.params.resize(batch.batch);

    std::bernoulli_distribution coin(std::clamp(p_aug, 0.0, 1.0));
    for (std::size_t i = 0; i < batch.batch; ++i) {
        const bool hit = coin(rng);
        const AnomalyParams params = sample_params(rng, config, window.input);
        out.params[i] = params;
        if (!hit) continue;
        const auto in_begin = batch.inputs.begin() + static_cast<std::ptrdiff_t>(i * in_len);
        const auto out_begin = batch.targets.begin() + static_cast<std::ptrdiff_t>(i * out_len);
        const auto pair = inject(std::vector<double>(in_begin, in_begin + static_cast<std::ptrdiff_t>(in_len)),
                                 std::vector<double>(out_begin, out_begin + static_cast<std::ptrdiff_t>(out_len)),
                                 window, channels, params, params.onset, config);
        std::copy(pair.augmented_input.begin(), pair.augmented_input.end(),
                  out.inputs.begin() + static_cast<std::ptrdiff_t>(i * in_len));
        std::copy(pair.augmented_target.begin(), pair.augmented_target.end(),
                  out.targets.begin() + static_cast<std::ptrdiff_t>(i * out_len));
        std::copy(pair.weights.begin(), pair.weights.end(),
                  out.weights.begin() + static_cast<std::ptrdiff_t>(i * window.input));
        out.augmented[i] = true;
        out.injection_start[i] = params.onset;
    }
    return out;
}

}  // namespace weca
