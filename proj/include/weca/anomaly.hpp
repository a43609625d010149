#pragma once

#include <cstddef>
#include <vector>

#include "weca/datagen.hpp"
#include "weca/rng.hpp"

namespace weca {

/// Denominator of the event-fitted anomaly curve.
inline constexpr double kAnomalyNormalizer = 90409.0;

struct AnomalyParams {
    double amplitude = 74120.0;  // A
    double decay = 0.39;         // B
    double shape = 0.806;        // C
    int sign = 1;                // +1 spike, -1 dropout
    /// Input-window index at which the curve starts (n = 0).
    std::size_t onset = 0;
};

struct AnomalyConfig {
    double amplitude_mean = 74120.0;
    double amplitude_std = 20000.0;
    double amplitude_min = 1000.0;
    double decay = 0.39;
    double shape_mean = 0.806;
    double shape_std = 0.3;
    double shape_min = 0.1;
    /// Multiplier applied to the curve in normalized units.
    double scale = 1.0;
    /// Gaussian-kernel width for similarity weights, normalized units.
    double weight_sigma = 1.0;
    /// Onsets are drawn uniformly from the last ceil(T * tail_fraction) input steps.
    double tail_fraction = 0.25;
};

/// A * n * exp(-B n^C) / 90409. Throws NumericError for non-finite
/// parameters and ConfigError for n < 0, B <= 0 or C <= 0.
double anomaly_curve(double n, const AnomalyParams& params);

/// A ~ N(mean, std) truncated to [amplitude_min, 2 mean - amplitude_min], C
/// likewise with shape_min, B fixed, sign uniform on {+1, -1}, onset uniform
/// on the input tail.
AnomalyParams sample_params(Rng& rng, const AnomalyConfig& config, std::size_t input_length);

/// First index of the input tail that onsets are drawn from.
std::size_t tail_start(std::size_t input_length, double tail_fraction);

struct AugmentedPair {
    std::vector<double> input;  // T x C
    std::vector<double> target;  // H x C
    std::vector<double> augmented_input;
    std::vector<double> augmented_target;
    std::vector<double> weights;  // T
    AnomalyParams params;
    std::size_t injection_start = 0;
};

/// Adds sign * scale * a(t - start) to every channel of input steps t >= start
/// and a(T - start + h) to horizon step h.
AugmentedPair inject(const std::vector<double>& input, const std::vector<double>& target, const WindowSpec& window,
                     std::size_t channels, const AnomalyParams& params, std::size_t injection_start,
                     const AnomalyConfig& config);

/// w_t = exp(-d_t^2 / (2 sigma^2)), d_t the channel-wise Euclidean distance
/// between original and augmented input at step t.
std::vector<double> compute_weights(const std::vector<double>& original, const std::vector<double>& augmented,
                                    std::size_t steps, std::size_t channels, double sigma);

/// A batch where a random subset of windows carries an injected anomaly.
struct AugmentedBatch {
    std::vector<double> inputs;   // B x T x C
    std::vector<double> targets;  // B x H x C
    std::vector<double> weights;  // B x T, 1 for untouched windows
    std::vector<bool> augmented;
    std::vector<std::size_t> injection_start;  // T for untouched windows
    std::vector<AnomalyParams> params;
};

/// Each window is augmented with probability `p_aug`. Parameters are drawn
/// for every window, hit or not, so later windows' draws do not depend on
/// earlier coin outcomes.
AugmentedBatch augment_batch(const WindowBatch& batch, const WindowSpec& window, std::size_t channels,
                             const AnomalyConfig& config, double p_aug, Rng& rng);

}  // namespace weca
