#pragma once

#include <vector>

#include "weca/tensor.hpp"

namespace weca {

/// Latents of a batch and its augmented view, plus per-(i,t) similarity
/// weights in [0,1] laid out B x T'. Weights are constants of the graph.
struct BatchLatents {
    Tensor z;        // B x T' x D
    Tensor z_tilde;  // B x T' x D
    std::vector<double> weights;
};

/// Logits above this are refused in raw (unnormalized) mode.
inline constexpr double kMaxRawLogit = 700.0;

/// A[i,t] = exp(z[i,t] . z~[i,t]), laid out B x T'.
std::vector<double> positive_similarity(const BatchLatents& latents, bool normalize_latents = true);

/// N[i,t] = sum_j exp(z[i,t] . z~[j,t]) + sum_{j != i} exp(z[i,t] . z[j,t]).
/// The first sum includes the positive (j = i). Evaluated via log-sum-exp.
std::vector<double> negative_aggregate(const BatchLatents& latents, bool normalize_latents = true);

/// (1 / (B T')) sum_{i,t} -w[i,t] log(A[i,t] / N[i,t]).
Tensor weca_loss(const BatchLatents& latents, bool normalize_latents = true);

/// weca_loss with every weight equal to 1.
Tensor instance_loss(const Tensor& z, const Tensor& z_tilde, bool normalize_latents = true);

/// InfoNCE along time: for each (i,t) the positive is z~[i,t]; negatives are
/// the same instance's other timesteps in both views, positive kept in the
/// denominator. Requires T' >= 2.
Tensor temporal_loss(const Tensor& z, const Tensor& z_tilde, bool normalize_latents = true);

/// (1/B) sum_i (1/H) sum_t ||y_t - y^_t||_1 for (B,H,C) inputs; (H,C) is B = 1.
Tensor forecast_mae(const Tensor& forecast, const Tensor& target);

/// forecast_mae + lambda * weca_loss.
Tensor joint_loss(const Tensor& forecasts, const Tensor& targets, const BatchLatents& latents, double lambda,
                  bool normalize_latents = true);

}  // namespace weca
