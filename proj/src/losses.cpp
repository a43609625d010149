#include "weca/losses.hpp"

#include <cmath>
#include <string>

#include "weca/error.hpp"
#include "weca/ops.hpp"

namespace weca {

namespace {

void check_latents(const Tensor& z, const Tensor& z_tilde, const char* op) {
    if (z.rank() != 3 || z.shape() != z_tilde.shape()) {
        throw ShapeError(std::string(op) + ": expected matching (B,T',D) latents, got " + shape_str(z.shape()) +
                         " and " + shape_str(z_tilde.shape()));
    }
    if (z.dim(0) < 1 || z.dim(1) < 1) throw ShapeError(std::string(op) + ": empty batch or time axis");
}

void check_raw_logits(const Tensor& logits, const char* op) {
    for (double v : logits.data()) {
        if (v > kMaxRawLogit) {
            throw NumericError(std::string(op) + ": similarity logit " + std::to_string(v) +
                               " would overflow exp(); enable normalize_latents");
        }
    }
}

struct ContrastTerms {
    Tensor neg_log_ratio;  // -log(A/N), laid out along the contrast groups
    Tensor logits;         // concat of cross and off-diagonal self similarities
    Tensor positives;
};

// Groups are the leading axis of the (G,M,D) inputs; every row m in a group
// contrasts against all rows of the other view and the other rows of its own view.
ContrastTerms contrast(const Tensor& anchors, const Tensor& others, const char* op, bool normalized) {
    const Tensor cross = ops::batched_gram(anchors, others);
    const Tensor self = ops::batched_gram(anchors, anchors);
    ContrastTerms terms;
    terms.logits = ops::concat_last(cross, ops::off_diagonal(self));
    if (!normalized) check_raw_logits(terms.logits, op);
    terms.positives = ops::diagonal(cross);
    terms.neg_log_ratio = ops::sub(ops::logsumexp_rows(terms.logits), terms.positives);
    return terms;
}

ContrastTerms instance_terms(const BatchLatents& latents, bool normalize, const char* op) {
    check_latents(latents.z, latents.z_tilde, op);
    Tensor z = normalize ? ops::l2_normalize_rows(latents.z) : latents.z;
    Tensor zt = normalize ? ops::l2_normalize_rows(latents.z_tilde) : latents.z_tilde;
    // (B,T',D) -> (T',B,D): contrast across the batch at each timestep.
    return contrast(ops::swap_axes01(z), ops::swap_axes01(zt), op, normalize);
}

// (T',B) values back to B x T' order.
std::vector<double> to_batch_major(const Tensor& t_major) {
    const std::size_t steps = t_major.dim(0), batch = t_major.dim(1);
    std::vector<double> out(batch * steps);
    for (std::size_t t = 0; t < steps; ++t)
        for (std::size_t i = 0; i < batch; ++i) out[i * steps + t] = t_major.at(t * batch + i);
    return out;
}

std::vector<double> exp_checked(const std::vector<double>& logs, const char* op) {
    std::vector<double> out(logs.size());
    for (std::size_t k = 0; k < logs.size(); ++k) {
        if (logs[k] > kMaxRawLogit) {
            throw NumericError(std::string(op) + ": exp(" + std::to_string(logs[k]) +
                               ") overflows; enable normalize_latents");
        }
        out[k] = std::exp(logs[k]);
    }
    return out;
}

}  // namespace

std::vector<double> positive_similarity(const BatchLatents& latents, bool normalize_latents) {
    const auto terms = instance_terms(latents, normalize_latents, "positive_similarity");
    return exp_checked(to_batch_major(terms.positives), "positive_similarity");
}

std::vector<double> negative_aggregate(const BatchLatents& latents, bool normalize_latents) {
    const auto terms = instance_terms(latents, normalize_latents, "negative_aggregate");
    return exp_checked(to_batch_major(ops::logsumexp_rows(terms.logits)), "negative_aggregate");
}

Tensor weca_loss(const BatchLatents& latents, bool normalize_latents) {
    const auto terms = instance_terms(latents, normalize_latents, "weca_loss");
    const std::size_t batch = latents.z.dim(0), steps = latents.z.dim(1);
    if (latents.weights.size() != batch * steps) {
        throw ShapeError("weca_loss: expected " + std::to_string(batch) + "x" + std::to_string(steps) +
                         " weights, got " + std::to_string(latents.weights.size()));
    }
    std::vector<double> w(batch * steps);
    for (std::size_t i = 0; i < batch; ++i) {
        for (std::size_t t = 0; t < steps; ++t) {
            const double v = latents.weights[i * steps + t];
            if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("weca_loss: weights must lie in [0,1]");
            w[t * batch + i] = v;
        }
    }
    const Tensor weighted = ops::mul(terms.neg_log_ratio, Tensor::constant({steps, batch}, std::move(w)));
    return ops::scale(ops::sum(weighted), 1.0 / static_cast<double>(batch * steps));
}

Tensor instance_loss(const Tensor& z, const Tensor& z_tilde, bool normalize_latents) {
    check_latents(z, z_tilde, "instance_loss");
    BatchLatents latents{z, z_tilde, std::vector<double>(z.dim(0) * z.dim(1), 1.0)};
    return weca_loss(latents, normalize_latents);
}

Tensor temporal_loss(const Tensor& z, const Tensor& z_tilde, bool normalize_latents) {
    check_latents(z, z_tilde, "temporal_loss");
    if (z.dim(1) < 2) throw ShapeError("temporal_loss: needs T' >= 2 for temporal negatives");
    Tensor zn = normalize_latents ? ops::l2_normalize_rows(z) : z;
    Tensor ztn = normalize_latents ? ops::l2_normalize_rows(z_tilde) : z_tilde;
    // Groups are instances; rows are timesteps.
    const auto terms = contrast(zn, ztn, "temporal_loss", normalize_latents);
    return ops::mean(terms.neg_log_ratio);
}

Tensor forecast_mae(const Tensor& forecast, const Tensor& target) {
    if (forecast.shape() != target.shape() || (forecast.rank() != 2 && forecast.rank() != 3)) {
        throw ShapeError("forecast_mae: shape mismatch " + shape_str(forecast.shape()) + " vs " +
                         shape_str(target.shape()));
    }
    const std::size_t batch = forecast.rank() == 3 ? forecast.dim(0) : 1;
    const std::size_t horizon = forecast.dim(forecast.rank() - 2);
    return ops::scale(ops::sum(ops::abs(ops::sub(target, forecast))),
                      1.0 / static_cast<double>(batch * horizon));
}

Tensor joint_loss(const Tensor& forecasts, const Tensor& targets, const BatchLatents& latents, double lambda,
                  bool normalize_latents) {
    if (!(lambda >= 0.0)) throw ConfigError("joint_loss: lambda must be >= 0");
    return ops::add(forecast_mae(forecasts, targets), ops::scale(weca_loss(latents, normalize_latents), lambda));
}

}  // namespace weca
