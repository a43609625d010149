#include <doctest.h>

#include <cmath>

#include "weca/anomaly.hpp"
#include "weca/error.hpp"

using namespace weca;

namespace {

AnomalyParams fig1_params(double shape = 0.806) {
    AnomalyParams p;
    p.amplitude = 74120.0;
    p.decay = 0.39;
    p.shape = shape;
    return p;
}

std::vector<double> sine(std::size_t n, double phase) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = std::sin(0.9 * static_cast<double>(i) + phase);
    return v;
}

}  // namespace

TEST_CASE("anomaly curve basics") {
    CHECK(anomaly_curve(0.0, fig1_params()) == 0.0);
    CHECK(anomaly_curve(0.0, fig1_params(1.7)) == 0.0);
    const double expected = 74120.0 * std::exp(-0.39) / 90409.0;
    CHECK(std::fabs(anomaly_curve(1.0, fig1_params()) - expected) <= 1e-12);
    CHECK(anomaly_curve(400.0, fig1_params()) < 1e-12);
}

TEST_CASE("grid argmax of the curve matches the closed-form stationary point") {
    const auto p = fig1_params();
    std::size_t best = 0;
    for (std::size_t n = 1; n <= 60; ++n) {
        if (anomaly_curve(static_cast<double>(n), p) > anomaly_curve(static_cast<double>(best), p)) best = n;
    }
    const double stationary = std::pow(1.0 / (p.decay * p.shape), 1.0 / p.shape);
    CHECK(best == static_cast<std::size_t>(std::lround(stationary)));
    CHECK(best == 4);
}

TEST_CASE("curve is unimodal for positive B and C") {
    Rng rng(99);
    std::uniform_real_distribution<double> b(0.05, 1.5), c(0.2, 2.0);
    for (int trial = 0; trial < 200; ++trial) {
        AnomalyParams p = fig1_params();
        p.decay = b(rng);
        p.shape = c(rng);
        int sign_changes = 0;
        double prev_diff = anomaly_curve(1.0, p) - anomaly_curve(0.0, p);
        for (int n = 1; n < 300; ++n) {
            const double diff = anomaly_curve(n + 1.0, p) - anomaly_curve(n, p);
            CHECK(anomaly_curve(n, p) >= 0.0);
            if ((diff < 0) != (prev_diff < 0) && diff != 0.0) ++sign_changes;
            prev_diff = diff;
        }
        CHECK(sign_changes <= 1);
    }
}

TEST_CASE("curve rejects invalid parameters") {
    auto p = fig1_params();
    p.shape = 0.0;
    CHECK_THROWS_AS(anomaly_curve(1.0, p), ConfigError);
    p = fig1_params();
    p.amplitude = std::nan("");
    CHECK_THROWS_AS(anomaly_curve(1.0, p), NumericError);
    CHECK_THROWS_AS(anomaly_curve(-1.0, fig1_params()), ConfigError);
}

TEST_CASE("parameter sampling moments, bounds and determinism") {
    AnomalyConfig cfg;
    Rng rng(2024);
    constexpr int kDraws = 10000;
    double sum_a = 0.0, sum_c = 0.0;
    int spikes = 0;
    for (int i = 0; i < kDraws; ++i) {
        const auto p = sample_params(rng, cfg, 56);
        sum_a += p.amplitude;
        sum_c += p.shape;
        CHECK(p.shape >= 0.1);
        CHECK(p.amplitude >= 1000.0);
        CHECK(p.decay == 0.39);
        CHECK((p.sign == 1 || p.sign == -1));
        CHECK(p.onset >= 42);
        CHECK(p.onset <= 55);
        spikes += p.sign == 1;
    }
    CHECK(std::fabs(sum_a / kDraws - 74120.0) <= 3.0 * 20000.0 / std::sqrt(kDraws));
    CHECK(std::fabs(sum_c / kDraws - 0.806) <= 3.0 * 0.3 / std::sqrt(kDraws));
    CHECK(std::abs(spikes - kDraws / 2) < 300);

    Rng r1(5), r2(5);
    for (int i = 0; i < 50; ++i) {
        const auto a = sample_params(r1, cfg, 56);
        const auto b = sample_params(r2, cfg, 56);
        CHECK(a.amplitude == b.amplitude);
        CHECK(a.shape == b.shape);
        CHECK(a.sign == b.sign);
        CHECK(a.onset == b.onset);
    }
}

TEST_CASE("inject adds the curve to the tail and horizon") {
    const WindowSpec w{16, 6};
    AnomalyConfig cfg;
    cfg.scale = 1.3;
    auto p = fig1_params();
    p.sign = -1;
    const auto input = sine(16, 0.0);
    const auto target = sine(6, 2.0);
    const std::size_t start = 11;
    const auto pair = inject(input, target, w, 1, p, start, cfg);
    for (std::size_t t = 0; t < start; ++t) CHECK(pair.augmented_input[t] == input[t]);
    for (std::size_t t = start; t < 16; ++t) {
        const double expected = -1.3 * anomaly_curve(static_cast<double>(t - start), p);
        CHECK(std::fabs((pair.augmented_input[t] - input[t]) - expected) <= 1e-12);
    }
    // Horizon step 0 continues the curve at n = T - start.
    CHECK(std::fabs((pair.augmented_target[0] - target[0]) - (-1.3 * anomaly_curve(5.0, p))) <= 1e-12);
    for (std::size_t h = 0; h < 6; ++h) {
        const double expected = -1.3 * anomaly_curve(static_cast<double>(16 - start + h), p);
        CHECK(std::fabs((pair.augmented_target[h] - target[h]) - expected) <= 1e-12);
    }
}

TEST_CASE("injecting at the last input step") {
    const WindowSpec w{8, 3};
    const auto input = sine(8, 0.3);
    const auto target = sine(3, 1.0);
    const auto pair = inject(input, target, w, 1, fig1_params(), 7, AnomalyConfig{});
    CHECK(pair.augmented_input == input);  // a(0) = 0 at the onset step
    CHECK(pair.augmented_target[0] > target[0]);
    for (double wt : pair.weights) CHECK(wt == 1.0);
    CHECK_THROWS_AS(inject(input, target, w, 1, fig1_params(), 8, AnomalyConfig{}), DataError);
}

TEST_CASE("inject treats every channel alike") {
    const WindowSpec w{6, 2};
    std::vector<double> input(12, 0.0), target(4, 0.0);
    const auto pair = inject(input, target, w, 2, fig1_params(), 3, AnomalyConfig{});
    for (std::size_t t = 0; t < 6; ++t) CHECK(pair.augmented_input[2 * t] == pair.augmented_input[2 * t + 1]);
    const double d = pair.augmented_input[2 * 5];
    CHECK(pair.weights[5] == doctest::Approx(std::exp(-(2 * d * d) / 2.0)));
}

TEST_CASE("similarity weights") {
    const std::vector<double> x{0, 0, 0, 0};
    CHECK(compute_weights(x, x, 4, 1, 1.0) == std::vector<double>{1, 1, 1, 1});
    const auto w = compute_weights(x, {0, 1, 2, 30}, 4, 1, 1.0);
    CHECK(std::fabs(w[1] - std::exp(-0.5)) <= 1e-12);
    CHECK(w[0] > w[1]);
    CHECK(w[1] > w[2]);
    CHECK(w[2] > w[3]);
    CHECK(w[3] >= 0.0);
    CHECK(w[3] < 1e-100);
    CHECK_THROWS_AS(compute_weights(x, {0, 1}, 4, 1, 1.0), ShapeError);
}

TEST_CASE("weights stay in [0,1] and do not increase with distance") {
    Rng rng(8);
    std::normal_distribution<double> n(0.0, 2.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> a(20), b(20);
        for (auto& v : a) v = n(rng);
        for (auto& v : b) v = n(rng);
        const auto w = compute_weights(a, b, 10, 2, 0.7);
        for (std::size_t t = 0; t < 10; ++t) {
            CHECK(w[t] >= 0.0);
            CHECK(w[t] <= 1.0);
        }
        for (std::size_t s = 0; s < 10; ++s) {
            for (std::size_t t = 0; t < 10; ++t) {
                const double ds = std::hypot(a[2 * s] - b[2 * s], a[2 * s + 1] - b[2 * s + 1]);
                const double dt = std::hypot(a[2 * t] - b[2 * t], a[2 * t + 1] - b[2 * t + 1]);
                if (ds <= dt) CHECK(w[s] >= w[t]);
            }
        }
    }
}

TEST_CASE("batch augmentation is deterministic and leaves the head untouched") {
    WindowBatch batch;
    batch.batch = 20;
    const WindowSpec w{12, 4};
    Rng fill(1);
    std::normal_distribution<double> n;
    batch.inputs.resize(20 * 12);
    batch.targets.resize(20 * 4);
    for (auto& v : batch.inputs) v = n(fill);
    for (auto& v : batch.targets) v = n(fill);

    Rng r1(77), r2(77);
    const auto a = augment_batch(batch, w, 1, AnomalyConfig{}, 0.5, r1);
    const auto b = augment_batch(batch, w, 1, AnomalyConfig{}, 0.5, r2);
    CHECK(a.inputs == b.inputs);
    CHECK(a.targets == b.targets);
    CHECK(a.weights == b.weights);

    std::size_t hits = 0;
    for (std::size_t i = 0; i < 20; ++i) {
        const std::size_t start = a.injection_start[i];
        for (std::size_t t = 0; t < std::min<std::size_t>(start, 12); ++t) {
            CHECK(a.inputs[i * 12 + t] == batch.inputs[i * 12 + t]);
            CHECK(a.weights[i * 12 + t] == 1.0);
        }
        if (!a.augmented[i]) {
            CHECK(start == 12);
            for (std::size_t h = 0; h < 4; ++h) CHECK(a.targets[i * 4 + h] == batch.targets[i * 4 + h]);
        }
        hits += a.augmented[i];
    }
    CHECK(hits > 0);
    CHECK(hits < 20);

    Rng r3(77);
    const auto none = augment_batch(batch, w, 1, AnomalyConfig{}, 0.0, r3);
    CHECK(none.inputs == batch.inputs);
    CHECK(none.targets == batch.targets);
}
