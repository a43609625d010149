#include <doctest.h>

#include <cmath>
#include <random>

#include "gradcheck.hpp"
#include "weca/error.hpp"
#include "weca/ops.hpp"

using namespace weca;
using weca::testing::gradcheck;
using weca::testing::random_param;

TEST_CASE("dot_rows of identity rows") {
    auto a = Tensor::constant({2, 2}, {1, 0, 0, 1});
    auto out = ops::dot_rows(a, a);
    CHECK(out.shape() == Shape{2});
    CHECK(out.at(0) == 1.0);
    CHECK(out.at(1) == 1.0);
}

TEST_CASE("logsumexp of two equal logits is ln 2") {
    auto out = ops::logsumexp_rows(Tensor::constant({1, 2}, {0, 0}));
    CHECK(out.at(0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("logsumexp matches the naive form and stays finite for large rows") {
    std::mt19937_64 rng(3);
    auto x = weca::testing::uniform_values(40, rng, -5.0, 5.0);
    auto out = ops::logsumexp_rows(Tensor::constant({8, 5}, x));
    for (std::size_t r = 0; r < 8; ++r) {
        double acc = 0.0;
        for (std::size_t d = 0; d < 5; ++d) acc += std::exp(x[r * 5 + d]);
        CHECK(std::fabs(out.at(r) - std::log(acc)) <= 1e-12);
    }
    auto big = ops::logsumexp_rows(Tensor::constant({1, 3}, {700, 699, 650}));
    CHECK(std::isfinite(big.at(0)));
    CHECK(big.at(0) == doctest::Approx(700 + std::log(1 + std::exp(-1.0) + std::exp(-50.0))));
}

TEST_CASE("causal conv output[t] depends only on input[<= t]") {
    std::mt19937_64 rng(11);
    auto kernel = random_param({2, 1, 3}, rng);
    std::vector<double> signal(8);
    for (std::size_t i = 0; i < 8; ++i) signal[i] = std::sin(0.7 * static_cast<double>(i)) + 0.1;
    auto base = ops::causal_dilated_conv1d(Tensor::constant({8, 1}, signal), kernel, 2);
    CHECK(base.shape() == Shape{8, 3});
    for (std::size_t t0 = 0; t0 < 8; ++t0) {
        auto changed = signal;
        for (std::size_t t = t0; t < 8; ++t) changed[t] += 5.0;
        auto out = ops::causal_dilated_conv1d(Tensor::constant({8, 1}, changed), kernel, 2);
        for (std::size_t t = 0; t < t0; ++t) {
            for (std::size_t c = 0; c < 3; ++c) CHECK(out.at(t * 3 + c) == base.at(t * 3 + c));
        }
    }
}

TEST_CASE("causal conv taps read the dilated past") {
    // kernel taps (K=2): k=0 reads x[t-2], k=1 reads x[t].
    auto x = Tensor::constant({1, 4, 1}, {1, 2, 3, 4});
    auto kernel = Tensor::constant({2, 1, 1}, {10, 1});
    auto out = ops::causal_dilated_conv1d(x, kernel, 2);
    CHECK(out.at(0) == 1.0);
    CHECK(out.at(1) == 2.0);
    CHECK(out.at(2) == 3.0 + 10.0);
    CHECK(out.at(3) == 4.0 + 20.0);
}

TEST_CASE("shape mismatches name both shapes") {
    auto a = Tensor::zeros({2, 3});
    auto b = Tensor::zeros({3, 2});
    try {
        (void)ops::add(a, b);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        const std::string what = e.what();
        CHECK(what.find("[2,3]") != std::string::npos);
        CHECK(what.find("[3,2]") != std::string::npos);
    }
    CHECK_THROWS_AS(ops::matmul(a, a), ShapeError);
    CHECK_THROWS_AS(ops::causal_dilated_conv1d(Tensor::zeros({4, 1}), Tensor::zeros({2, 1, 1}), 0), ShapeError);
}

TEST_CASE("non-finite forward values are errors") {
    CHECK_THROWS_AS(ops::exp(Tensor::constant({1}, {800.0})), NumericError);
    CHECK_THROWS_AS(ops::log(Tensor::constant({1}, {0.0})), NumericError);
}

TEST_CASE("backward of sum is all ones") {
    auto x = Tensor::parameter({2, 3}, {1, 2, 3, 4, 5, 6});
    Tape tape;
    {
        Recording rec(tape);
        auto loss = ops::sum(x);
        tape.backward(loss);
    }
    for (double g : x.grad()) CHECK(g == 1.0);
}

TEST_CASE("backward of dot(x, x) is 2x") {
    auto x = Tensor::parameter({1, 2}, {1, 2});
    Tape tape;
    Recording rec(tape);
    auto loss = ops::sum(ops::dot_rows(x, x));
    tape.backward(loss);
    CHECK(x.grad()[0] == 2.0);
    CHECK(x.grad()[1] == 4.0);
}

TEST_CASE("fan-out gradients accumulate") {
    auto x = Tensor::parameter({3}, {1, -2, 0.5});
    Tape tape;
    Recording rec(tape);
    auto loss = ops::sum(ops::add(ops::mul(x, x), x));
    tape.backward(loss);
    CHECK(x.grad()[0] == 3.0);
    CHECK(x.grad()[1] == -3.0);
    CHECK(x.grad()[2] == 2.0);
}

TEST_CASE("backward contract errors") {
    auto x = Tensor::parameter({2}, {1, 2});
    Tape tape;
    Recording rec(tape);
    auto y = ops::mul(x, x);
    CHECK_THROWS_AS(tape.backward(y), ShapeError);
    auto loss = ops::sum(y);
    tape.backward(loss);
    CHECK_THROWS(tape.backward(loss));
    tape.reset();
    auto loss2 = ops::sum(ops::mul(x, x));
    x.zero_grad();
    CHECK_NOTHROW(tape.backward(loss2));

    Tape other;
    CHECK_THROWS(other.backward(loss2));
}

TEST_CASE("no recording without an active tape") {
    auto x = Tensor::parameter({2}, {1, 2});
    auto y = ops::sum(x);
    CHECK_FALSE(y.requires_grad());
}

TEST_CASE("forward evaluation is deterministic") {
    std::mt19937_64 rng(5);
    auto x = random_param({2, 6, 3}, rng);
    auto k = random_param({3, 3, 4}, rng);
    auto a = ops::causal_dilated_conv1d(x, k, 2);
    auto b = ops::causal_dilated_conv1d(x, k, 2);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.at(i) == b.at(i));
}

TEST_CASE("every op matches central finite differences") {
    std::mt19937_64 rng(42);
    constexpr double kTol = 1e-5;
    for (int trial = 0; trial < 5; ++trial) {
        auto a = random_param({3, 4}, rng);
        auto b = random_param({3, 4}, rng);
        auto m = random_param({4, 2}, rng);
        auto bias = random_param({4}, rng);
        auto pos = random_param({3, 4}, rng, 0.5, 2.0);
        auto seq = random_param({2, 5, 3}, rng);
        auto seq2 = random_param({2, 5, 3}, rng);
        auto ker = random_param({3, 3, 2}, rng);
        auto kb = random_param({2}, rng);
        auto sq = random_param({2, 3, 3}, rng);

        // A fixed random projection makes every output element matter.
        auto weights_for = [&rng](const Shape& s) {
            return Tensor::constant(s, weca::testing::uniform_values(shape_size(s), rng, -1, 1));
        };
        auto w34 = weights_for({3, 4});
        auto w3 = weights_for({3});
        auto w32 = weights_for({3, 2});
        auto w252 = weights_for({2, 5, 2});
        auto w52 = weights_for({5, 2, 3});
        auto w23 = weights_for({2, 3});
        auto w232 = weights_for({2, 3, 2});
        auto w26 = weights_for({2, 6});
        auto w35 = weights_for({3, 5});
        auto w255 = weights_for({2, 5, 5});
        auto w253 = weights_for({2, 5, 3});
        auto proj = [](const Tensor& t, const Tensor& w) { return ops::sum(ops::mul(t, w)); };

        CHECK(gradcheck([&] { return proj(ops::add(a, b), w34); }, {a, b}).max_rel_error < kTol);
        CHECK(gradcheck([&] { return proj(ops::sub(a, b), w34); }, {a, b}).max_rel_error < kTol);
        CHECK(gradcheck([&] { return proj(ops::mul(a, b), w34); }, {a, b}).max_rel_error < kTol);
        CHECK(gradcheck([&] { return proj(ops::scale(a, -1.7), w34); }, {a}).max_rel_error < kTol);
        CHECK(gradcheck([&] { return proj(ops::relu(a), w34); }, {a}).max_rel_error < kTol);
        CHECK(gradcheck([&] { return proj(ops::exp(a), w34); }, {a}).max_rel_error < kTol);
        CHECK(gradcheck([&] { return proj(ops::log(pos), w34); }, {pos}).max_rel_error < kTol);
        CHECK(gradcheck([&] { return proj(ops::abs(a), w34); }, {a}).max_rel_error < kTol);
        CHECK(gradcheck([&] { return ops::mean(ops::mul(a, a)); }, {a}).max_rel_error < kTol);
        CHECK(gradcheck([&] { return proj(ops::matmul(a, m), w32); }, {a, m}).max_rel_error < kTol);
        CHECK(gradcheck([&] { return proj(ops::add_bias(a, bias), w34); }, {a, bias}).max_rel_error < kTol);
        CHECK(gradcheck([&] { return proj(ops::causal_dilated_conv1d(seq, ker, 2, kb), w252); },
                        {seq, ker, kb}).max_rel_error < kTol);
        CHECK(gradcheck([&] { return proj(ops::dot_rows(a, b), w3); }, {a, b}).max_rel_error < kTol);
        CHECK(gradcheck([&] { return proj(ops::l2_normalize_rows(a), w34); }, {a}).max_rel_error < kTol);
        CHECK(gradcheck([&] { return proj(ops::logsumexp_rows(a), w3); }, {a}).max_rel_error < kTol);
        CHECK(gradcheck([&] { return proj(ops::swap_axes01(seq), w52); }, {seq}).max_rel_error < kTol);
        CHECK(gradcheck([&] { return proj(ops::batched_gram(seq, seq2), w255); }, {seq, seq2}).max_rel_error < kTol);
        CHECK(gradcheck([&] { return proj(ops::diagonal(sq), w23); }, {sq}).max_rel_error < kTol);
        CHECK(gradcheck([&] { return proj(ops::off_diagonal(sq), w232); }, {sq}).max_rel_error < kTol);
        CHECK(gradcheck([&] { return proj(ops::concat_last(ops::select_time(seq, 4), ops::mean_time(seq2)), w26); },
                        {seq, seq2}).max_rel_error < kTol);
        CHECK(gradcheck([&] { return proj(ops::reshape(seq, {2, 5, 3}), w253); }, {seq}).max_rel_error < kTol);
        CHECK(gradcheck([&] { return proj(ops::reshape(ops::mean_time(ops::swap_axes01(seq)), {3, 5}), w35); },
                        {seq}).max_rel_error < kTol);
    }
}

TEST_CASE("random five-op composite graph matches finite differences") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        auto x = random_param({4, 3}, rng);
        auto w = random_param({3, 3}, rng);
        auto v = random_param({4, 3}, rng);
        auto loss_fn = [&] {
            auto h = ops::relu(ops::matmul(x, w));
            auto n = ops::l2_normalize_rows(ops::add(h, v));
            return ops::mean(ops::logsumexp_rows(ops::mul(n, x)));
        };
        CHECK(gradcheck(loss_fn, {x, w, v}).max_rel_error < 1e-5);
    }
}
