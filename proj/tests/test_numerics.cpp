#include "doctest.h"

#include <cmath>

#include "slr/gradcheck.hpp"
#include "slr/optim.hpp"
#include "slr/rng.hpp"
#include "slr/tensor.hpp"

using namespace slr;

namespace {

// independent triple-loop oracle
Tensor2 matmul_oracle(const Tensor2& a, const Tensor2& b) {
    Tensor2 y(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < b.cols; ++j)
            for (std::size_t k = 0; k < a.cols; ++k)
                y.at(i, j) += a.at(i, k) * b.at(k, j);
    return y;
}

Tensor2 random_tensor(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
    Tensor2 t(r, c);
    for (double& v : t.data) v = rng.normal(0, scale);
    return t;
}

}  // namespace

TEST_CASE("affine_forward identity and zero-weight cases") {
    Tensor2 x{{1, 2}};
    Tensor2 id{{1, 0}, {0, 1}};
    Tensor2 b0 = Tensor2::row({0, 0});
    Tensor2 y = affine_forward(x, id, b0);
    CHECK(y.at(0, 0) == doctest::Approx(1));
    CHECK(y.at(0, 1) == doctest::Approx(2));

    Tensor2 zw{{0, 0}, {0, 0}};
    Tensor2 b = Tensor2::row({3, 4});
    Tensor2 y2 = affine_forward(x, zw, b);
    CHECK(y2.at(0, 0) == doctest::Approx(3));
    CHECK(y2.at(0, 1) == doctest::Approx(4));
}

TEST_CASE("affine_forward matches triple-loop oracle") {
    Rng rng(42);
    Tensor2 x = random_tensor(3, 4, rng);
    Tensor2 w = random_tensor(4, 2, rng);
    Tensor2 b = random_tensor(1, 2, rng);
    Tensor2 y = affine_forward(x, w, b);
    Tensor2 ref = matmul_oracle(x, w);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 2; ++j)
            CHECK(y.at(i, j) == doctest::Approx(ref.at(i, j) + b.at(0, j)).epsilon(1e-12));
}

TEST_CASE("affine shape mismatch names both shapes") {
    Tensor2 x(2, 3), w(4, 2), b(1, 2);
    CHECK_THROWS_WITH_AS(affine_forward(x, w, b),
                         doctest::Contains("2x3"), std::invalid_argument);
}

TEST_CASE("l2_normalize basic cases") {
    Tensor2 v = Tensor2::row({3, 4});
    Tensor2 n = l2_normalize(v);
    CHECK(n.at(0, 0) == doctest::Approx(0.6));
    CHECK(n.at(0, 1) == doctest::Approx(0.8));

    Tensor2 u = Tensor2::row({1, 0, 0});
    Tensor2 nu = l2_normalize(u);
    CHECK(nu.at(0, 0) == doctest::Approx(1));
    CHECK(nu.at(0, 1) == doctest::Approx(0));

    bool degen = false;
    Tensor2 z = l2_normalize(Tensor2::row({0, 0, 0}), &degen);
    CHECK(degen);
    CHECK(z.frobenius_norm() == 0);
}

TEST_CASE("l2_normalize random vector: unit norm, parallel to input") {
    Rng rng(7);
    Tensor2 v = random_tensor(1, 8, rng);
    Tensor2 n = l2_normalize(v);
    CHECK(n.frobenius_norm() == doctest::Approx(1.0).epsilon(1e-9));
    // parallel: n * |v| == v
    double nv = v.frobenius_norm();
    for (std::size_t j = 0; j < 8; ++j)
        CHECK(n.data[j] * nv == doctest::Approx(v.data[j]).epsilon(1e-12));
}

TEST_CASE("softmax symmetry, stability, and formula oracle") {
    Tensor2 s = softmax(Tensor2::row({0, 0}));
    CHECK(s.at(0, 0) == doctest::Approx(0.5));

    Tensor2 big = softmax(Tensor2::row({1000, 1000, 1000}));
    for (double v : big.data) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(big.all_finite());

    Tensor2 y = softmax(Tensor2::row({1, 2, 3}));
    double z = std::exp(1) + std::exp(2) + std::exp(3);
    CHECK(y.at(0, 0) == doctest::Approx(std::exp(1) / z).epsilon(1e-12));
    CHECK(y.at(0, 1) == doctest::Approx(std::exp(2) / z).epsilon(1e-12));
    CHECK(y.at(0, 2) == doctest::Approx(std::exp(3) / z).epsilon(1e-12));
}

TEST_CASE("softmax properties: sums to 1, shift invariant") {
    Rng rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        Tensor2 v = random_tensor(1, 6, rng, 3.0);
        Tensor2 y = softmax(v);
        double sum = 0;
        for (double x : y.data) sum += x;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
        Tensor2 shifted = v;
        double c = rng.uniform(-50, 50);
        for (double& x : shifted.data) x += c;
        Tensor2 y2 = softmax(shifted);
        for (std::size_t j = 0; j < y.data.size(); ++j)
            CHECK(y2.data[j] == doctest::Approx(y.data[j]).epsilon(1e-9));
    }
}

TEST_CASE("sgd without momentum shrinks quadratic by factor 0.8") {
    // f(x) = x^2, grad = 2x, lr = 0.1 -> x' = x - 0.2x = 0.8x
    ParamGrad x("x", Tensor2::row({5.0}));
    OptimizerConfig cfg;
    cfg.kind = OptimizerKind::sgd_momentum;
    cfg.learning_rate = 0.1;
    cfg.momentum = 0;
    cfg.weight_decay = 0;
    Optimizer opt(cfg);
    double expected = 5.0;
    for (int i = 0; i < 5; ++i) {
        x.zero_grad();
        x.grad.data[0] = 2.0 * x.value.data[0];
        opt.step({&x});
        expected *= 0.8;
        CHECK(x.value.data[0] == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("weight decay only: sgd lr=1 scales parameter by 0.9") {
    ParamGrad x("x", Tensor2::row({2.0}));
    OptimizerConfig cfg;
    cfg.kind = OptimizerKind::sgd_momentum;
    cfg.learning_rate = 1.0;
    cfg.momentum = 0;
    cfg.weight_decay = 0.1;
    Optimizer opt(cfg);
    x.zero_grad();
    opt.step({&x});
    CHECK(x.value.data[0] == doctest::Approx(1.8).epsilon(1e-12));  // 2 * 0.9
}

TEST_CASE("radam converges on 1-D quadratic from x=5") {
    ParamGrad x("x", Tensor2::row({5.0}));
    OptimizerConfig cfg;  // radam defaults
    cfg.weight_decay = 0;
    cfg.learning_rate = 0.1;
    Optimizer opt(cfg);
    double prev_loss = 25.0;
    int non_monotone = 0;
    for (int i = 0; i < 500; ++i) {
        x.zero_grad();
        x.grad.data[0] = 2.0 * x.value.data[0];
        opt.step({&x});
        double loss = x.value.data[0] * x.value.data[0];
        if (i > 50 && loss > 1e-4 && loss > prev_loss + 1e-12) ++non_monotone;
        prev_loss = loss;
    }
    CHECK(std::abs(x.value.data[0]) < 1e-2);
    CHECK(non_monotone == 0);  // monotone after warmup
}

TEST_CASE("optimizer with lr=0 is the identity") {
    Rng rng(3);
    for (OptimizerKind kind : {OptimizerKind::sgd_momentum, OptimizerKind::radam}) {
        ParamGrad p("p", random_tensor(3, 3, rng));
        Tensor2 before = p.value;
        OptimizerConfig cfg;
        cfg.kind = kind;
        cfg.learning_rate = 0;
        cfg.weight_decay = 0;
        Optimizer opt(cfg);
        p.zero_grad();
        for (double& g : p.grad.data) g = rng.normal(0, 1);
        opt.step({&p});
        for (std::size_t i = 0; i < before.data.size(); ++i)
            CHECK(p.value.data[i] == before.data[i]);
    }
}

TEST_CASE("optimizer rejects non-finite gradients naming the parameter") {
    ParamGrad p("bad_param", Tensor2::row({1.0}));
    p.grad.data[0] = std::nan("");
    Optimizer opt(OptimizerConfig{});
    CHECK_THROWS_WITH_AS(opt.step({&p}), doctest::Contains("bad_param"), std::runtime_error);
}

TEST_CASE("finite_diff_check: sum of squares is near-exact") {
    Rng rng(5);
    ParamGrad p("p", random_tensor(2, 4, rng));
    auto f = [&]() {
        double s = 0;
        for (double v : p.value.data) s += v * v;
        return s;
    };
    p.zero_grad();
    for (std::size_t i = 0; i < p.value.data.size(); ++i)
        p.grad.data[i] = 2.0 * p.value.data[i];
    CHECK(finite_diff_check(f, {&p}, 1e-5) < 1e-8);
}

TEST_CASE("finite_diff_check flags a corrupted gradient") {
    Rng rng(6);
    ParamGrad p("p", random_tensor(1, 4, rng));
    auto f = [&]() {
        double s = 0;
        for (double v : p.value.data) s += v * v;
        return s;
    };
    p.zero_grad();
    for (std::size_t i = 0; i < p.value.data.size(); ++i)
        p.grad.data[i] = 2.0 * p.value.data[i];
    p.grad.data[2] += 0.5;  // corruption
    CHECK(finite_diff_check(f, {&p}, 1e-5) > 1e-2);
}

TEST_CASE("analytic gradients of core ops pass finite differences") {
    Rng rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        ParamGrad x("x", random_tensor(3, 4, rng));
        ParamGrad w("w", random_tensor(4, 2, rng));
        ParamGrad b("b", random_tensor(1, 2, rng));
        Tensor2 target = random_tensor(3, 2, rng);

        // objective: 0.5 * |affine(x,w,b) - target|^2
        auto f = [&]() {
            Tensor2 y = affine_forward(x.value, w.value, b.value);
            y.add_scaled(target, -1.0);
            double n = y.frobenius_norm();
            return 0.5 * n * n;
        };
        zero_grads({&x, &w, &b});
        Tensor2 y = affine_forward(x.value, w.value, b.value);
        Tensor2 dy = y;
        dy.add_scaled(target, -1.0);
        affine_backward(x.value, w.value, dy, &x.grad, &w.grad, &b.grad);
        CHECK(finite_diff_check(f, {&x, &w, &b}, 1e-5) < 1e-4);
    }

    for (int trial = 0; trial < 10; ++trial) {
        ParamGrad v("v", random_tensor(1, 6, rng));
        Tensor2 weights = random_tensor(1, 6, rng);
        auto f = [&]() { return dot(l2_normalize(v.value), weights); };
        v.zero_grad();
        l2_normalize_backward(v.value, weights, v.grad);
        CHECK(finite_diff_check(f, {&v}, 1e-6) < 1e-4);
    }

    for (int trial = 0; trial < 10; ++trial) {
        ParamGrad v("v", random_tensor(2, 5, rng));
        Tensor2 weights = random_tensor(2, 5, rng);
        auto f = [&]() { return dot(softmax(v.value), weights); };
        v.zero_grad();
        softmax_backward(softmax(v.value), weights, v.grad);
        CHECK(finite_diff_check(f, {&v}, 1e-6) < 1e-4);
    }
}
