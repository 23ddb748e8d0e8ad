// Copyright (C) 2026 The depthdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "depthdiff/optim.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace depthdiff;

TEST_CASE("tensor basics") {
    Tensor t(Shape{2, 3, 4, 5}, 1.5);
    CHECK(t.size() == 120);
    CHECK(t.sum() == 180.0);
    t.at(1, 2, 3, 4) = -7.0;
    CHECK(t.max_abs() == 7.0);
    CHECK(t[t.size() - 1] == -7.0);
    const Tensor b = t.slice_batch(1, 1);
    CHECK(b.shape() == Shape{1, 3, 4, 5});
    CHECK(b.at(0, 2, 3, 4) == -7.0);
    const Tensor c = t.crop(1, 2, 3, 3);
    CHECK(c.shape() == Shape{2, 3, 3, 3});
    CHECK(c.at(1, 2, 2, 2) == -7.0);
    CHECK_THROWS_AS(t.crop(2, 0, 3, 5), Error);
    const Tensor parts[] = {b, b};
    CHECK(stack_batch(parts).shape() == Shape{2, 3, 4, 5});
    CHECK_THROWS_AS(Tensor(Shape{1, 1, 2, 2}, std::vector<double>{1, 2, 3}), Error);
    t[0] = std::nan("");
    CHECK(!t.all_finite());
}

TEST_CASE("elementwise op gradients") {
    const Shape s{2, 3, 3, 4};
    Var a(test::uniform_tensor(s, 1), true), b(test::uniform_tensor(s, 2), true);
    CHECK(test::gradcheck([&] { return test::project(add(a, mul(a, b)), 3); }, {&a, &b}) < 1e-6);
    CHECK(test::gradcheck([&] { return test::project(sub(scale(a, 2.5), add_scalar(b, 1.0)), 4); }, {&a, &b}) < 1e-6);
    CHECK(test::gradcheck([&] { return test::project(sigmoid(a), 5); }, {&a}) < 1e-6);
    CHECK(test::gradcheck([&] { return test::project(tanh(a), 6); }, {&a}) < 1e-6);
    CHECK(test::gradcheck([&] { return test::project(silu(a), 7); }, {&a}) < 1e-6);
    CHECK(test::gradcheck([&] { return test::project(relu(a), 8); }, {&a}) < 1e-6);
    CHECK(test::gradcheck([&] { return test::project(clamp(scale(a, 2.0), -0.8, 0.8), 9); }, {&a}) < 1e-6);
    CHECK(test::gradcheck([&] { return mean_all(mul(a, a)); }, {&a}) < 1e-6);
    Var bias(test::uniform_tensor(Shape{1, 3, 1, 1}, 10), true);
    CHECK(test::gradcheck([&] { return test::project(add_broadcast(a, bias), 11); }, {&a, &bias}) < 1e-6);
}

TEST_CASE("structural op gradients") {
    Var a(test::uniform_tensor(Shape{1, 2, 4, 6}, 1), true), b(test::uniform_tensor(Shape{1, 3, 4, 6}, 2), true);
    CHECK(test::gradcheck([&] { return test::project(concat_channels({a, b, a}), 3); }, {&a, &b}) < 1e-6);
    CHECK(test::gradcheck([&] { return test::project(slice_channels(b, 1, 2), 4); }, {&b}) < 1e-6);
    CHECK(test::gradcheck([&] { return test::project(upsample_nearest(a, 8, 12), 5); }, {&a}) < 1e-6);
    CHECK(test::gradcheck([&] { return test::project(upsample_nearest(a, 7, 9), 6); }, {&a}) < 1e-6);
    Var big(test::uniform_tensor(Shape{1, 1, 8, 8}, 7), true);
    CHECK(test::gradcheck([&] { return test::project(downsample_bilinear(big, 2), 8); }, {&big}) < 1e-6);
    CHECK(test::gradcheck([&] { return test::project(downsample_bilinear(big, 4), 9); }, {&big}) < 1e-6);
}

TEST_CASE("conv2d matches a direct sum and differentiates") {
    Var x(test::uniform_tensor(Shape{2, 3, 5, 6}, 1), true);
    Var w(test::uniform_tensor(Shape{4, 3, 3, 3}, 2), true);
    Var bias(test::uniform_tensor(Shape{1, 4, 1, 1}, 3), true);
    for (int stride : {1, 2}) {
        const Tensor y = conv2d(x, w, bias, stride, 1).value();
        const int oh = (5 + 2 - 3) / stride + 1, ow = (6 + 2 - 3) / stride + 1;
        REQUIRE(y.shape() == Shape{2, 4, oh, ow});
        for (int n = 0; n < 2; ++n) {
            for (int o = 0; o < 4; ++o) {
                for (int yy = 0; yy < oh; ++yy) {
                    for (int xx = 0; xx < ow; ++xx) {
                        double acc = bias.value()[static_cast<std::size_t>(o)];
                        for (int c = 0; c < 3; ++c)
                            for (int ky = 0; ky < 3; ++ky)
                                for (int kx = 0; kx < 3; ++kx) {
                                    const int iy = yy * stride + ky - 1, ix = xx * stride + kx - 1;
                                    if (iy < 0 || iy >= 5 || ix < 0 || ix >= 6) continue;
                                    acc += w.value().at(o, c, ky, kx) * x.value().at(n, c, iy, ix);
                                }
                        CHECK(std::abs(y.at(n, o, yy, xx) - acc) < 1e-12);
                    }
                }
            }
        }
        CHECK(test::gradcheck([&] { return test::project(conv2d(x, w, bias, stride, 1), 4); }, {&x, &w, &bias}) < 1e-6);
    }
    Var w1(test::uniform_tensor(Shape{2, 3, 1, 1}, 5), true);
    CHECK(test::gradcheck([&] { return test::project(conv2d(x, w1, Var(), 1, 0), 6); }, {&x, &w1}) < 1e-6);
}

TEST_CASE("gradients accumulate through shared subgraphs") {
    Var a(Tensor(Shape{1, 1, 1, 1}, 3.0), true);
    Var y = mul(a, a);
    backward(add(y, y));  // 2 a^2
    CHECK(a.grad()[0] == 12.0);
}

TEST_CASE("no-grad mode records nothing") {
    Var a(Tensor(Shape{1, 1, 1, 1}, 3.0), true);
    NoGradGuard ng;
    CHECK(!grad_enabled());
    Var y = mul(a, a);
    CHECK(!y.requires_grad());
}

TEST_CASE("seeded noise and seed mixing") {
    CHECK(test::bit_equal(gaussian_noise(Shape{1, 1, 3, 3}, 4), gaussian_noise(Shape{1, 1, 3, 3}, 4)));
    CHECK(mix_seed({1, 2}) != mix_seed({2, 1}));
    CHECK(mix_seed({1, 2}) == mix_seed({1, 2}));
}

TEST_CASE("AdamW step against a hand computation") {
    Var w(Tensor(Shape{1, 1, 1, 2}, std::vector<double>{1.0, -2.0}), true);
    ParamList params{{"w", &w}};
    OptimizerOptions o;
    o.lr = 0.1;
    o.weight_decay = 0.01;
    Optimizer opt(params, o);
    for (int step = 1; step <= 3; ++step) {
        const Tensor before = w.value();
        opt.zero_grad();
        backward(sum_all(mul(w, w)));  // grad 2w
        // first step of Adam moves each weight by lr * sign(g) after decay
        opt.step();
        if (step == 1) {
            for (int i = 0; i < 2; ++i) {
                const double decayed = before[static_cast<std::size_t>(i)] * (1.0 - 0.1 * 0.01);
                const double g = 2.0 * before[static_cast<std::size_t>(i)];
                const double want = decayed - 0.1 * g / (std::abs(g) + 1e-8);
                CHECK(std::abs(w.value()[static_cast<std::size_t>(i)] - want) < 1e-12);
            }
        }
    }
    CHECK(opt.steps_taken() == 3);
    CHECK(std::abs(w.value()[0]) < 1.0);
}

TEST_CASE("gradient clipping caps the global norm") {
    Var a(Tensor(Shape{1, 1, 1, 2}, std::vector<double>{3.0, 4.0}), true);
    ParamList params{{"a", &a}};
    Optimizer opt(params, OptimizerOptions{});
    backward(sum_all(mul(a, a)));  // grad (6, 8), norm 10
    CHECK(opt.clip_grad_norm(1.0) == doctest::Approx(10.0));
    CHECK(a.grad()[0] == doctest::Approx(0.6));
    CHECK(a.grad()[1] == doctest::Approx(0.8));
    CHECK(parse_optimizer("adamw") == OptimizerKind::kAdamW);
    CHECK_THROWS_AS(parse_optimizer("lamb"), Error);
}
