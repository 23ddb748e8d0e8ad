// Copyright (C) 2026 The depthdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numeric>

#include "depthdiff/objectives.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace depthdiff;

namespace {

Tensor random_mask(const Shape& s, std::uint64_t seed, double p_valid) {
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution b(p_valid);
    Tensor m(s);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = b(rng) ? 1.0 : 0.0;
    m[0] = 1.0;
    return m;
}

Tensor offset(const Tensor& t, double c) {
    Tensor o = t;
    for (std::size_t i = 0; i < o.size(); ++i) o[i] += c;
    return o;
}

// Straightforward reference: one pass per metric.
MetricReport reference_metrics(const Tensor& p, const Tensor& g, const Tensor& m) {
    MetricReport r;
    double n = 0, se = 0, ae = 0, re = 0, hit = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (m[i] < 0.5) continue;
        n += 1;
        se += (p[i] - g[i]) * (p[i] - g[i]);
        ae += std::abs(p[i] - g[i]);
        re += std::abs(p[i] - g[i]) / g[i];
        const double ratio = std::max(p[i] / g[i], g[i] / p[i]);
        if (p[i] > 0 && ratio < 1.25) hit += 1;
    }
    r.rmse_mm = std::sqrt(se * (1.0 / n));
    r.mae_mm = ae * (1.0 / n);
    r.rel = re * (1.0 / n);
    r.delta = hit * (1.0 / n);
    r.n_valid = static_cast<std::int64_t>(n);
    return r;
}

}  // namespace

TEST_CASE("depth loss closed forms") {
    const Shape s{2, 1, 5, 6};
    const Tensor gt = test::uniform_tensor(s, 1);
    const Tensor mask = random_mask(s, 2, 0.7);
    CHECK(depth_loss(Var(gt), Var(gt), gt, mask).value()[0] == 0.0);
    for (double c : {0.5, -0.25, 2.0, 1e-3}) {
        const Tensor p = offset(gt, c);
        const double l = depth_loss(Var(p), Var(p), gt, mask).value()[0];
        CHECK(std::abs(l - 2.0 * (c * c + std::abs(c))) <= 1e-9);
    }
    // invalid pixels do not count
    Tensor p = offset(gt, 0.5);
    const double base = depth_loss(Var(p), Var(p), gt, mask).value()[0];
    for (std::size_t i = 0; i < p.size(); ++i)
        if (mask[i] < 0.5) p[i] = 1e6 * (static_cast<double>(i) - 7.0);
    CHECK(depth_loss(Var(p), Var(p), gt, mask).value()[0] == base);
    CHECK_THROWS_AS(depth_loss(Var(gt), Var(gt), gt, Tensor(s, 0.0)), Error);
    CHECK_THROWS_AS(depth_loss(Var(Tensor(Shape{1, 1, 5, 6})), Var(gt), gt, mask), Error);
}

TEST_CASE("gradient loss closed forms") {
    const Shape s{1, 2, 4, 5};
    GradientField gt{test::uniform_tensor(s, 3), random_mask(s, 4, 0.8)};
    std::vector<Var> same(3, Var(gt.values));
    CHECK(gradient_loss(same, gt).value()[0] == 0.0);

    const Var unit(offset(gt.values, 1.0));
    CHECK(std::abs(gradient_loss({unit, unit, unit}, gt, 0.9).value()[0] - 2.71) <= 1e-9);
    CHECK(std::abs(gradient_loss({unit}, gt, 0.9).value()[0] - 1.0) <= 1e-12);

    // the last iteration carries weight 1, earlier ones decay
    const Var half(offset(gt.values, -0.5));
    const double l = gradient_loss({unit, Var(gt.values), half}, gt, 0.9).value()[0];
    CHECK(std::abs(l - (0.81 * 1.0 + 0.5)) <= 1e-12);

    // gamma = 1 is the plain sum
    const Var a(offset(gt.values, 0.3)), b(offset(gt.values, -0.7));
    CHECK(std::abs(gradient_loss({a, b}, gt, 1.0).value()[0] - 1.0) <= 1e-12);
    CHECK_THROWS_AS(gradient_loss({}, gt), Error);
}

TEST_CASE("diffusion loss closed forms") {
    const Shape s{1, 1, 6, 7};
    const Tensor e = test::uniform_tensor(s, 5);
    CHECK(diffusion_loss(Var(e), Var(e)).value()[0] == 0.0);
    CHECK(std::abs(diffusion_loss(Var(e), Var(offset(e, 1.0))).value()[0] - 1.0) <= 1e-9);
    const Tensor p = test::uniform_tensor(s, 6);
    const double base = diffusion_loss(Var(e), Var(p)).value()[0];
    Tensor ea = e, pa = p;
    for (std::size_t i = 0; i < ea.size(); ++i) {
        ea[i] *= 3.0;
        pa[i] *= 3.0;
    }
    CHECK(std::abs(diffusion_loss(Var(ea), Var(pa)).value()[0] - 9.0 * base) <= 1e-12);
    CHECK_THROWS_AS(diffusion_loss(Var(e), Var(Tensor(Shape{1, 1, 6, 6}))), Error);
}

TEST_CASE("losses are non-negative") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Shape s{1, 1, 4, 4};
        const Tensor gt = test::uniform_tensor(s, seed);
        const Tensor mask = random_mask(s, seed + 100, 0.5);
        CHECK(depth_loss(Var(test::uniform_tensor(s, seed + 1)), Var(test::uniform_tensor(s, seed + 2)), gt, mask).value()[0] >= 0.0);
        CHECK(diffusion_loss(Var(gt), Var(test::uniform_tensor(s, seed + 3))).value()[0] >= 0.0);
    }
}

TEST_CASE("loss gradients match finite differences") {
    const Shape s{1, 1, 8, 8};
    const Tensor gt = test::uniform_tensor(s, 7);
    const Tensor mask = random_mask(s, 8, 0.7);
    Var p(test::uniform_tensor(s, 9), true), r(test::uniform_tensor(s, 10), true);
    CHECK(test::gradcheck([&] { return depth_loss(p, r, gt, mask); }, {&p, &r}) < 1e-4);

    const Shape gs{1, 2, 8, 8};
    GradientField g{test::uniform_tensor(gs, 11), random_mask(gs, 12, 0.8)};
    Var g1(test::uniform_tensor(gs, 13), true), g2(test::uniform_tensor(gs, 14), true),
        g3(test::uniform_tensor(gs, 15), true);
    CHECK(test::gradcheck([&] { return gradient_loss({g1, g2, g3}, g, 0.9); }, {&g1, &g2, &g3}) < 1e-4);

    Var e(test::uniform_tensor(s, 16), true), q(test::uniform_tensor(s, 17), true);
    CHECK(test::gradcheck([&] { return diffusion_loss(e, q); }, {&e, &q}) < 1e-4);
}

TEST_CASE("gt gradient by forward differences") {
    const Shape s{1, 1, 5, 5};
    const Tensor c(s, 3.0), all(s, 1.0);
    const GradientField z = compute_gt_gradient(c, all);
    CHECK(z.values.max_abs() == 0.0);

    Tensor ramp(s);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 5; ++x) ramp.at(0, 0, y, x) = 0.5 * x - 1.25 * y + 2.0;
    const GradientField g = compute_gt_gradient(ramp, all);
    for (int y = 0; y < 5; ++y) {
        for (int x = 0; x < 5; ++x) {
            CHECK(g.mask.at(0, 0, y, x) == (x < 4 ? 1.0 : 0.0));
            CHECK(g.mask.at(0, 1, y, x) == (y < 4 ? 1.0 : 0.0));
            if (x < 4) CHECK(g.values.at(0, 0, y, x) == doctest::Approx(0.5).epsilon(1e-14));
            if (y < 4) CHECK(g.values.at(0, 1, y, x) == doctest::Approx(-1.25).epsilon(1e-14));
        }
    }

    const Tensor d = test::uniform_tensor(s, 20);
    const Tensor m = random_mask(s, 21, 0.7);
    const GradientField r = compute_gt_gradient(d, m);
    for (int y = 0; y < 5; ++y) {
        for (int x = 0; x < 5; ++x) {
            const bool vx = x + 1 < 5 && m.at(0, 0, y, x) > 0.5 && m.at(0, 0, y, x + 1) > 0.5;
            const bool vy = y + 1 < 5 && m.at(0, 0, y, x) > 0.5 && m.at(0, 0, y + 1, x) > 0.5;
            CHECK(r.mask.at(0, 0, y, x) == (vx ? 1.0 : 0.0));
            CHECK(r.mask.at(0, 1, y, x) == (vy ? 1.0 : 0.0));
            if (vx) CHECK(r.values.at(0, 0, y, x) == d.at(0, 0, y, x + 1) - d.at(0, 0, y, x));
            if (vy) CHECK(r.values.at(0, 1, y, x) == d.at(0, 0, y + 1, x) - d.at(0, 0, y, x));
        }
    }
}

TEST_CASE("quarter ground truth") {
    const Shape s{1, 1, 8, 8};
    const Tensor d = test::uniform_tensor(s, 30);
    Tensor m(s, 1.0);
    m.at(0, 0, 5, 6) = 0.0;  // spoils block (1, 1)
    Tensor dq, mq;
    quarter_ground_truth(d, m, dq, mq);
    CHECK(dq.shape() == Shape{1, 1, 2, 2});
    CHECK(mq.at(0, 0, 1, 1) == 0.0);
    CHECK(mq.at(0, 0, 0, 0) == 1.0);
    double avg = 0.0;
    for (int y = 0; y < 4; ++y)
        for (int x = 4; x < 8; ++x) avg += d.at(0, 0, y, x);
    CHECK(std::abs(dq.at(0, 0, 0, 1) - avg / 16.0) <= 1e-15);
}

TEST_CASE("metrics: perfect and scaled predictions") {
    const Shape s{1, 1, 6, 6};
    const Tensor gt = test::uniform_tensor(s, 40, 10.0, 200.0);
    const Tensor mask(s, 1.0);
    const MetricReport p = evaluate_depth(gt, gt, mask);
    CHECK(p.rmse_mm == 0.0);
    CHECK(p.mae_mm == 0.0);
    CHECK(p.rel == 0.0);
    CHECK(p.delta == 1.0);
    CHECK(p.n_valid == 36);

    Tensor scaled = gt;
    for (auto& v : scaled.values()) v *= 1.3;
    const MetricReport q = evaluate_depth(scaled, gt, mask);
    CHECK(q.delta == 0.0);
    CHECK(std::abs(q.rel - 0.3) <= 1e-12);

    // boundary: exactly 1.25 is not a hit
    Tensor b(s);
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = 1.25 * 8.0;
    CHECK(evaluate_depth(b, Tensor(s, 8.0), mask).delta == 0.0);
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = 8.0 / 1.25;
    CHECK(evaluate_depth(b, Tensor(s, 8.0), mask).delta == 0.0);
}

TEST_CASE("metrics match a scalar-loop reference bit for bit") {
    for (std::uint64_t trial = 0; trial < 100; ++trial) {
        const Shape s{1, 1, 10, 10};
        const Tensor gt = test::uniform_tensor(s, 500 + trial, 10.0, 200.0);
        const Tensor pred = test::uniform_tensor(s, 700 + trial, 10.0, 200.0);
        const Tensor mask = random_mask(s, 900 + trial, 0.8);
        const MetricReport a = evaluate_depth(pred, gt, mask);
        const MetricReport b = reference_metrics(pred, gt, mask);
        CHECK(a.rmse_mm == b.rmse_mm);
        CHECK(a.mae_mm == b.mae_mm);
        CHECK(a.rel == b.rel);
        CHECK(a.delta == b.delta);
        CHECK(a.n_valid == b.n_valid);
        CHECK(a.rmse_mm >= a.mae_mm);
    }
}

TEST_CASE("metrics ignore invalid pixels and pixel order") {
    const Shape s{1, 1, 10, 10};
    const Tensor gt = test::uniform_tensor(s, 1, 10.0, 200.0);
    Tensor pred = test::uniform_tensor(s, 2, 10.0, 200.0);
    const Tensor mask = random_mask(s, 3, 0.6);
    const MetricReport a = evaluate_depth(pred, gt, mask);
    for (std::size_t i = 0; i < pred.size(); ++i)
        if (mask[i] < 0.5) pred[i] = -1e9;
    const MetricReport b = evaluate_depth(pred, gt, mask);
    CHECK(a.rmse_mm == b.rmse_mm);
    CHECK(a.delta == b.delta);

    // reversed pixel order
    Tensor gr(s), pr(s), mr(s);
    for (std::size_t i = 0; i < gt.size(); ++i) {
        gr[99 - i] = gt[i];
        pr[99 - i] = pred[i];
        mr[99 - i] = mask[i];
    }
    const MetricReport c = evaluate_depth(pr, gr, mr);
    CHECK(std::abs(c.rmse_mm - a.rmse_mm) <= 1e-12 * a.rmse_mm);
    CHECK(std::abs(c.mae_mm - a.mae_mm) <= 1e-12 * a.mae_mm);
    CHECK(c.delta == a.delta);
}

TEST_CASE("metric errors") {
    const Shape s{1, 1, 3, 3};
    Tensor gt(s, 5.0);
    CHECK_THROWS_AS(evaluate_depth(gt, gt, Tensor(s, 0.0)), Error);
    gt[4] = 0.0;
    CHECK_THROWS_AS(evaluate_depth(gt, gt, Tensor(s, 1.0)), Error);
    gt[4] = -2.0;
    CHECK_THROWS_AS(evaluate_depth(gt, gt, Tensor(s, 1.0)), Error);
}

TEST_CASE("mean_report averages frames") {
    MetricReport a, b;
    a.rmse_mm = 2.0;
    a.delta = 1.0;
    a.n_valid = 10;
    b.rmse_mm = 4.0;
    b.delta = 0.5;
    b.n_valid = 30;
    const MetricReport m = mean_report({a, b});
    CHECK(m.rmse_mm == 3.0);
    CHECK(m.delta == 0.75);
    CHECK(m.n_valid == 40);
    CHECK_THROWS_AS(mean_report({}), Error);
}
