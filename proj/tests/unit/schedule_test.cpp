// Copyright (C) 2026 The depthdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "depthdiff/schedule.hpp"
#include "depthdiff/nn.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace depthdiff;

TEST_CASE("default schedule has 1000 betas and 20 sampling steps") {
    const NoiseSchedule s = build_schedule(1000, 1e-4, 0.02, 20);
    CHECK(s.num_timesteps == 1000);
    CHECK(s.betas.size() == 1000);
    CHECK(s.num_sampling_steps() == 20);
    CHECK(s.sampling_steps.front() == 999);
    CHECK(s.sampling_steps.back() == 0);
    CHECK(s.betas.front() == doctest::Approx(1e-4).epsilon(1e-15));
    CHECK(s.betas.back() == doctest::Approx(0.02).epsilon(1e-15));
    for (std::size_t t = 1; t < s.betas.size(); ++t) {
        // linear spacing
        CHECK(std::abs((s.betas[t] - s.betas[t - 1]) - (0.02 - 1e-4) / 999.0) < 1e-15);
    }
}

TEST_CASE("schedule invariants") {
    const NoiseSchedule s = build_schedule(1000, 1e-4, 0.02, 20);
    double running = 1.0;
    for (int t = 0; t < s.num_timesteps; ++t) {
        const auto i = static_cast<std::size_t>(t);
        CHECK(s.betas[i] > 0.0);
        CHECK(s.betas[i] < 1.0);
        CHECK(s.alphas[i] == 1.0 - s.betas[i]);
        CHECK(s.alpha_bars[i] > 0.0);
        CHECK(s.alpha_bars[i] <= 1.0);
        if (t > 0) CHECK(s.alpha_bars[i] < s.alpha_bars[i - 1]);
        running *= s.alphas[i];
        CHECK(std::abs(s.alpha_bars[i] - running) / running <= 1e-12);
    }
    for (std::size_t k = 1; k < s.sampling_steps.size(); ++k)
        CHECK(s.sampling_steps[k] < s.sampling_steps[k - 1]);
    CHECK(s.alpha_bar(-1) == 1.0);
}

TEST_CASE("single step schedule") {
    const NoiseSchedule s = build_schedule(1, 0.5, 0.5, 1);
    CHECK(s.alpha_bars[0] == 0.5);
    REQUIRE(s.sampling_steps.size() == 1);
    CHECK(s.sampling_steps[0] == 0);
}

TEST_CASE("hand-computed cumulative product") {
    const NoiseSchedule s = schedule_from_betas({0.1, 0.2, 0.3}, 2);
    CHECK(s.alpha_bars[0] == doctest::Approx(0.9).epsilon(1e-14));
    CHECK(s.alpha_bars[1] == doctest::Approx(0.72).epsilon(1e-14));
    CHECK(s.alpha_bars[2] == doctest::Approx(0.504).epsilon(1e-14));
    CHECK(s.sampling_steps == std::vector<int>{2, 0});
}

TEST_CASE("bad schedules are rejected") {
    CHECK_THROWS_AS(build_schedule(10, 1e-4, 0.02, 20), Error);   // T < S
    CHECK_THROWS_AS(build_schedule(10, 0.02, 1e-4, 5), Error);    // not monotone
    CHECK_THROWS_AS(build_schedule(10, 0.0, 0.02, 5), Error);
    CHECK_THROWS_AS(build_schedule(10, 1e-4, 1.0, 5), Error);
    CHECK_THROWS_AS(build_schedule(10, 1e-4, 0.02, 0), Error);
    CHECK_THROWS_AS(build_schedule(0, 1e-4, 0.02, 0), Error);
    CHECK_THROWS_AS(schedule_from_betas({0.1, 1.2}, 2), Error);
}

TEST_CASE("even sampling steps") {
    CHECK(even_sampling_steps(1000, 2) == std::vector<int>{999, 0});
    CHECK(even_sampling_steps(5, 5) == std::vector<int>{4, 3, 2, 1, 0});
    const auto s = even_sampling_steps(1000, 20);
    CHECK(s.size() == 20);
    // gaps differ by at most one
    int lo = 1 << 30, hi = 0;
    for (std::size_t k = 1; k < s.size(); ++k) {
        lo = std::min(lo, s[k - 1] - s[k]);
        hi = std::max(hi, s[k - 1] - s[k]);
    }
    CHECK(hi - lo <= 1);
}

TEST_CASE("forward_diffuse closed forms") {
    const NoiseSchedule s = build_schedule(1000, 1e-4, 0.02, 20);
    const Tensor x0 = test::uniform_tensor(Shape{1, 1, 4, 5}, 1);
    const Tensor eps = gaussian_noise(x0.shape(), 2);
    const Tensor zero(x0.shape(), 0.0);
    for (int t : {0, 123, 999}) {
        const double ab = s.alpha_bars[static_cast<std::size_t>(t)];
        const Tensor y = forward_diffuse(x0, t, zero, s);
        for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == std::sqrt(ab) * x0[i]);

        // additivity and homogeneity
        const Tensor full = forward_diffuse(x0, t, eps, s);
        const Tensor noise_only = forward_diffuse(zero, t, eps, s);
        Tensor x0a = x0, epsa = eps;
        for (std::size_t i = 0; i < x0a.size(); ++i) {
            x0a[i] *= -2.5;
            epsa[i] *= -2.5;
        }
        const Tensor scaled = forward_diffuse(x0a, t, epsa, s);
        for (std::size_t i = 0; i < full.size(); ++i) {
            CHECK(std::abs(y[i] + noise_only[i] - full[i]) <= 1e-15);
            CHECK(std::abs(scaled[i] + 2.5 * full[i]) <= 1e-14);
            // FMA contraction may differ by an ulp between the two sides
            CHECK(std::abs(full[i] - (std::sqrt(ab) * x0[i] + std::sqrt(1.0 - ab) * eps[i])) <= 1e-15);
        }
    }
}

TEST_CASE("forward_diffuse with alpha_bar = 1 is the identity") {
    NoiseSchedule s = schedule_from_betas({1e-3, 2e-3}, 2);
    s.alpha_bars[0] = 1.0;  // degenerate table, only for the algebra
    const Tensor x0 = test::uniform_tensor(Shape{1, 1, 3, 3}, 5);
    const Tensor eps = gaussian_noise(x0.shape(), 6);
    CHECK(test::bit_equal(forward_diffuse(x0, 0, eps, s), x0));
}

TEST_CASE("forward_diffuse errors") {
    const NoiseSchedule s = build_schedule(10, 1e-4, 0.02, 5);
    const Tensor a(Shape{1, 1, 2, 2}, 0.0), b(Shape{1, 1, 2, 3}, 0.0);
    CHECK_THROWS_AS(forward_diffuse(a, 0, b, s), Error);
    CHECK_THROWS_AS(forward_diffuse(a, 10, a, s), Error);
    CHECK_THROWS_AS(forward_diffuse(a, -1, a, s), Error);
}

TEST_CASE("forward_diffuse Var form matches tensor form and is differentiable") {
    const NoiseSchedule s = build_schedule(1000, 1e-4, 0.02, 20);
    Var x0(test::uniform_tensor(Shape{1, 1, 3, 4}, 9), true);
    Var eps(gaussian_noise(x0.shape(), 10), true);
    CHECK(test::bit_equal(forward_diffuse(x0, 400, eps, s).value(),
                          forward_diffuse(x0.value(), 400, eps.value(), s)));
    const double err = test::gradcheck(
        [&] { return test::project(forward_diffuse(x0, 400, eps, s), 11); }, {&x0, &eps});
    CHECK(err < 1e-6);
}
