// Copyright (C) 2026 The depthdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <set>

#include "depthdiff/data.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace depthdiff;

TEST_CASE("synth_scene is deterministic per seed") {
    SceneConfig cfg;
    const SceneSample a = synth_scene(42, cfg);
    const SceneSample b = synth_scene(42, cfg);
    const SceneSample c = synth_scene(43, cfg);
    CHECK(test::bit_equal(a.depth.depth, b.depth.depth));
    CHECK(test::bit_equal(a.image, b.image));
    CHECK(!test::bit_equal(a.depth.depth, c.depth.depth));
    CHECK(a.image.shape() == Shape{1, 3, 64, 80});
}

TEST_CASE("synthetic depth stays inside the configured range") {
    SceneConfig cfg;
    cfg.range = {15.0, 120.0};
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        const SceneSample s = synth_scene(seed, cfg);
        s.depth.validate();
        for (double v : s.depth.depth.values()) {
            CHECK(v >= 15.0);
            CHECK(v <= 120.0);
        }
        for (double v : s.image.values()) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        CHECK(s.depth.valid_count() == 64 * 80);
    }
}

TEST_CASE("straight tube matches the ray-cylinder intersection") {
    SceneConfig cfg;
    cfg.straight = true;
    cfg.radius_mm = 14.0;
    const SceneSample s = synth_scene(7, cfg);
    const Intrinsics k = s.intrinsics;
    CHECK(k.fx == cfg.focal_scale * cfg.width);
    for (int y : {cfg.height / 2 - 1, cfg.height / 2}) {
        int checked = 0;
        for (int x = 0; x < cfg.width; ++x) {
            const double xn = (x - k.cx) / k.fx, yn = (y - k.cy) / k.fy;
            const double z = cfg.radius_mm / std::hypot(xn, yn);
            const double want = std::clamp(z, cfg.range.d_min, cfg.range.d_max);
            const double got = s.depth.depth.at(0, 0, y, x);
            CHECK(std::abs(got - want) <= 1e-6 * want);
            checked += z < cfg.range.d_max ? 1 : 0;
        }
        CHECK(checked > cfg.width / 2);  // most of the row actually hits the wall
    }
}

TEST_CASE("degenerate scene configs are rejected") {
    SceneConfig cfg;
    cfg.range = {50.0, 50.0};
    CHECK_THROWS_AS(synth_scene(1, cfg), Error);
    cfg.range = {60.0, 50.0};
    CHECK_THROWS_AS(synth_scene(1, cfg), Error);
    SceneConfig odd;
    odd.height = 30;
    CHECK_THROWS_AS(synth_scene(1, odd), Error);
}

TEST_CASE("sparsify contract") {
    SceneConfig cfg;
    const SceneSample s = synth_scene(3, cfg);
    for (std::int64_t n : {0, 50, 500, 5000}) {
        const SparseDepth sp = sparsify(s.depth, n, 11);
        CHECK(sp.n_points == n);
        std::int64_t count = 0;
        for (std::size_t i = 0; i < sp.mask.size(); ++i) {
            if (sp.mask[i] > 0.5) {
                ++count;
                CHECK(sp.depth[i] == s.depth.depth[i]);
            } else {
                CHECK(sp.depth[i] == 0.0);
            }
        }
        CHECK(count == n);
    }
    CHECK(test::bit_equal(sparsify(s.depth, 500, 1).mask, sparsify(s.depth, 500, 1).mask));
    CHECK(!test::bit_equal(sparsify(s.depth, 500, 1).mask, sparsify(s.depth, 500, 2).mask));
    CHECK_THROWS_AS(sparsify(s.depth, 64 * 80 + 1, 1), Error);
    CHECK_THROWS_AS(sparsify(s.depth, -1, 1), Error);
    const SparseDepth all = sparsify(s.depth, 64 * 80, 5);
    CHECK(all.mask.sum() == 64 * 80);
}

TEST_CASE("sparsify only picks valid pixels") {
    DepthMap d{Tensor(Shape{1, 1, 8, 8}, 30.0), Tensor(Shape{1, 1, 8, 8}, 0.0)};
    for (int i = 0; i < 10; ++i) d.mask[static_cast<std::size_t>(i * 5)] = 1.0;
    const SparseDepth sp = sparsify(d, 10, 3);
    CHECK(test::bit_equal(sp.mask, d.mask));
    CHECK_THROWS_AS(sparsify(d, 11, 3), Error);
}

TEST_CASE("sparsify is roughly uniform over valid pixels") {
    DepthMap d{Tensor(Shape{1, 1, 4, 4}, 30.0), Tensor(Shape{1, 1, 4, 4}, 1.0)};
    std::vector<int> hits(16, 0);
    for (std::uint64_t seed = 0; seed < 4000; ++seed) {
        const SparseDepth sp = sparsify(d, 4, seed);
        for (std::size_t i = 0; i < 16; ++i) hits[i] += sp.mask[i] > 0.5 ? 1 : 0;
    }
    // expected 1000 per pixel, sd about 27
    for (int h : hits) CHECK(std::abs(h - 1000) < 120);
}

TEST_CASE("normalize and denormalize") {
    const DepthRange r{10.0, 200.0};
    CHECK(normalize_depth(10.0, r) == -1.0);
    CHECK(normalize_depth(200.0, r) == 1.0);
    CHECK(normalize_depth(105.0, r) == 0.0);
    CHECK(normalize_depth(5.0, r) == -1.0);
    CHECK(normalize_depth(500.0, r) == 1.0);
    for (double d = 10.0; d <= 200.0; d += 3.7) {
        CHECK(std::abs(denormalize_depth(normalize_depth(d, r), r) - d) <= 1e-9 * d);
    }
    // denormalize inverts the unclamped map
    CHECK(denormalize_depth(1.5, r) == doctest::Approx(247.5));
    const Tensor t(Shape{1, 1, 1, 3}, std::vector<double>{10.0, 105.0, 200.0});
    const Tensor n = normalize_depth(t, r);
    CHECK(n[0] == -1.0);
    CHECK(n[1] == 0.0);
    CHECK(n[2] == 1.0);
    CHECK_THROWS_AS(normalize_depth(t, DepthRange{0.0, 10.0}), Error);
    CHECK_THROWS_AS(denormalize_depth(t, DepthRange{20.0, 10.0}), Error);
}

TEST_CASE("depth map validation") {
    DepthMap d{Tensor(Shape{1, 1, 2, 2}, 5.0), Tensor(Shape{1, 1, 2, 2}, 1.0)};
    CHECK_NOTHROW(d.validate());
    d.depth[1] = 0.0;
    CHECK_THROWS_AS(d.validate(), Error);
    d.mask[1] = 0.0;
    CHECK_NOTHROW(d.validate());
    d.depth[2] = std::nan("");
    CHECK_THROWS_AS(d.validate(), Error);
}
