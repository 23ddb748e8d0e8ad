// Copyright (C) 2026 The depthdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

#include "depthdiff/tensor.hpp"

namespace depthdiff {

/// Dense depth in millimetres; both tensors are (1, 1, H, W).
struct DepthMap {
    Tensor depth;
    Tensor mask;  // 1 where depth is defined

    int height() const { return depth.shape().h; }
    int width() const { return depth.shape().w; }
    std::int64_t valid_count() const;
    /// Throws unless values are finite and > 0 wherever mask is set.
    void validate() const;
};

/// Sparse observations on the same grid: exact GT values where mask is set, 0 elsewhere.
struct SparseDepth {
    Tensor depth;
    Tensor mask;
    std::int64_t n_points = 0;
};

struct Sample {
    std::string id;
    Tensor image;  // (1, 3, H, W) in [0, 1]
    DepthMap depth;
    SparseDepth sparse;
};

struct Intrinsics {
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
};

struct DepthRange {
    double d_min = 10.0;
    double d_max = 200.0;
    void validate() const;
};

/// Parameters of the procedural tubular-cavity generator.
struct SceneConfig {
    int height = 64;
    int width = 80;
    DepthRange range;
    double focal_scale = 0.8;        // fx = fy = focal_scale * width
    bool straight = false;           // straight cylinder, camera on its axis
    double radius_mm = 16.0;         // base radius (straight tube uses it exactly)
    double radius_jitter = 0.25;     // relative spread of the random base radius
    double bend_amplitude = 0.6;     // centreline sway, in units of the radius
    int max_bumps = 6;
    bool specular = true;
    bool textureless_patches = true;
};

struct SceneSample {
    Tensor image;  // (1, 3, H, W)
    DepthMap depth;
    Intrinsics intrinsics;
};

/// Camera used by synth_scene for a given config.
Intrinsics scene_intrinsics(const SceneConfig& config);

/// Deterministic per (seed, config).
SceneSample synth_scene(std::uint64_t seed, const SceneConfig& config);

/// Uniform sample without replacement of n_points valid pixels.
SparseDepth sparsify(const DepthMap& depth, std::int64_t n_points, std::uint64_t seed);

/// 2 (d - d_min) / (d_max - d_min) - 1, clamped to [-1, 1].
Tensor normalize_depth(const Tensor& depth_mm, const DepthRange& range);
double normalize_depth(double depth_mm, const DepthRange& range);
/// Inverse of the unclamped affine map.
Tensor denormalize_depth(const Tensor& normalized, const DepthRange& range);
double denormalize_depth(double normalized, const DepthRange& range);

}  // namespace depthdiff
