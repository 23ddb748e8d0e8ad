// Copyright (C) 2026 The depthdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "depthdiff/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

namespace depthdiff {

std::int64_t DepthMap::valid_count() const {
    std::int64_t n = 0;
    for (double m : mask.values()) n += m > 0.5 ? 1 : 0;
    return n;
}

void DepthMap::validate() const {
    require_same_shape(depth.shape(), mask.shape(), "depth map");
    require(depth.shape().n == 1 && depth.shape().c == 1, ErrorCode::kShapeMismatch,
            "depth map must be (1,1,H,W)");
    for (std::size_t i = 0; i < depth.size(); ++i) {
        if (mask[i] <= 0.5) continue;
        require(std::isfinite(depth[i]) && depth[i] > 0.0, ErrorCode::kInvalidArgument,
                "depth map has a non-positive or non-finite value on a valid pixel");
    }
}

void DepthRange::validate() const {
    require(d_min > 0.0 && d_max > d_min, ErrorCode::kInvalidArgument,
            "depth range must satisfy 0 < d_min < d_max");
}

SparseDepth sparsify(const DepthMap& depth, std::int64_t n_points, std::uint64_t seed) {
    std::vector<std::size_t> valid;
    for (std::size_t i = 0; i < depth.mask.size(); ++i) {
        if (depth.mask[i] > 0.5) valid.push_back(i);
    }
    require(n_points >= 0, ErrorCode::kInvalidArgument, "sparsify: negative point count");
    require(static_cast<std::size_t>(n_points) <= valid.size(), ErrorCode::kInvalidArgument,
            "sparsify: requested " + std::to_string(n_points) + " points but only " +
                std::to_string(valid.size()) + " pixels are valid");
    // Partial Fisher-Yates.
    std::mt19937_64 rng(seed);
    for (std::int64_t k = 0; k < n_points; ++k) {
        std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(k),
                                                        valid.size() - 1);
        std::swap(valid[static_cast<std::size_t>(k)], valid[pick(rng)]);
    }
    SparseDepth s{Tensor(depth.depth.shape(), 0.0), Tensor(depth.depth.shape(), 0.0), n_points};
    for (std::int64_t k = 0; k < n_points; ++k) {
        const std::size_t i = valid[static_cast<std::size_t>(k)];
        s.depth[i] = depth.depth[i];
        s.mask[i] = 1.0;
    }
    return s;
}

double normalize_depth(double depth_mm, const DepthRange& range) {
    const double z = 2.0 * (depth_mm - range.d_min) / (range.d_max - range.d_min) - 1.0;
    return std::clamp(z, -1.0, 1.0);
}

double denormalize_depth(double normalized, const DepthRange& range) {
    return range.d_min + (normalized + 1.0) * 0.5 * (range.d_max - range.d_min);
}

Tensor normalize_depth(const Tensor& depth_mm, const DepthRange& range) {
    range.validate();
    Tensor out(depth_mm.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = normalize_depth(depth_mm[i], range);
    return out;
}

Tensor denormalize_depth(const Tensor& normalized, const DepthRange& range) {
    range.validate();
    Tensor out(normalized.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = denormalize_depth(normalized[i], range);
    return out;
}

}  // namespace depthdiff
