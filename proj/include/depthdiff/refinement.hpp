// Copyright (C) 2026 The depthdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "depthdiff/nn.hpp"

namespace depthdiff {

inline constexpr int kUpsampleFactor = 4;
inline constexpr int kNeighbours = 9;  // 3x3, row-major, index 4 is the centre
inline constexpr int kUpsampleMaskChannels = kNeighbours * kUpsampleFactor * kUpsampleFactor;

/// Learned convex upsampling by 4. mask_logits is (N, 9*16, h, w) with channel
/// k*16 + a*4 + b holding the logit of coarse neighbour k for fine pixel
/// (4y + a, 4x + b). Coarse neighbours beyond the border are edge-replicated.
Var convex_upsample(const Var& coarse, const Var& mask_logits);

/// Softmax over the 9 affinity logits of every pixel: non-negative weights
/// summing to one, centre channel (4) being the self weight.
Var normalize_affinities(const Var& logits);

/// Anisotropic propagation D <- sum_k w_k * D[neighbour_k] with explicit
/// weights (N, 9, H, W). Out-of-image neighbours read the centre pixel.
/// Throws when any pixel has sum_k |w_k| > 1 or non-finite weights.
Var spn_propagate(const Var& depth, const Var& weights, int iterations);

/// Predicts the upsampling mask from the quarter-resolution features.
class UpsampleMaskHead {
public:
    UpsampleMaskHead() = default;
    UpsampleMaskHead(int feature_channels, Rng& rng);
    Var operator()(const Var& features_quarter) const;
    void collect(ParamList& out, const std::string& prefix);

private:
    Conv2d conv1_, conv2_;
};

/// Spatial propagation refinement guided by full-resolution features.
class SpnRefiner {
public:
    SpnRefiner() = default;
    SpnRefiner(int feature_channels, Rng& rng);

    Var affinities(const Var& features_full) const;
    Var refine(const Var& depth_full, const Var& features_full, int iterations) const;
    void collect(ParamList& out, const std::string& prefix);

private:
    Conv2d conv1_, conv2_;
};

Var spn_refine(const SpnRefiner& spn, const Var& depth_full, const Var& features_full,
               int iterations);

}  // namespace depthdiff
