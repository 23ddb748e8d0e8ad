// Copyright (C) 2026 The depthdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "depthdiff/autograd.hpp"

namespace depthdiff {

/// Two-channel depth derivative field with a per-channel validity mask
/// (channel 0: along x / columns, channel 1: along y / rows).
struct GradientField {
    Tensor values;  // (N, 2, h, w)
    Tensor mask;    // (N, 2, h, w), 1 where defined
};

struct MetricReport {
    double rmse_mm = 0.0;
    double mae_mm = 0.0;
    double rel = 0.0;
    double delta = 0.0;  // fraction with max(pred/gt, gt/pred) < 1.25
    std::int64_t n_valid = 0;
};

inline constexpr double kDeltaThreshold = 1.25;

/// Mean over valid pixels of (e^2 + |e|) for both the upsampled and the
/// refined prediction. All inputs (N, 1, H, W); mask 1 where GT is valid.
Var depth_loss(const Var& pred, const Var& refined, const Tensor& gt, const Tensor& mask);

/// Sum over iterations i = 1..I of gamma^(I-i) * mean L1 over valid entries.
Var gradient_loss(const std::vector<Var>& gradients, const GradientField& gt, double gamma = 0.9);

/// Mean squared noise residual.
Var diffusion_loss(const Var& eps_true, const Var& eps_pred);

/// Forward differences; a derivative is valid only where both samples are.
GradientField compute_gt_gradient(const Tensor& depth, const Tensor& mask);

/// Quarter-resolution ground truth: the mean of each 4x4 block, valid only
/// when the whole block is valid.
void quarter_ground_truth(const Tensor& depth, const Tensor& mask, Tensor& depth_q,
                          Tensor& mask_q);

/// Metrics in millimetres over pixels valid in gt_mask (and pred_mask when given).
MetricReport evaluate_depth(const Tensor& pred_mm, const Tensor& gt_mm, const Tensor& gt_mask,
                            const Tensor* pred_mask = nullptr);

/// Mean of per-frame reports (n_valid is summed).
MetricReport mean_report(const std::vector<MetricReport>& frames);

}  // namespace depthdiff
