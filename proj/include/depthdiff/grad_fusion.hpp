// Copyright (C) 2026 The depthdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "depthdiff/nn.hpp"

namespace depthdiff {

/// Recurrent state carried across fusion iterations (both C x H/4 x W/4).
struct FusionState {
    Var hidden;
    Var context;
};

struct FusionInit {
    FusionState state;
    Var depth;     // D_0, 1 channel
    Var gradient;  // G_0, 2 channels (d/dx, d/dy), all zero
};

struct GruStepResult {
    Var delta_depth;     // 1 channel
    Var delta_gradient;  // 2 channels
    Var hidden;
};

struct FusionResult {
    Var depth;                    // D_I
    std::vector<Var> depths;      // D_1..D_I
    std::vector<Var> gradients;   // G_1..G_I
    Var hidden;                   // N_I
};

/// ConvGRU refinement of quarter-resolution depth and depth gradients.
class GradFusion {
public:
    GradFusion() = default;
    /// feature_channels: backbone quarter-resolution width; hidden_channels: C.
    GradFusion(int feature_channels, int hidden_channels, Rng& rng);

    int hidden_channels() const { return hidden_channels_; }
    int feature_channels() const { return hidden_proj_.in_channels(); }

    /// Hidden/context from the quarter-resolution features; G_0 = 0 and D_0 is
    /// the bilinear quarter-resolution downsample of the full-resolution coarse depth.
    FusionInit init_state(const Var& features_quarter, const Var& coarse_depth_full) const;

    GruStepResult gru_step(const FusionState& state, const Var& depth_prev,
                           const Var& gradient_prev, int iteration = 0) const;

    FusionResult run_fusion(const FusionState& state0, const Var& depth0, const Var& gradient0,
                            int steps) const;

    /// Zeroes the final layer of both increment heads (zero-update fixpoint).
    void zero_heads();
    /// Zeroes every learned parameter.
    void zero_all();

    Conv2d& convz() { return convz_; }
    Conv2d& convr() { return convr_; }
    Conv2d& convq() { return convq_; }
    Conv2d& hidden_proj() { return hidden_proj_; }
    Conv2d& context_proj() { return context_proj_; }

    void collect(ParamList& out, const std::string& prefix);

private:
    int hidden_channels_ = 0;
    Conv2d hidden_proj_, context_proj_;
    Conv2d convz_, convr_, convq_;
    Conv2d depth_head1_, depth_head2_;
    Conv2d grad_head1_, grad_head2_;
};

}  // namespace depthdiff
