// Copyright (C) 2026 The depthdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "depthdiff/autograd.hpp"

namespace depthdiff {

/// Variance schedule of the forward noising process plus the strided
/// timestep sub-sequence visited by the deterministic sampler.
struct NoiseSchedule {
    int num_timesteps = 0;         // T
    std::vector<double> betas;       // beta_t, t = 0..T-1
    std::vector<double> alphas;      // 1 - beta_t
    std::vector<double> alpha_bars;  // running product of alphas up to and including t
    std::vector<int> sampling_steps; // strictly decreasing, T-1 first, 0 last

    int num_sampling_steps() const { return static_cast<int>(sampling_steps.size()); }
    /// alpha_bar at t; t == -1 is the clean terminal state (alpha_bar = 1).
    double alpha_bar(int t) const;
    void validate() const;
};

/// Linear betas from beta_start to beta_end over T steps, S sampling steps.
NoiseSchedule build_schedule(int num_timesteps, double beta_start, double beta_end,
                             int num_sampling_steps);

/// Schedule from explicit betas; the sampling steps are evenly spaced.
NoiseSchedule schedule_from_betas(std::vector<double> betas, int num_sampling_steps);

/// Evenly spaced, strictly decreasing timesteps from T-1 to 0.
std::vector<int> even_sampling_steps(int num_timesteps, int num_sampling_steps);

/// sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * eps.
Var forward_diffuse(const Var& x0, int t, const Var& eps, const NoiseSchedule& sched);
Tensor forward_diffuse(const Tensor& x0, int t, const Tensor& eps, const NoiseSchedule& sched);

}  // namespace depthdiff
