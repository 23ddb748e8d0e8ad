// Copyright (C) 2026 The depthdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "depthdiff/schedule.hpp"

#include <cmath>

namespace depthdiff {

double NoiseSchedule::alpha_bar(int t) const {
    if (t == -1) return 1.0;
    require(t >= 0 && t < num_timesteps, ErrorCode::kInvalidArgument,
            "timestep " + std::to_string(t) + " outside [0, " + std::to_string(num_timesteps) +
                ")");
    return alpha_bars[static_cast<std::size_t>(t)];
}

void NoiseSchedule::validate() const {
    const auto T = static_cast<std::size_t>(num_timesteps);
    require(num_timesteps >= 1 && betas.size() == T && alphas.size() == T &&
                alpha_bars.size() == T,
            ErrorCode::kInvalidArgument, "noise schedule tables are inconsistent");
    for (std::size_t t = 0; t < T; ++t) {
        require(betas[t] > 0.0 && betas[t] < 1.0, ErrorCode::kInvalidArgument,
                "beta out of (0,1) at t=" + std::to_string(t));
        if (t > 0) {
            require(alpha_bars[t] < alpha_bars[t - 1], ErrorCode::kInvalidArgument,
                    "alpha_bar not strictly decreasing");
        }
    }
    require(!sampling_steps.empty() && sampling_steps.front() == num_timesteps - 1 &&
                sampling_steps.back() == 0,
            ErrorCode::kInvalidArgument, "sampling steps must run from T-1 down to 0");
    for (std::size_t k = 1; k < sampling_steps.size(); ++k) {
        require(sampling_steps[k] < sampling_steps[k - 1], ErrorCode::kInvalidArgument,
                "sampling steps must be strictly decreasing");
    }
}

std::vector<int> even_sampling_steps(int num_timesteps, int num_sampling_steps) {
    require(num_sampling_steps >= 1 && num_timesteps >= num_sampling_steps,
            ErrorCode::kInvalidArgument,
            "need T >= S >= 1 (T=" + std::to_string(num_timesteps) +
                ", S=" + std::to_string(num_sampling_steps) + ")");
    if (num_sampling_steps == 1) {
        require(num_timesteps == 1, ErrorCode::kInvalidArgument,
                "a single sampling step must be both T-1 and 0, so T must be 1");
        return {0};
    }
    std::vector<int> steps(static_cast<std::size_t>(num_sampling_steps));
    const double stride = static_cast<double>(num_timesteps - 1) / (num_sampling_steps - 1);
    for (int k = 0; k < num_sampling_steps; ++k) {
        steps[static_cast<std::size_t>(k)] =
            static_cast<int>(std::lround(stride * (num_sampling_steps - 1 - k)));
    }
    return steps;
}

NoiseSchedule schedule_from_betas(std::vector<double> betas, int num_sampling_steps) {
    NoiseSchedule s;
    s.num_timesteps = static_cast<int>(betas.size());
    s.sampling_steps = even_sampling_steps(s.num_timesteps, num_sampling_steps);
    s.betas = std::move(betas);
    s.alphas.reserve(s.betas.size());
    s.alpha_bars.reserve(s.betas.size());
    double running = 1.0;
    for (double b : s.betas) {
        require(b > 0.0 && b < 1.0, ErrorCode::kInvalidArgument, "beta must lie in (0,1)");
        s.alphas.push_back(1.0 - b);
        running *= 1.0 - b;
        s.alpha_bars.push_back(running);
    }
    s.validate();
    return s;
}

NoiseSchedule build_schedule(int num_timesteps, double beta_start, double beta_end,
                             int num_sampling_steps) {
    require(num_timesteps >= 1, ErrorCode::kInvalidArgument, "T must be positive");
    require(num_timesteps >= num_sampling_steps, ErrorCode::kInvalidArgument,
            "T must be at least S");
    require(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0,
            ErrorCode::kInvalidArgument, "need 0 < beta_start <= beta_end < 1");
    std::vector<double> betas(static_cast<std::size_t>(num_timesteps));
    for (int t = 0; t < num_timesteps; ++t) {
        const double f = num_timesteps == 1 ? 0.0 : static_cast<double>(t) / (num_timesteps - 1);
        betas[static_cast<std::size_t>(t)] = beta_start + f * (beta_end - beta_start);
    }
    return schedule_from_betas(std::move(betas), num_sampling_steps);
}

Var forward_diffuse(const Var& x0, int t, const Var& eps, const NoiseSchedule& sched) {
    require_same_shape(x0.shape(), eps.shape(), "forward_diffuse");
    require(t >= 0 && t < sched.num_timesteps, ErrorCode::kInvalidArgument,
            "forward_diffuse: timestep out of range");
    const double ab = sched.alpha_bar(t);
    return add(scale(x0, std::sqrt(ab)), scale(eps, std::sqrt(1.0 - ab)));
}

Tensor forward_diffuse(const Tensor& x0, int t, const Tensor& eps, const NoiseSchedule& sched) {
    NoGradGuard ng;
    return forward_diffuse(constant(x0), t, constant(eps), sched).value();
}

}  // namespace depthdiff
