// Copyright (C) 2026 The depthdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "depthdiff/nn.hpp"
#include "depthdiff/schedule.hpp"

namespace depthdiff {

/// 1x1 projection of the C-channel fusion hidden state to a single-channel
/// guidance map at the same resolution.
class ConditionProjection {
public:
    ConditionProjection() = default;
    ConditionProjection(int hidden_channels, Rng& rng);

    Var operator()(const Var& hidden) const;
    int hidden_channels() const { return proj_.in_channels(); }

    Conv2d& conv() { return proj_; }
    void collect(ParamList& out, const std::string& prefix);

private:
    Conv2d proj_;
};

Var condition_project(const ConditionProjection& projection, const Var& hidden);

/// Sinusoidal timestep encoding, shape (1, dim, 1, 1).
Tensor timestep_embedding(int t, int dim);

/// Noise-prediction network: a two-level encoder-decoder over the 2-channel
/// (noisy depth, guidance) stack with additive timestep conditioning.
class Denoiser {
public:
    static constexpr int kInputChannels = 2;

    Denoiser() = default;
    Denoiser(int width, int embed_dim, int num_timesteps, Rng& rng);

    /// Raw network on an already concatenated (N, 2, h, w) input.
    Var forward(const Var& stacked, int t) const;

    int width() const { return width_; }
    int input_channels() const { return in_.in_channels(); }
    int num_timesteps() const { return num_timesteps_; }

    /// Switches predict_noise to eps = sqrt(1 - abar) x_t + sqrt(abar) F, so the
    /// raw network output is a velocity. Empty restores plain eps output.
    void set_velocity_output(std::vector<double> alpha_bars);
    bool velocity_output() const { return !alpha_bars_.empty(); }
    double alpha_bar(int t) const { return alpha_bars_.at(static_cast<std::size_t>(t)); }

    void collect(ParamList& out, const std::string& prefix);

private:
    int width_ = 0;
    int embed_dim_ = 0;
    int num_timesteps_ = 0;
    std::vector<double> alpha_bars_;
    Conv2d embed1_, embed2_;
    Conv2d in_, enc_, down_, mid_, up_, out_;
};

/// eps_theta(concat(x_t, guidance), t), optionally through the velocity head.
Var predict_noise(const Denoiser& net, const Var& x_t, const Var& guidance, int t);

/// (x_t - sqrt(1 - abar_t) * eps_pred) / sqrt(abar_t).
Var estimate_x0(const Var& x_t, const Var& eps_pred, int t, const NoiseSchedule& sched);

/// Deterministic update from t to t_prev (t_prev == -1 is the clean terminal state).
Var ddim_step(const Var& x_t, const Var& eps_pred, int t, int t_prev, const NoiseSchedule& sched);

using NoisePredictor = std::function<Var(const Var& x_t, const Var& guidance, int t)>;

NoisePredictor make_noise_predictor(const Denoiser& net);

struct SampleOptions {
    /// Start from pure Gaussian noise instead of the diffused coarse depth.
    bool from_pure_noise = false;
    /// When positive, every x0 estimate is clamped to [-clip_x0, clip_x0]
    /// before the update.
    double clip_x0 = 0.0;
    /// When set, receives the x0 estimate produced at every step.
    std::vector<Tensor>* x0_trace = nullptr;
    /// When set, receives x_t entering every step.
    std::vector<Tensor>* xt_trace = nullptr;
};

/// Noise used to initialise sample() for a given seed and shape.
Tensor initial_noise(const Shape& shape, std::uint64_t seed);

/// Conditional reverse process: diffuse the coarse depth to the first sampling
/// timestep with seeded noise, then run every sampling step deterministically.
Var sample(const Var& coarse_depth, const Var& guidance, const NoisePredictor& predictor,
           const NoiseSchedule& sched, std::uint64_t seed, const SampleOptions& options = {});

}  // namespace depthdiff
