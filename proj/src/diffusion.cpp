// Copyright (C) 2026 The depthdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "depthdiff/diffusion.hpp"

#include <cmath>

namespace depthdiff {

ConditionProjection::ConditionProjection(int hidden_channels, Rng& rng)
    : proj_(hidden_channels, 1, 1, 1, rng) {}

Var ConditionProjection::operator()(const Var& hidden) const {
    require(hidden.shape().c == proj_.in_channels(), ErrorCode::kShapeMismatch,
            "condition_project: hidden has " + std::to_string(hidden.shape().c) +
                " channels, projection expects " + std::to_string(proj_.in_channels()));
    return proj_(hidden);
}

void ConditionProjection::collect(ParamList& out, const std::string& prefix) {
    proj_.collect(out, prefix + ".proj");
}

Var condition_project(const ConditionProjection& projection, const Var& hidden) {
    return projection(hidden);
}

Tensor timestep_embedding(int t, int dim) {
    require(dim >= 2 && dim % 2 == 0, ErrorCode::kInvalidArgument,
            "timestep embedding dim must be even");
    Tensor e(Shape{1, dim, 1, 1});
    const int half = dim / 2;
    for (int i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * i / half);
        e[static_cast<std::size_t>(i)] = std::sin(t * freq);
        e[static_cast<std::size_t>(i + half)] = std::cos(t * freq);
    }
    return e;
}

Denoiser::Denoiser(int width, int embed_dim, int num_timesteps, Rng& rng)
    : width_(width), embed_dim_(embed_dim), num_timesteps_(num_timesteps) {
    require(width > 0 && embed_dim > 0 && num_timesteps > 0, ErrorCode::kInvalidArgument,
            "Denoiser: bad configuration");
    embed1_ = Conv2d(embed_dim, 2 * width, 1, 1, rng);
    embed2_ = Conv2d(2 * width, 3 * width, 1, 1, rng);
    in_ = Conv2d(kInputChannels, width, 3, 1, rng);
    enc_ = Conv2d(width, width, 3, 1, rng);
    down_ = Conv2d(width, 2 * width, 3, 2, rng);
    mid_ = Conv2d(2 * width, 2 * width, 3, 1, rng);
    up_ = Conv2d(3 * width, width, 3, 1, rng);
    out_ = Conv2d(width, 1, 3, 1, rng, 0.1);
}

Var Denoiser::forward(const Var& stacked, int t) const {
    const Shape s = stacked.shape();
    require(s.c == kInputChannels, ErrorCode::kShapeMismatch,
            "denoiser expects a 2-channel input, got " + std::to_string(s.c));
    require(t >= 0 && t < num_timesteps_, ErrorCode::kInvalidArgument,
            "denoiser timestep out of range");
    Var temb = constant(timestep_embedding(t, embed_dim_));
    Var cond = embed2_(silu(embed1_(temb)));
    Var cond1 = slice_channels(cond, 0, width_);
    Var cond2 = slice_channels(cond, width_, 2 * width_);

    Var e1 = silu(add_broadcast(in_(stacked), cond1));
    e1 = silu(enc_(e1));
    Var d = silu(down_(e1));
    d = silu(add_broadcast(mid_(d), cond2));
    Var u = upsample_nearest(d, s.h, s.w);
    u = silu(up_(concat_channels({u, e1})));
    return out_(u);
}

void Denoiser::set_velocity_output(std::vector<double> alpha_bars) {
    require(alpha_bars.empty() || static_cast<int>(alpha_bars.size()) == num_timesteps_,
            ErrorCode::kInvalidArgument, "Denoiser: alpha_bar table does not match T");
    alpha_bars_ = std::move(alpha_bars);
}

void Denoiser::collect(ParamList& out, const std::string& prefix) {
    embed1_.collect(out, prefix + ".embed1");
    embed2_.collect(out, prefix + ".embed2");
    in_.collect(out, prefix + ".in");
    enc_.collect(out, prefix + ".enc");
    down_.collect(out, prefix + ".down");
    mid_.collect(out, prefix + ".mid");
    up_.collect(out, prefix + ".up");
    out_.collect(out, prefix + ".out");
}

Var predict_noise(const Denoiser& net, const Var& x_t, const Var& guidance, int t) {
    require(x_t.shape().c == 1 && guidance.shape().c == 1, ErrorCode::kShapeMismatch,
            "predict_noise: x_t and guidance must be single-channel");
    require_same_shape(x_t.shape(), guidance.shape(), "predict_noise");
    require(x_t.value().all_finite() && guidance.value().all_finite(), ErrorCode::kNonFinite,
            "predict_noise: non-finite input at t=" + std::to_string(t));
    Var raw = net.forward(concat_channels({x_t, guidance}), t);
    if (!net.velocity_output()) return raw;
    const double ab = net.alpha_bar(t);
    return add(scale(x_t, std::sqrt(1.0 - ab)), scale(raw, std::sqrt(ab)));
}

Var estimate_x0(const Var& x_t, const Var& eps_pred, int t, const NoiseSchedule& sched) {
    require_same_shape(x_t.shape(), eps_pred.shape(), "estimate_x0");
    const double ab = sched.alpha_bar(t);
    require(ab > 0.0, ErrorCode::kInvalidArgument, "estimate_x0: alpha_bar is zero");
    return scale(sub(x_t, scale(eps_pred, std::sqrt(1.0 - ab))), 1.0 / std::sqrt(ab));
}

Var ddim_step(const Var& x_t, const Var& eps_pred, int t, int t_prev, const NoiseSchedule& sched) {
    require(t > t_prev && t_prev >= -1, ErrorCode::kInvalidArgument,
            "ddim_step: need t > t_prev (t=" + std::to_string(t) +
                ", t_prev=" + std::to_string(t_prev) + ")");
    Var x0 = estimate_x0(x_t, eps_pred, t, sched);
    const double ab_prev = sched.alpha_bar(t_prev);
    if (ab_prev == 1.0) return x0;
    return add(scale(x0, std::sqrt(ab_prev)), scale(eps_pred, std::sqrt(1.0 - ab_prev)));
}

NoisePredictor make_noise_predictor(const Denoiser& net) {
    return [&net](const Var& x_t, const Var& guidance, int t) {
        return predict_noise(net, x_t, guidance, t);
    };
}

Tensor initial_noise(const Shape& shape, std::uint64_t seed) {
    return gaussian_noise(shape, mix_seed({seed, 0x5A3D'17ull}));
}

Var sample(const Var& coarse_depth, const Var& guidance, const NoisePredictor& predictor,
           const NoiseSchedule& sched, std::uint64_t seed, const SampleOptions& options) {
    require_same_shape(coarse_depth.shape(), guidance.shape(), "sample");
    require(!sched.sampling_steps.empty(), ErrorCode::kInvalidArgument,
            "sample: schedule has no sampling steps");
    Var eps = constant(initial_noise(coarse_depth.shape(), seed));
    const int first = sched.sampling_steps.front();
    Var x = options.from_pure_noise ? eps : forward_diffuse(coarse_depth, first, eps, sched);

    const auto& steps = sched.sampling_steps;
    for (std::size_t k = 0; k < steps.size(); ++k) {
        const int t = steps[k];
        const int t_prev = k + 1 < steps.size() ? steps[k + 1] : -1;
        if (options.xt_trace) options.xt_trace->push_back(x.value());
        Var eps_pred = predictor(x, guidance, t);
        if (!eps_pred.value().all_finite()) {
            fail(ErrorCode::kNonFinite, "sample: non-finite noise prediction at step " +
                                            std::to_string(k) + " (t=" + std::to_string(t) + ")");
        }
        if (options.x0_trace) {
            NoGradGuard ng;
            options.x0_trace->push_back(estimate_x0(x, eps_pred, t, sched).value());
        }
        if (options.clip_x0 > 0.0) {
            Var x0 = clamp(estimate_x0(x, eps_pred, t, sched), -options.clip_x0, options.clip_x0);
            const double ab_prev = sched.alpha_bar(t_prev);
            x = ab_prev == 1.0 ? x0
                               : add(scale(x0, std::sqrt(ab_prev)),
                                     scale(eps_pred, std::sqrt(1.0 - ab_prev)));
        } else {
            x = ddim_step(x, eps_pred, t, t_prev, sched);
        }
        if (!x.value().all_finite()) {
            fail(ErrorCode::kNonFinite, "sample: non-finite state after step " +
                                            std::to_string(k) + " (t=" + std::to_string(t) + ")");
        }
    }
    return x;
}

}  // namespace depthdiff
