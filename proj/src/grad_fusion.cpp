// Copyright (C) 2026 The depthdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "depthdiff/grad_fusion.hpp"

namespace depthdiff {

namespace {

void require_quarter(const Var& v, const Shape& ref, int channels, const char* what) {
    const Shape s = v.shape();
    require(s.n == ref.n && s.h == ref.h && s.w == ref.w && s.c == channels,
            ErrorCode::kShapeMismatch,
            std::string("grad_fusion: ") + what + " has shape " + s.str() + ", expected " +
                std::to_string(channels) + " channels at " + std::to_string(ref.h) + "x" +
                std::to_string(ref.w));
}

}  // namespace

GradFusion::GradFusion(int feature_channels, int hidden_channels, Rng& rng)
    : hidden_channels_(hidden_channels) {
    const int c = hidden_channels;
    // GRU input x = concat(context, depth, gradient).
    const int x_channels = c + 3;
    hidden_proj_ = Conv2d(feature_channels, c, 3, 1, rng);
    context_proj_ = Conv2d(feature_channels, c, 3, 1, rng);
    convz_ = Conv2d(c + x_channels, c, 3, 1, rng);
    convr_ = Conv2d(c + x_channels, c, 3, 1, rng);
    convq_ = Conv2d(c + x_channels, c, 3, 1, rng);
    depth_head1_ = Conv2d(c, c, 3, 1, rng);
    depth_head2_ = Conv2d(c, 1, 3, 1, rng, 0.1);
    grad_head1_ = Conv2d(c, c, 3, 1, rng);
    grad_head2_ = Conv2d(c, 2, 3, 1, rng, 0.1);
}

FusionInit GradFusion::init_state(const Var& features_quarter, const Var& coarse_depth_full) const {
    const Shape fq = features_quarter.shape();
    require(fq.c == hidden_proj_.in_channels(), ErrorCode::kShapeMismatch,
            "init_state: features have " + std::to_string(fq.c) + " channels, expected " +
                std::to_string(hidden_proj_.in_channels()));
    const Shape df = coarse_depth_full.shape();
    require(df.c == 1 && df.n == fq.n && df.h == 4 * fq.h && df.w == 4 * fq.w,
            ErrorCode::kShapeMismatch,
            "init_state: coarse depth " + df.str() + " is not 4x the feature grid " + fq.str());
    FusionInit init;
    init.state.hidden = tanh(hidden_proj_(features_quarter));
    init.state.context = relu(context_proj_(features_quarter));
    init.depth = downsample_bilinear(coarse_depth_full, 4);
    init.gradient = constant(Tensor(Shape{fq.n, 2, fq.h, fq.w}, 0.0));
    return init;
}

GruStepResult GradFusion::gru_step(const FusionState& state, const Var& depth_prev,
                                   const Var& gradient_prev, int iteration) const {
    const Shape hs = state.hidden.shape();
    require(hs.c == hidden_channels_, ErrorCode::kShapeMismatch,
            "gru_step: hidden has " + std::to_string(hs.c) + " channels, expected " +
                std::to_string(hidden_channels_));
    require_quarter(state.context, hs, hidden_channels_, "context");
    require_quarter(depth_prev, hs, 1, "depth");
    require_quarter(gradient_prev, hs, 2, "gradient");
    require(depth_prev.value().all_finite() && gradient_prev.value().all_finite(),
            ErrorCode::kNonFinite,
            "gru_step: non-finite depth/gradient input at iteration " + std::to_string(iteration));

    const Var& h = state.hidden;
    Var x = concat_channels({state.context, depth_prev, gradient_prev});
    Var hx = concat_channels({h, x});
    Var z = sigmoid(convz_(hx));
    Var r = sigmoid(convr_(hx));
    Var q = tanh(convq_(concat_channels({mul(r, h), x})));
    if (!z.value().all_finite() || !r.value().all_finite() || !q.value().all_finite()) {
        fail(ErrorCode::kNonFinite,
             "gru_step: non-finite gate activation at iteration " + std::to_string(iteration));
    }
    // h' = (1 - z) * h + z * q
    Var h_new = add(sub(h, mul(z, h)), mul(z, q));

    GruStepResult out;
    out.hidden = h_new;
    out.delta_depth = depth_head2_(relu(depth_head1_(h_new)));
    out.delta_gradient = grad_head2_(relu(grad_head1_(h_new)));
    return out;
}

FusionResult GradFusion::run_fusion(const FusionState& state0, const Var& depth0,
                                    const Var& gradient0, int steps) const {
    require(steps >= 1, ErrorCode::kInvalidArgument, "run_fusion: steps must be >= 1");
    FusionResult res;
    FusionState state = state0;
    Var depth = depth0;
    Var gradient = gradient0;
    for (int i = 1; i <= steps; ++i) {
        GruStepResult step = gru_step(state, depth, gradient, i);
        depth = add(step.delta_depth, depth);
        gradient = add(step.delta_gradient, gradient);
        state.hidden = step.hidden;
        res.depths.push_back(depth);
        res.gradients.push_back(gradient);
    }
    res.depth = depth;
    res.hidden = state.hidden;
    return res;
}

void GradFusion::zero_heads() {
    depth_head2_.zero_parameters();
    grad_head2_.zero_parameters();
}

void GradFusion::zero_all() {
    for (Conv2d* c : {&hidden_proj_, &context_proj_, &convz_, &convr_, &convq_, &depth_head1_,
                      &depth_head2_, &grad_head1_, &grad_head2_}) {
        c->zero_parameters();
    }
}

void GradFusion::collect(ParamList& out, const std::string& prefix) {
    hidden_proj_.collect(out, prefix + ".hidden_proj");
    context_proj_.collect(out, prefix + ".context_proj");
    convz_.collect(out, prefix + ".convz");
    convr_.collect(out, prefix + ".convr");
    convq_.collect(out, prefix + ".convq");
    depth_head1_.collect(out, prefix + ".depth_head1");
    depth_head2_.collect(out, prefix + ".depth_head2");
    grad_head1_.collect(out, prefix + ".grad_head1");
    grad_head2_.collect(out, prefix + ".grad_head2");
}

}  // namespace depthdiff
