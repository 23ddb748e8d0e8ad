// Copyright (C) 2026 The depthdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "depthdiff/optim.hpp"

#include <cmath>

namespace depthdiff {

OptimizerKind parse_optimizer(const std::string& name) {
    if (name == "adamw") return OptimizerKind::kAdamW;
    if (name == "adam") return OptimizerKind::kAdam;
    if (name == "sgd") return OptimizerKind::kSgd;
    fail(ErrorCode::kInvalidArgument, "unknown optimizer '" + name + "' (adamw|adam|sgd)");
}

std::string optimizer_name(OptimizerKind kind) {
    switch (kind) {
        case OptimizerKind::kAdamW: return "adamw";
        case OptimizerKind::kAdam: return "adam";
        case OptimizerKind::kSgd: return "sgd";
    }
    return "adamw";
}

Optimizer::Optimizer(ParamList params, OptimizerOptions options)
    : params_(std::move(params)), opts_(options) {
    for (const auto& p : params_) {
        m_.emplace_back(p.var->shape(), 0.0);
        v_.emplace_back(p.var->shape(), 0.0);
    }
}

void Optimizer::zero_grad() {
    for (auto& p : params_) p.var->zero_grad();
}

double Optimizer::clip_grad_norm(double max_norm) {
    double sq = 0.0;
    for (auto& p : params_) {
        if (!p.var->has_grad()) continue;
        for (double g : p.var->node()->grad.values()) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const double s = max_norm / (norm + 1e-12);
        for (auto& p : params_) {
            if (!p.var->has_grad()) continue;
            for (double& g : p.var->node()->grad.values()) g *= s;
        }
    }
    return norm;
}

void Optimizer::restore(long long step, std::vector<Tensor> m, std::vector<Tensor> v) {
    require(m.size() == params_.size() && v.size() == params_.size(), ErrorCode::kFormat,
            "optimizer state does not match parameter list");
    step_ = step;
    m_ = std::move(m);
    v_ = std::move(v);
}

void Optimizer::step() {
    ++step_;
    const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(step_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
        Var& p = *params_[k].var;
        if (!p.has_grad()) continue;
        Tensor& w = p.mutable_value();
        const Tensor& g = p.node()->grad;
        Tensor& m = m_[k];
        Tensor& v = v_[k];
        for (std::size_t i = 0; i < w.size(); ++i) {
            double gi = g[i];
            if (opts_.kind != OptimizerKind::kAdamW) gi += opts_.weight_decay * w[i];
            if (opts_.kind == OptimizerKind::kSgd) {
                m[i] = opts_.beta1 * m[i] + gi;
                w[i] -= opts_.lr * m[i];
                continue;
            }
            if (opts_.kind == OptimizerKind::kAdamW) w[i] -= opts_.lr * opts_.weight_decay * w[i];
            m[i] = opts_.beta1 * m[i] + (1.0 - opts_.beta1) * gi;
            v[i] = opts_.beta2 * v[i] + (1.0 - opts_.beta2) * gi * gi;
            const double mh = m[i] / bc1;
            const double vh = v[i] / bc2;
            w[i] -= opts_.lr * mh / (std::sqrt(vh) + opts_.eps);
        }
    }
}

}  // namespace depthdiff
