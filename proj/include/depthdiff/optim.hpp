// Copyright (C) 2026 The depthdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "depthdiff/nn.hpp"

namespace depthdiff {

enum class OptimizerKind { kAdamW, kAdam, kSgd };

OptimizerKind parse_optimizer(const std::string& name);
std::string optimizer_name(OptimizerKind kind);

struct OptimizerOptions {
    OptimizerKind kind = OptimizerKind::kAdamW;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-2;  // decoupled for AdamW, L2 for the others
};

/// First-order optimizer over a fixed parameter list. Moments are kept in
/// parameter order so they can be checkpointed and restored.
class Optimizer {
public:
    Optimizer(ParamList params, OptimizerOptions options);

    void zero_grad();
    /// Rescales all gradients so their global L2 norm is at most max_norm.
    /// Returns the pre-clip norm.
    double clip_grad_norm(double max_norm);
    void step();

    long long steps_taken() const { return step_; }
    const OptimizerOptions& options() const { return opts_; }
    void set_lr(double lr) { opts_.lr = lr; }

    std::vector<Tensor>& first_moments() { return m_; }
    std::vector<Tensor>& second_moments() { return v_; }
    void restore(long long step, std::vector<Tensor> m, std::vector<Tensor> v);

private:
    ParamList params_;
    OptimizerOptions opts_;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
    long long step_ = 0;
};

}  // namespace depthdiff
