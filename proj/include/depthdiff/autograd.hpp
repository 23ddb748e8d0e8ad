// Copyright (C) 2026 The depthdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "depthdiff/tensor.hpp"

namespace depthdiff {

// Reverse-mode automatic differentiation over Tensor values. A Var is a
// shared handle to a graph node; graph edges point from results to inputs
// only, so dropping the last handle to a result frees its subgraph.

struct Node {
    Tensor value;
    Tensor grad;  // allocated lazily on first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;

    Tensor& grad_buffer();
};

class Var {
public:
    Var() = default;
    explicit Var(Tensor value, bool requires_grad = false);

    bool defined() const noexcept { return static_cast<bool>(node_); }
    const Tensor& value() const { return node_->value; }
    Tensor& mutable_value() { return node_->value; }
    const Shape& shape() const { return node_->value.shape(); }
    bool requires_grad() const { return node_ && node_->requires_grad; }

    bool has_grad() const { return node_ && !node_->grad.empty(); }
    /// Gradient accumulated by backward(); zeros when nothing flowed here.
    Tensor grad() const;
    void zero_grad();

    Node* node() const noexcept { return node_.get(); }
    const std::shared_ptr<Node>& shared() const noexcept { return node_; }

private:
    std::shared_ptr<Node> node_;
};

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled() noexcept;

/// Builds a graph node for a custom operation. The backward callback reads
/// `self.grad` and accumulates into `self.parents[i]->grad_buffer()` for any
/// parent that requires grad. When no input requires grad (or recording is
/// disabled) the result is a constant and the callback is discarded.
Var make_result(Tensor value, const std::vector<Var>& inputs,
                std::function<void(Node& self)> backward);

/// Backpropagates from a single-element root, accumulating into leaves.
void backward(const Var& root);

Var constant(Tensor value);
Var detach(const Var& x);

// Elementwise, same shape.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);

/// a (N,C,H,W) + b broadcast from (N,C,1,1) or (1,C,1,1).
Var add_broadcast(const Var& a, const Var& b);

Var sigmoid(const Var& x);
Var tanh(const Var& x);
Var relu(const Var& x);
Var silu(const Var& x);
/// Gradient passes where lo <= x <= hi.
Var clamp(const Var& x, double lo, double hi);

/// 2-D convolution; weight is (Cout, Cin, k, k), bias (1, Cout, 1, 1) or undefined.
Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad);

Var concat_channels(const std::vector<Var>& parts);
Var slice_channels(const Var& x, int c0, int count);

/// Nearest-neighbour resize to (h, w).
Var upsample_nearest(const Var& x, int h, int w);

/// Bilinear downsampling by an even integer factor (half-pixel centres).
Var downsample_bilinear(const Var& x, int factor);

Var sum_all(const Var& x);
Var mean_all(const Var& x);

}  // namespace depthdiff
