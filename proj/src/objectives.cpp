// Copyright (C) 2026 The depthdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "depthdiff/objectives.hpp"

#include <cmath>

namespace depthdiff {

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

Var depth_loss(const Var& pred, const Var& refined, const Tensor& gt, const Tensor& mask) {
    require_same_shape(pred.shape(), gt.shape(), "depth_loss pred");
    require_same_shape(refined.shape(), gt.shape(), "depth_loss refined");
    require_same_shape(mask.shape(), gt.shape(), "depth_loss mask");
    double count = 0.0;
    double total = 0.0;
    const Tensor& p = pred.value();
    const Tensor& r = refined.value();
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (mask[i] <= 0.5) continue;
        const double e1 = p[i] - gt[i];
        const double e2 = r[i] - gt[i];
        total += e1 * e1 + std::abs(e1) + e2 * e2 + std::abs(e2);
        count += 1.0;
    }
    require(count > 0.0, ErrorCode::kInvalidArgument, "depth_loss: empty valid mask");
    return make_result(Tensor::scalar(total / count), {pred, refined},
                       [gt, mask, count](Node& self) {
        const double g = self.grad[0] / count;
        for (std::size_t k = 0; k < 2; ++k) {
            Node& in = *self.parents[k];
            if (!in.requires_grad) continue;
            Tensor& gi = in.grad_buffer();
            for (std::size_t i = 0; i < gt.size(); ++i) {
                if (mask[i] <= 0.5) continue;
                const double e = in.value[i] - gt[i];
                gi[i] += g * (2.0 * e + sign(e));
            }
        }
    });
}

Var gradient_loss(const std::vector<Var>& gradients, const GradientField& gt, double gamma) {
    require(!gradients.empty(), ErrorCode::kInvalidArgument, "gradient_loss: empty list");
    require_same_shape(gt.mask.shape(), gt.values.shape(), "gradient_loss gt mask");
    double count = 0.0;
    for (std::size_t i = 0; i < gt.mask.size(); ++i) count += gt.mask[i] > 0.5 ? 1.0 : 0.0;
    require(count > 0.0, ErrorCode::kInvalidArgument, "gradient_loss: empty valid mask");

    const std::size_t iters = gradients.size();
    std::vector<double> weights(iters);
    double total = 0.0;
    for (std::size_t i = 0; i < iters; ++i) {
        require_same_shape(gradients[i].shape(), gt.values.shape(), "gradient_loss");
        weights[i] = std::pow(gamma, static_cast<double>(iters - 1 - i));
        const Tensor& v = gradients[i].value();
        double l1 = 0.0;
        for (std::size_t j = 0; j < v.size(); ++j) {
            if (gt.mask[j] > 0.5) l1 += std::abs(v[j] - gt.values[j]);
        }
        total += weights[i] * l1 / count;
    }
    return make_result(Tensor::scalar(total), gradients,
                       [gt, weights, count](Node& self) {
        for (std::size_t i = 0; i < self.parents.size(); ++i) {
            Node& in = *self.parents[i];
            if (!in.requires_grad) continue;
            const double g = self.grad[0] * weights[i] / count;
            Tensor& gi = in.grad_buffer();
            for (std::size_t j = 0; j < gi.size(); ++j) {
                if (gt.mask[j] > 0.5) gi[j] += g * sign(in.value[j] - gt.values[j]);
            }
        }
    });
}

Var diffusion_loss(const Var& eps_true, const Var& eps_pred) {
    require_same_shape(eps_true.shape(), eps_pred.shape(), "diffusion_loss");
    Var r = sub(eps_pred, eps_true);
    return mean_all(mul(r, r));
}

GradientField compute_gt_gradient(const Tensor& depth, const Tensor& mask) {
    require_same_shape(depth.shape(), mask.shape(), "compute_gt_gradient");
    const Shape s = depth.shape();
    require(s.c == 1, ErrorCode::kShapeMismatch, "compute_gt_gradient: depth must be 1 channel");
    GradientField g{Tensor(Shape{s.n, 2, s.h, s.w}, 0.0), Tensor(Shape{s.n, 2, s.h, s.w}, 0.0)};
    for (int n = 0; n < s.n; ++n) {
        for (int y = 0; y < s.h; ++y) {
            for (int x = 0; x < s.w; ++x) {
                const bool here = mask.at(n, 0, y, x) > 0.5;
                if (x + 1 < s.w && here && mask.at(n, 0, y, x + 1) > 0.5) {
                    g.values.at(n, 0, y, x) = depth.at(n, 0, y, x + 1) - depth.at(n, 0, y, x);
                    g.mask.at(n, 0, y, x) = 1.0;
                }
                if (y + 1 < s.h && here && mask.at(n, 0, y + 1, x) > 0.5) {
                    g.values.at(n, 1, y, x) = depth.at(n, 0, y + 1, x) - depth.at(n, 0, y, x);
                    g.mask.at(n, 1, y, x) = 1.0;
                }
            }
        }
    }
    return g;
}

void quarter_ground_truth(const Tensor& depth, const Tensor& mask, Tensor& depth_q,
                          Tensor& mask_q) {
    require_same_shape(depth.shape(), mask.shape(), "quarter_ground_truth");
    const Shape s = depth.shape();
    require(s.h % 4 == 0 && s.w % 4 == 0, ErrorCode::kShapeMismatch,
            "quarter_ground_truth: size not divisible by 4");
    const Shape q{s.n, s.c, s.h / 4, s.w / 4};
    depth_q = Tensor(q, 0.0);
    mask_q = Tensor(q, 0.0);
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            for (int y = 0; y < q.h; ++y) {
                for (int x = 0; x < q.w; ++x) {
                    double acc = 0.0;
                    bool all = true;
                    for (int dy = 0; dy < 4; ++dy) {
                        for (int dx = 0; dx < 4; ++dx) {
                            all = all && mask.at(n, c, 4 * y + dy, 4 * x + dx) > 0.5;
                            acc += depth.at(n, c, 4 * y + dy, 4 * x + dx);
                        }
                    }
                    if (!all) continue;
                    depth_q.at(n, c, y, x) = acc / 16.0;
                    mask_q.at(n, c, y, x) = 1.0;
                }
            }
        }
    }
}

MetricReport evaluate_depth(const Tensor& pred_mm, const Tensor& gt_mm, const Tensor& gt_mask,
                            const Tensor* pred_mask) {
    require_same_shape(pred_mm.shape(), gt_mm.shape(), "evaluate");
    require_same_shape(gt_mask.shape(), gt_mm.shape(), "evaluate mask");
    if (pred_mask) require_same_shape(pred_mask->shape(), gt_mm.shape(), "evaluate pred mask");
    double se = 0.0;
    double ae = 0.0;
    double re = 0.0;
    double hits = 0.0;
    std::int64_t n = 0;
    for (std::size_t i = 0; i < gt_mm.size(); ++i) {
        if (gt_mask[i] <= 0.5) continue;
        if (pred_mask && (*pred_mask)[i] <= 0.5) continue;
        const double d = gt_mm[i];
        require(d > 0.0, ErrorCode::kInvalidArgument,
                "evaluate: non-positive ground-truth depth on a valid pixel");
        const double p = pred_mm[i];
        const double e = p - d;
        se += e * e;
        ae += std::abs(e);
        re += std::abs(e) / d;
        // max(p/d, d/p) < 1.25 in product form: pred = 1.25 * gt sits exactly on
        // the boundary. A non-positive prediction never counts.
        if (p > 0.0 && p < kDeltaThreshold * d && d < kDeltaThreshold * p) hits += 1.0;
        ++n;
    }
    require(n > 0, ErrorCode::kInvalidArgument, "evaluate: empty valid mask");
    const double inv = 1.0 / static_cast<double>(n);
    MetricReport r;
    r.rmse_mm = std::sqrt(se * inv);
    r.mae_mm = ae * inv;
    r.rel = re * inv;
    r.delta = hits * inv;
    r.n_valid = n;
    return r;
}

MetricReport mean_report(const std::vector<MetricReport>& frames) {
    require(!frames.empty(), ErrorCode::kInvalidArgument, "mean_report: no frames");
    MetricReport m;
    for (const auto& f : frames) {
        m.rmse_mm += f.rmse_mm;
        m.mae_mm += f.mae_mm;
        m.rel += f.rel;
        m.delta += f.delta;
        m.n_valid += f.n_valid;
    }
    const double inv = 1.0 / static_cast<double>(frames.size());
    m.rmse_mm *= inv;
    m.mae_mm *= inv;
    m.rel *= inv;
    m.delta *= inv;
    return m;
}

}  // namespace depthdiff
