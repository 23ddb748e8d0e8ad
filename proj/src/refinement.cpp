// Copyright (C) 2026 The depthdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "depthdiff/refinement.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace depthdiff {

namespace {

constexpr int kDy[kNeighbours] = {-1, -1, -1, 0, 0, 0, 1, 1, 1};
constexpr int kDx[kNeighbours] = {-1, 0, 1, -1, 0, 1, -1, 0, 1};

}  // namespace

Var convex_upsample(const Var& coarse, const Var& mask_logits) {
    const Shape sc = coarse.shape();
    const Shape sm = mask_logits.shape();
    require(sc.c == 1, ErrorCode::kShapeMismatch, "convex_upsample: coarse map must be 1 channel");
    require(sm.n == sc.n && sm.h == sc.h && sm.w == sc.w && sm.c == kUpsampleMaskChannels,
            ErrorCode::kShapeMismatch,
            "convex_upsample: mask " + sm.str() + " does not match coarse map " + sc.str());
    constexpr int f = kUpsampleFactor;
    constexpr int sub = f * f;
    const int H = sc.h * f;
    const int W = sc.w * f;

    // Normalized weights kept for the backward pass.
    Tensor weights(sm);
    Tensor out(Shape{sc.n, 1, H, W});
    const Tensor& d = coarse.value();
    const Tensor& lg = mask_logits.value();
    for (int n = 0; n < sc.n; ++n) {
        for (int y = 0; y < sc.h; ++y) {
            for (int x = 0; x < sc.w; ++x) {
                double nb[kNeighbours];
                for (int k = 0; k < kNeighbours; ++k) {
                    const int yy = std::clamp(y + kDy[k], 0, sc.h - 1);
                    const int xx = std::clamp(x + kDx[k], 0, sc.w - 1);
                    nb[k] = d.at(n, 0, yy, xx);
                }
                const double lo = *std::min_element(nb, nb + kNeighbours);
                const double hi = *std::max_element(nb, nb + kNeighbours);
                for (int s = 0; s < sub; ++s) {
                    double mx = -INFINITY;
                    for (int k = 0; k < kNeighbours; ++k) mx = std::max(mx, lg.at(n, k * sub + s, y, x));
                    double z = 0.0;
                    double e[kNeighbours];
                    for (int k = 0; k < kNeighbours; ++k) {
                        e[k] = std::exp(lg.at(n, k * sub + s, y, x) - mx);
                        z += e[k];
                    }
                    double acc = 0.0;
                    for (int k = 0; k < kNeighbours; ++k) {
                        const double wk = e[k] / z;
                        weights.at(n, k * sub + s, y, x) = wk;
                        acc += wk * nb[k];
                    }
                    // rounding can push the sum an ulp past the neighbourhood range
                    out.at(n, 0, y * f + s / f, x * f + s % f) = std::clamp(acc, lo, hi);
                }
            }
        }
    }

    return make_result(std::move(out), {coarse, mask_logits},
                       [weights = std::move(weights)](Node& self) {
        Node& cn = *self.parents[0];
        Node& mn = *self.parents[1];
        const Shape sc = cn.value.shape();
        const Tensor& d = cn.value;
        for (int n = 0; n < sc.n; ++n) {
            for (int y = 0; y < sc.h; ++y) {
                for (int x = 0; x < sc.w; ++x) {
                    int yy[kNeighbours], xx[kNeighbours];
                    for (int k = 0; k < kNeighbours; ++k) {
                        yy[k] = std::clamp(y + kDy[k], 0, sc.h - 1);
                        xx[k] = std::clamp(x + kDx[k], 0, sc.w - 1);
                    }
                    for (int s = 0; s < sub; ++s) {
                        const double g = self.grad.at(n, 0, y * f + s / f, x * f + s % f);
                        const double o = self.value.at(n, 0, y * f + s / f, x * f + s % f);
                        for (int k = 0; k < kNeighbours; ++k) {
                            const double wk = weights.at(n, k * sub + s, y, x);
                            if (cn.requires_grad) cn.grad_buffer().at(n, 0, yy[k], xx[k]) += wk * g;
                            if (mn.requires_grad) {
                                mn.grad_buffer().at(n, k * sub + s, y, x) +=
                                    g * wk * (d.at(n, 0, yy[k], xx[k]) - o);
                            }
                        }
                    }
                }
            }
        }
    });
}

Var normalize_affinities(const Var& logits) {
    const Shape s = logits.shape();
    require(s.c == kNeighbours, ErrorCode::kShapeMismatch,
            "normalize_affinities: expected 9 channels, got " + std::to_string(s.c));
    Tensor out(s);
    const Tensor& lg = logits.value();
    for (int n = 0; n < s.n; ++n) {
        for (int y = 0; y < s.h; ++y) {
            for (int x = 0; x < s.w; ++x) {
                double mx = -INFINITY;
                for (int k = 0; k < kNeighbours; ++k) mx = std::max(mx, lg.at(n, k, y, x));
                require(std::isfinite(mx), ErrorCode::kNonFinite,
                        "normalize_affinities: non-finite affinity logits");
                double z = 0.0;
                for (int k = 0; k < kNeighbours; ++k) {
                    const double e = std::exp(lg.at(n, k, y, x) - mx);
                    out.at(n, k, y, x) = e;
                    z += e;
                }
                for (int k = 0; k < kNeighbours; ++k) out.at(n, k, y, x) /= z;
            }
        }
    }
    return make_result(std::move(out), {logits}, [](Node& self) {
        const Shape s = self.value.shape();
        Tensor& g = self.parents[0]->grad_buffer();
        for (int n = 0; n < s.n; ++n) {
            for (int y = 0; y < s.h; ++y) {
                for (int x = 0; x < s.w; ++x) {
                    double dot = 0.0;
                    for (int k = 0; k < kNeighbours; ++k)
                        dot += self.grad.at(n, k, y, x) * self.value.at(n, k, y, x);
                    for (int k = 0; k < kNeighbours; ++k)
                        g.at(n, k, y, x) += self.value.at(n, k, y, x) * (self.grad.at(n, k, y, x) - dot);
                }
            }
        }
    });
}

Var spn_propagate(const Var& depth, const Var& weights, int iterations) {
    const Shape sd = depth.shape();
    const Shape sw = weights.shape();
    require(iterations >= 1, ErrorCode::kInvalidArgument, "spn: iterations must be >= 1");
    require(sd.c == 1, ErrorCode::kShapeMismatch, "spn: depth must be 1 channel");
    require(sw.n == sd.n && sw.h == sd.h && sw.w == sd.w && sw.c == kNeighbours,
            ErrorCode::kShapeMismatch,
            "spn: weights " + sw.str() + " do not match depth " + sd.str());
    const Tensor& w = weights.value();
    // Pixels whose weights form a convex combination get their output kept
    // inside the neighbourhood range, so constants survive bit-for-bit.
    std::vector<char> convex(sd.numel(), 0);
    for (int n = 0; n < sd.n; ++n) {
        for (int y = 0; y < sd.h; ++y) {
            for (int x = 0; x < sd.w; ++x) {
                double total = 0.0, signed_total = 0.0;
                for (int k = 0; k < kNeighbours; ++k) {
                    total += std::abs(w.at(n, k, y, x));
                    signed_total += w.at(n, k, y, x);
                }
                convex[depth.value().index(n, 0, y, x)] =
                    total == signed_total && std::abs(total - 1.0) <= 1e-9;
                require(std::isfinite(total) && total <= 1.0 + 1e-9, ErrorCode::kInvalidArgument,
                        "spn: affinities at (" + std::to_string(y) + "," + std::to_string(x) +
                            ") are not normalizable (sum |w| = " + std::to_string(total) + ")");
            }
        }
    }

    auto neighbour = [sd](int y, int x, int k, int& yy, int& xx) {
        yy = y + kDy[k];
        xx = x + kDx[k];
        if (yy < 0 || yy >= sd.h || xx < 0 || xx >= sd.w) {
            yy = y;
            xx = x;
        }
    };

    std::vector<Tensor> states;
    states.reserve(static_cast<std::size_t>(iterations) + 1);
    states.push_back(depth.value());
    for (int it = 0; it < iterations; ++it) {
        const Tensor& cur = states.back();
        Tensor next(sd);
        for (int n = 0; n < sd.n; ++n) {
            for (int y = 0; y < sd.h; ++y) {
                for (int x = 0; x < sd.w; ++x) {
                    double acc = 0.0, lo = INFINITY, hi = -INFINITY;
                    for (int k = 0; k < kNeighbours; ++k) {
                        int yy, xx;
                        neighbour(y, x, k, yy, xx);
                        const double v = cur.at(n, 0, yy, xx);
                        acc += w.at(n, k, y, x) * v;
                        lo = std::min(lo, v);
                        hi = std::max(hi, v);
                    }
                    if (convex[cur.index(n, 0, y, x)]) acc = std::clamp(acc, lo, hi);
                    next.at(n, 0, y, x) = acc;
                }
            }
        }
        states.push_back(std::move(next));
    }
    Tensor out = states.back();
    states.pop_back();

    return make_result(std::move(out), {depth, weights},
                       [states = std::move(states), neighbour](Node& self) {
        Node& dn = *self.parents[0];
        Node& wn = *self.parents[1];
        const Shape sd = dn.value.shape();
        const Tensor& w = wn.value;
        Tensor g = self.grad;
        for (std::size_t it = states.size(); it-- > 0;) {
            const Tensor& prev = states[it];
            Tensor gprev(sd, 0.0);
            for (int n = 0; n < sd.n; ++n) {
                for (int y = 0; y < sd.h; ++y) {
                    for (int x = 0; x < sd.w; ++x) {
                        const double go = g.at(n, 0, y, x);
                        for (int k = 0; k < kNeighbours; ++k) {
                            int yy, xx;
                            neighbour(y, x, k, yy, xx);
                            gprev.at(n, 0, yy, xx) += w.at(n, k, y, x) * go;
                            if (wn.requires_grad)
                                wn.grad_buffer().at(n, k, y, x) += go * prev.at(n, 0, yy, xx);
                        }
                    }
                }
            }
            g = std::move(gprev);
        }
        if (dn.requires_grad) {
            Tensor& gd = dn.grad_buffer();
            for (std::size_t i = 0; i < gd.size(); ++i) gd[i] += g[i];
        }
    });
}

UpsampleMaskHead::UpsampleMaskHead(int feature_channels, Rng& rng)
    : conv1_(feature_channels, feature_channels, 3, 1, rng),
      conv2_(feature_channels, kUpsampleMaskChannels, 1, 1, rng, 0.25) {}

Var UpsampleMaskHead::operator()(const Var& features_quarter) const {
    return conv2_(relu(conv1_(features_quarter)));
}

void UpsampleMaskHead::collect(ParamList& out, const std::string& prefix) {
    conv1_.collect(out, prefix + ".conv1");
    conv2_.collect(out, prefix + ".conv2");
}

SpnRefiner::SpnRefiner(int feature_channels, Rng& rng)
    : conv1_(feature_channels, feature_channels, 3, 1, rng),
      conv2_(feature_channels, kNeighbours, 3, 1, rng) {}

Var SpnRefiner::affinities(const Var& features_full) const {
    return normalize_affinities(conv2_(relu(conv1_(features_full))));
}

Var SpnRefiner::refine(const Var& depth_full, const Var& features_full, int iterations) const {
    const Shape sd = depth_full.shape();
    const Shape sf = features_full.shape();
    require(sd.n == sf.n && sd.h == sf.h && sd.w == sf.w, ErrorCode::kShapeMismatch,
            "spn_refine: depth " + sd.str() + " vs features " + sf.str());
    return spn_propagate(depth_full, affinities(features_full), iterations);
}

void SpnRefiner::collect(ParamList& out, const std::string& prefix) {
    conv1_.collect(out, prefix + ".conv1");
    conv2_.collect(out, prefix + ".conv2");
}

Var spn_refine(const SpnRefiner& spn, const Var& depth_full, const Var& features_full,
               int iterations) {
    return spn.refine(depth_full, features_full, iterations);
}

}  // namespace depthdiff
