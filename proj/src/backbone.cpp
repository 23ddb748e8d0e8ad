// Copyright (C) 2026 The depthdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "depthdiff/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <vector>

namespace depthdiff {

namespace {

class ConvEncoder final : public Encoder {
public:
    ConvEncoder(const BackboneWidths& w, Rng& rng)
        : down1_(w.full, w.half, 3, 2, rng),
          enc1_(w.half, w.half, 3, 1, rng),
          down2_(w.half, w.quarter, 3, 2, rng),
          enc2_(w.quarter, w.quarter, 3, 1, rng),
          down3_(w.quarter, w.eighth, 3, 2, rng),
          enc3_(w.eighth, w.eighth, 3, 1, rng) {}

    EncoderPyramid encode(const Var& stem) const override {
        EncoderPyramid p;
        p.half = relu(enc1_(relu(down1_(stem))));
        p.quarter = relu(enc2_(relu(down2_(p.half))));
        p.eighth = relu(enc3_(relu(down3_(p.quarter))));
        return p;
    }

    void collect(ParamList& out, const std::string& prefix) override {
        down1_.collect(out, prefix + ".down1");
        enc1_.collect(out, prefix + ".enc1");
        down2_.collect(out, prefix + ".down2");
        enc2_.collect(out, prefix + ".enc2");
        down3_.collect(out, prefix + ".down3");
        enc3_.collect(out, prefix + ".enc3");
    }

    std::string kind() const override { return "conv"; }

private:
    Conv2d down1_, enc1_, down2_, enc2_, down3_, enc3_;
};

// Nearest-sample fill by multi-source breadth-first search (8-connected), so
// the cost stays linear in the pixel count for any density. Writes the filled
// values of plane `src` into plane `dst`; returns false when there are no samples.
bool nearest_fill(Tensor& t, int n, int src, int mask_c, int dst) {
    const Shape s = t.shape();
    std::vector<int> owner(static_cast<std::size_t>(s.h) * s.w, -1);
    std::deque<int> queue;
    for (int i = 0; i < s.h * s.w; ++i) {
        if (t.at(n, mask_c, i / s.w, i % s.w) > 0.5) {
            owner[static_cast<std::size_t>(i)] = i;
            queue.push_back(i);
        }
    }
    if (queue.empty()) return false;
    while (!queue.empty()) {
        const int i = queue.front();
        queue.pop_front();
        const int y = i / s.w, x = i % s.w;
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
                const int yy = y + dy, xx = x + dx;
                if (yy < 0 || yy >= s.h || xx < 0 || xx >= s.w) continue;
                const int j = yy * s.w + xx;
                if (owner[static_cast<std::size_t>(j)] >= 0) continue;
                owner[static_cast<std::size_t>(j)] = owner[static_cast<std::size_t>(i)];
                queue.push_back(j);
            }
        }
    }
    for (int i = 0; i < s.h * s.w; ++i) {
        const int o = owner[static_cast<std::size_t>(i)];
        t.at(n, dst, i / s.w, i % s.w) = t.at(n, src, o / s.w, o % s.w);
    }
    return true;
}

}  // namespace

std::unique_ptr<Encoder> make_encoder(const std::string& kind, const BackboneWidths& widths,
                                      Rng& rng) {
    if (kind == "conv") return std::make_unique<ConvEncoder>(widths, rng);
    fail(ErrorCode::kInvalidArgument, "unknown encoder kind '" + kind + "'");
}

Backbone::Backbone(const BackboneWidths& widths, double d_min, double d_max, Rng& rng,
                   const std::string& encoder_kind)
    : widths_(widths), d_min_(d_min), d_max_(d_max) {
    require(widths.full >= 2 && widths.full % 2 == 0 && widths.half > 0 && widths.quarter > 0 &&
                widths.eighth > 0,
            ErrorCode::kInvalidArgument, "backbone widths must be positive, full width even");
    require(d_max > d_min && d_min > 0.0, ErrorCode::kInvalidArgument,
            "backbone depth range must satisfy 0 < d_min < d_max");
    const int stem = widths.full / 2;
    rgb_stem_ = Conv2d(3, stem, 3, 1, rng);
    sparse_stem_ = Conv2d(3, stem, 3, 1, rng);
    fuse_ = Conv2d(2 * stem, widths.full, 3, 1, rng);
    encoder_ = make_encoder(encoder_kind, widths, rng);
    dec_quarter_ = Conv2d(widths.eighth + widths.quarter, widths.quarter, 3, 1, rng);
    feat_quarter_ = Conv2d(widths.quarter, widths.quarter, 3, 1, rng);
    dec_half_ = Conv2d(widths.quarter + widths.half, widths.half, 3, 1, rng);
    dec_full_ = Conv2d(widths.half + widths.full, widths.full, 3, 1, rng);
    depth_head_ = Conv2d(widths.full, 1, 3, 1, rng, 0.1);
}

BackboneOutput Backbone::extract(const Var& image, const Tensor& sparse_mm,
                                 const Tensor& sparse_mask) const {
    const Shape si = image.shape();
    require(si.c == 3, ErrorCode::kShapeMismatch, "backbone: image must have 3 channels");
    require(si.h % 4 == 0 && si.w % 4 == 0, ErrorCode::kInvalidArgument,
            "backbone: image " + std::to_string(si.h) + "x" + std::to_string(si.w) +
                " is not divisible by 4");
    const Shape sd{si.n, 1, si.h, si.w};
    require_same_shape(sparse_mm.shape(), sd, "backbone sparse depth");
    require_same_shape(sparse_mask.shape(), sd, "backbone sparse mask");

    // Sparse input as (normalized depth, validity, nearest-sample fill). The
    // validity channel keeps a hole and a genuine d_min reading apart; the
    // fill is also the prior the depth head refines.
    Tensor sparse(Shape{si.n, 3, si.h, si.w}, 0.0);
    const double span = d_max_ - d_min_;
    for (int n = 0; n < si.n; ++n) {
        for (int y = 0; y < si.h; ++y) {
            for (int x = 0; x < si.w; ++x) {
                const double d = sparse_mm.at(n, 0, y, x);
                const bool valid = sparse_mask.at(n, 0, y, x) > 0.5;
                require(!(d < 0.0), ErrorCode::kInvalidArgument,
                        "backbone: negative sparse depth at (" + std::to_string(y) + "," +
                            std::to_string(x) + ")");
                if (!valid) continue;
                require(std::isfinite(d), ErrorCode::kNonFinite, "backbone: non-finite sparse depth");
                const double z = std::clamp(2.0 * (d - d_min_) / span - 1.0, -1.0, 1.0);
                sparse.at(n, 0, y, x) = z;
                sparse.at(n, 1, y, x) = 1.0;
            }
        }
        nearest_fill(sparse, n, 0, 1, 2);
    }
    Tensor prior(sd, 0.0);
    for (int n = 0; n < si.n; ++n) {
        std::copy_n(sparse.plane(n, 2), sd.plane(), prior.plane(n, 0));
    }

    Var rgb = relu(rgb_stem_(image));
    Var sp = relu(sparse_stem_(constant(std::move(sparse))));
    Var e0 = relu(fuse_(concat_channels({rgb, sp})));
    EncoderPyramid p = encoder_->encode(e0);

    const Shape sq = p.quarter.shape();
    const Shape sh = p.half.shape();
    Var d2 = relu(dec_quarter_(
        concat_channels({upsample_nearest(p.eighth, sq.h, sq.w), p.quarter})));
    Var d1 = relu(dec_half_(concat_channels({upsample_nearest(d2, sh.h, sh.w), p.half})));
    Var d0 = relu(dec_full_(concat_channels({upsample_nearest(d1, si.h, si.w), e0})));

    BackboneOutput out;
    out.features_quarter = relu(feat_quarter_(d2));
    out.features_full = d0;
    out.coarse_depth = add(depth_head_(d0), constant(std::move(prior)));
    return out;
}

void Backbone::collect(ParamList& out, const std::string& prefix) {
    rgb_stem_.collect(out, prefix + ".rgb_stem");
    sparse_stem_.collect(out, prefix + ".sparse_stem");
    fuse_.collect(out, prefix + ".fuse");
    encoder_->collect(out, prefix + ".encoder");
    dec_quarter_.collect(out, prefix + ".dec_quarter");
    feat_quarter_.collect(out, prefix + ".feat_quarter");
    dec_half_.collect(out, prefix + ".dec_half");
    dec_full_.collect(out, prefix + ".dec_full");
    depth_head_.collect(out, prefix + ".depth_head");
}

}  // namespace depthdiff
