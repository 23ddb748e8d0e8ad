// Copyright (C) 2026 The depthdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>

#include "depthdiff/nn.hpp"

namespace depthdiff {

struct BackboneWidths {
    int full = 32;     // C_f, also the full-resolution feature width
    int half = 48;
    int quarter = 64;  // C_q, also the quarter-resolution feature width
    int eighth = 96;
};

struct BackboneOutput {
    Var coarse_depth;      // (N, 1, H, W), normalized
    Var features_full;     // (N, C_f, H, W)
    Var features_quarter;  // (N, C_q, H/4, W/4)
};

/// Multi-scale features of the fused stem, finest first.
struct EncoderPyramid {
    Var half;
    Var quarter;
    Var eighth;
};

/// Downsampling trunk between the fused stem and the decoder.
class Encoder {
public:
    virtual ~Encoder() = default;
    virtual EncoderPyramid encode(const Var& stem) const = 0;
    virtual void collect(ParamList& out, const std::string& prefix) = 0;
    virtual std::string kind() const = 0;
};

std::unique_ptr<Encoder> make_encoder(const std::string& kind, const BackboneWidths& widths,
                                      Rng& rng);

/// RGB + sparse-depth encoder-decoder with skip connections.
class Backbone {
public:
    Backbone() = default;
    Backbone(const BackboneWidths& widths, double d_min, double d_max, Rng& rng,
             const std::string& encoder_kind = "conv");

    /// image: (N,3,H,W) in [0,1]; sparse_mm: (N,1,H,W) millimetres, 0 where
    /// sparse_mask is 0. H and W must be divisible by 4.
    BackboneOutput extract(const Var& image, const Tensor& sparse_mm,
                           const Tensor& sparse_mask) const;

    const BackboneWidths& widths() const { return widths_; }
    void collect(ParamList& out, const std::string& prefix);

private:
    BackboneWidths widths_;
    double d_min_ = 0.0;
    double d_max_ = 1.0;
    Conv2d rgb_stem_, sparse_stem_, fuse_;
    std::unique_ptr<Encoder> encoder_;
    Conv2d dec_quarter_, feat_quarter_, dec_half_, dec_full_, depth_head_;
};

}  // namespace depthdiff
