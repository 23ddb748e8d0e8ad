// Copyright (C) 2026 The depthdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "depthdiff/nn.hpp"

#include <cmath>

namespace depthdiff {

std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts) {
    std::uint64_t h = 0x9E3779B97F4A7C15ull;
    for (std::uint64_t p : parts) {
        std::uint64_t z = h ^ (p + 0x9E3779B97F4A7C15ull + (h << 6) + (h >> 2));
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        h = z ^ (z >> 31);
    }
    return h;
}

Tensor gaussian_noise(const Shape& shape, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    Tensor t(shape);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = nd(rng);
    return t;
}

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, int stride, Rng& rng,
               double init_gain, bool with_bias)
    : stride_(stride), pad_(kernel / 2) {
    require(in_channels > 0 && out_channels > 0 && kernel % 2 == 1 && stride >= 1,
            ErrorCode::kInvalidArgument, "Conv2d: bad geometry");
    const double fan_in = static_cast<double>(in_channels) * kernel * kernel;
    const double bound = init_gain / std::sqrt(fan_in);
    std::uniform_real_distribution<double> u(-bound, bound);
    Tensor w(Shape{out_channels, in_channels, kernel, kernel});
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = u(rng);
    weight_ = Var(std::move(w), true);
    if (with_bias) {
        Tensor b(Shape{1, out_channels, 1, 1});
        for (std::size_t i = 0; i < b.size(); ++i) b[i] = u(rng);
        bias_ = Var(std::move(b), true);
    }
}

Var Conv2d::operator()(const Var& x) const { return conv2d(x, weight_, bias_, stride_, pad_); }

void Conv2d::collect(ParamList& out, const std::string& prefix) {
    out.push_back({prefix + ".weight", &weight_});
    if (bias_.defined()) out.push_back({prefix + ".bias", &bias_});
}

void Conv2d::zero_parameters() {
    weight_.mutable_value().fill(0.0);
    if (bias_.defined()) bias_.mutable_value().fill(0.0);
}

}  // namespace depthdiff
