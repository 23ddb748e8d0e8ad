// Copyright (C) 2026 The depthdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "depthdiff/autograd.hpp"

namespace depthdiff {

/// Seeded engine shared by every stochastic routine in the library.
using Rng = std::mt19937_64;

/// Mixes several integers into one well-distributed seed (splitmix64 chain).
std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts);

/// Standard normal tensor; a pure function of (shape, seed).
Tensor gaussian_noise(const Shape& shape, std::uint64_t seed);

struct NamedParam {
    std::string name;
    Var* var;
};
using ParamList = std::vector<NamedParam>;

/// Square-kernel convolution with "same" padding for stride 1.
class Conv2d {
public:
    Conv2d() = default;
    Conv2d(int in_channels, int out_channels, int kernel, int stride, Rng& rng,
           double init_gain = 1.0, bool with_bias = true);

    Var operator()(const Var& x) const;

    int in_channels() const { return weight_.shape().c; }
    int out_channels() const { return weight_.shape().n; }
    int kernel() const { return weight_.shape().h; }

    Var& weight() { return weight_; }
    Var& bias() { return bias_; }
    const Var& weight() const { return weight_; }
    const Var& bias() const { return bias_; }

    void collect(ParamList& out, const std::string& prefix);
    void zero_parameters();

private:
    Var weight_;
    Var bias_;
    int stride_ = 1;
    int pad_ = 0;
};

}  // namespace depthdiff
