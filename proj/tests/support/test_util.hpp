// Copyright (C) 2026 The depthdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "depthdiff/autograd.hpp"
#include "depthdiff/nn.hpp"

namespace depthdiff::test {

inline Tensor uniform_tensor(const Shape& shape, std::uint64_t seed, double lo = -1.0,
                             double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    Tensor t(shape);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = u(rng);
    return t;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline bool bit_equal(const Tensor& a, const Tensor& b) {
    if (!(a.shape() == b.shape())) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] != b[i] && !(std::isnan(a[i]) && std::isnan(b[i]))) return false;
    }
    return true;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("depthdiff_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

// Central-difference check of d f / d leaves. Returns
// |analytic - numeric|_2 / max(|numeric|_2, 1e-10) over all leaf entries.
// f must rebuild the graph from the current leaf values on every call.
inline double gradcheck(const std::function<Var()>& f, const std::vector<Var*>& leaves,
                        double h = 1e-6) {
    for (Var* v : leaves) v->zero_grad();
    Var root = f();
    backward(root);
    std::vector<double> analytic, numeric;
    for (Var* v : leaves) {
        const Tensor g = v->grad();
        for (std::size_t i = 0; i < g.size(); ++i) analytic.push_back(g[i]);
    }
    NoGradGuard guard;
    for (Var* v : leaves) {
        Tensor& x = v->mutable_value();
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double keep = x[i];
            x[i] = keep + h;
            const double fp = f().value()[0];
            x[i] = keep - h;
            const double fm = f().value()[0];
            x[i] = keep;
            numeric.push_back((fp - fm) / (2.0 * h));
        }
    }
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        num += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
        den += numeric[i] * numeric[i];
    }
    return std::sqrt(num) / std::max(std::sqrt(den), 1e-10);
}

/// Fixed random projection to a scalar so every output entry matters.
inline Var project(const Var& x, std::uint64_t seed) {
    return sum_all(mul(x, constant(uniform_tensor(x.shape(), seed))));
}

}  // namespace depthdiff::test
