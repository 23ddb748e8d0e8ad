// Copyright (C) 2026 The depthdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "depthdiff/error.hpp"

namespace depthdiff {

/// NCHW extent. Every tensor in the library is rank 4; scalars are 1x1x1x1.
struct Shape {
    int n = 1;
    int c = 1;
    int h = 1;
    int w = 1;

    std::size_t numel() const noexcept {
        return static_cast<std::size_t>(n) * c * h * w;
    }
    std::size_t plane() const noexcept { return static_cast<std::size_t>(h) * w; }

    friend bool operator==(const Shape&, const Shape&) = default;
    std::string str() const;
};

/// Dense row-major double tensor with value semantics.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> values);

    static Tensor scalar(double v) { return Tensor(Shape{}, v); }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }
    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    std::size_t index(int n, int c, int h, int w) const noexcept {
        return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + h) * shape_.w + w;
    }
    double& at(int n, int c, int h, int w) noexcept { return data_[index(n, c, h, w)]; }
    double at(int n, int c, int h, int w) const noexcept { return data_[index(n, c, h, w)]; }

    double* plane(int n, int c) noexcept { return data_.data() + index(n, c, 0, 0); }
    const double* plane(int n, int c) const noexcept { return data_.data() + index(n, c, 0, 0); }

    void fill(double v);
    bool all_finite() const noexcept;
    double max_abs() const noexcept;
    double sum() const noexcept;

    /// Copy of samples [n0, n0 + count) along the batch axis.
    Tensor slice_batch(int n0, int count) const;
    /// Spatial window [y0, y0 + h) x [x0, x0 + w) of every plane.
    Tensor crop(int y0, int x0, int h, int w) const;

private:
    Shape shape_;
    std::vector<double> data_;
};

void require_same_shape(const Shape& a, const Shape& b, const char* what);

/// Stack equally shaped tensors along the batch axis.
Tensor stack_batch(std::span<const Tensor> parts);

}  // namespace depthdiff
