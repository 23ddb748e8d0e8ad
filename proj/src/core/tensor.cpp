// Copyright (C) 2026 The depthdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "depthdiff/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace depthdiff {

std::string Shape::str() const {
    std::ostringstream os;
    os << '[' << n << ',' << c << ',' << h << ',' << w << ']';
    return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(shape), data_(shape.numel(), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(shape), data_(std::move(values)) {
    require(data_.size() == shape_.numel(), ErrorCode::kShapeMismatch,
            "tensor value count " + std::to_string(data_.size()) + " does not match shape " +
                shape_.str());
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double Tensor::max_abs() const noexcept {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
}

double Tensor::sum() const noexcept {
    double s = 0.0;
    for (double v : data_) s += v;
    return s;
}

Tensor Tensor::slice_batch(int n0, int count) const {
    require(n0 >= 0 && count >= 0 && n0 + count <= shape_.n, ErrorCode::kInvalidArgument,
            "batch slice out of range");
    Shape s = shape_;
    s.n = count;
    const std::size_t per = static_cast<std::size_t>(shape_.c) * shape_.plane();
    std::vector<double> v(data_.begin() + static_cast<std::ptrdiff_t>(per * n0),
                          data_.begin() + static_cast<std::ptrdiff_t>(per * (n0 + count)));
    return Tensor(s, std::move(v));
}

void require_same_shape(const Shape& a, const Shape& b, const char* what) {
    if (!(a == b)) {
        fail(ErrorCode::kShapeMismatch,
             std::string(what) + ": shape " + a.str() + " vs " + b.str());
    }
}

Tensor stack_batch(std::span<const Tensor> parts) {
    require(!parts.empty(), ErrorCode::kInvalidArgument, "stack_batch of nothing");
    Shape s = parts[0].shape();
    for (const auto& p : parts) {
        Shape ps = p.shape();
        require(ps.c == s.c && ps.h == s.h && ps.w == s.w, ErrorCode::kShapeMismatch,
                "stack_batch shape mismatch");
    }
    int total = 0;
    for (const auto& p : parts) total += p.shape().n;
    s.n = total;
    std::vector<double> v;
    v.reserve(s.numel());
    for (const auto& p : parts) v.insert(v.end(), p.values().begin(), p.values().end());
    return Tensor(s, std::move(v));
}

Tensor Tensor::crop(int y0, int x0, int h, int w) const {
    require(y0 >= 0 && x0 >= 0 && h > 0 && w > 0 && y0 + h <= shape_.h && x0 + w <= shape_.w,
            ErrorCode::kInvalidArgument, "crop window outside " + shape_.str());
    Tensor out(Shape{shape_.n, shape_.c, h, w});
    for (int n = 0; n < shape_.n; ++n) {
        for (int c = 0; c < shape_.c; ++c) {
            for (int y = 0; y < h; ++y) {
                const double* src = data_.data() + index(n, c, y0 + y, x0);
                std::copy(src, src + w, out.data() + out.index(n, c, y, 0));
            }
        }
    }
    return out;
}

}  // namespace depthdiff
