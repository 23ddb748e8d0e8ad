// Copyright (C) 2026 The depthdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "depthdiff/autograd.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace depthdiff {

namespace {

thread_local bool g_grad_enabled = true;

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

bool wants(const Node& self, std::size_t i) { return self.parents[i]->requires_grad; }

}  // namespace

Tensor& Node::grad_buffer() {
    if (grad.empty()) grad = Tensor(value.shape(), 0.0);
    return grad;
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
}

Tensor Var::grad() const {
    if (!node_) return {};
    if (node_->grad.empty()) return Tensor(node_->value.shape(), 0.0);
    return node_->grad;
}

void Var::zero_grad() {
    if (node_) node_->grad = Tensor();
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() noexcept { return g_grad_enabled; }

Var make_result(Tensor value, const std::vector<Var>& inputs,
                std::function<void(Node& self)> backward_fn) {
    Var out(std::move(value), false);
    if (!g_grad_enabled) return out;
    bool any = std::any_of(inputs.begin(), inputs.end(),
                           [](const Var& v) { return v.requires_grad(); });
    if (!any) return out;
    Node* n = out.node();
    n->requires_grad = true;
    n->parents.reserve(inputs.size());
    for (const auto& in : inputs) n->parents.push_back(in.shared());
    n->backward = std::move(backward_fn);
    return out;
}

void backward(const Var& root) {
    require(root.defined() && root.value().size() == 1, ErrorCode::kInvalidArgument,
            "backward() needs a single-element root");
    if (!root.requires_grad()) return;

    // Iterative post-order DFS; graphs from unrolled samplers are deep.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root.node(), 0);
    seen.insert(root.node());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root.node()->grad_buffer()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward && !n->grad.empty()) n->backward(*n);
    }
}

Var constant(Tensor value) { return Var(std::move(value), false); }

Var detach(const Var& x) { return Var(x.value(), false); }

Var add(const Var& a, const Var& b) {
    require_same_shape(a.shape(), b.shape(), "add");
    Tensor out = a.value();
    const double* pb = b.value().data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += pb[i];
    return make_result(std::move(out), {a, b}, [](Node& self) {
        for (std::size_t k = 0; k < 2; ++k) {
            if (!wants(self, k)) continue;
            Tensor& g = self.parents[k]->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
    });
}

Var sub(const Var& a, const Var& b) {
    require_same_shape(a.shape(), b.shape(), "sub");
    Tensor out = a.value();
    const double* pb = b.value().data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= pb[i];
    return make_result(std::move(out), {a, b}, [](Node& self) {
        if (wants(self, 0)) {
            Tensor& g = self.parents[0]->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (wants(self, 1)) {
            Tensor& g = self.parents[1]->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
        }
    });
}

Var mul(const Var& a, const Var& b) {
    require_same_shape(a.shape(), b.shape(), "mul");
    Tensor out = a.value();
    const double* pb = b.value().data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= pb[i];
    return make_result(std::move(out), {a, b}, [](Node& self) {
        const Tensor& va = self.parents[0]->value;
        const Tensor& vb = self.parents[1]->value;
        if (wants(self, 0)) {
            Tensor& g = self.parents[0]->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * vb[i];
        }
        if (wants(self, 1)) {
            Tensor& g = self.parents[1]->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * va[i];
        }
    });
}

Var scale(const Var& a, double s) {
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s;
    return make_result(std::move(out), {a}, [s](Node& self) {
        Tensor& g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * self.grad[i];
    });
}

Var add_scalar(const Var& a, double s) {
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += s;
    return make_result(std::move(out), {a}, [](Node& self) {
        Tensor& g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
}

Var add_broadcast(const Var& a, const Var& b) {
    const Shape sa = a.shape();
    const Shape sb = b.shape();
    require(sb.c == sa.c && sb.h == 1 && sb.w == 1 && (sb.n == sa.n || sb.n == 1),
            ErrorCode::kShapeMismatch,
            "add_broadcast: cannot broadcast " + sb.str() + " onto " + sa.str());
    Tensor out = a.value();
    const std::size_t hw = sa.plane();
    for (int n = 0; n < sa.n; ++n) {
        for (int c = 0; c < sa.c; ++c) {
            const double v = b.value().at(sb.n == 1 ? 0 : n, c, 0, 0);
            double* p = out.plane(n, c);
            for (std::size_t i = 0; i < hw; ++i) p[i] += v;
        }
    }
    return make_result(std::move(out), {a, b}, [sa, sb](Node& self) {
        if (wants(self, 0)) {
            Tensor& g = self.parents[0]->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (wants(self, 1)) {
            Tensor& g = self.parents[1]->grad_buffer();
            const std::size_t hw = sa.plane();
            for (int n = 0; n < sa.n; ++n) {
                for (int c = 0; c < sa.c; ++c) {
                    const double* p = self.grad.plane(n, c);
                    double s = 0.0;
                    for (std::size_t i = 0; i < hw; ++i) s += p[i];
                    g.at(sb.n == 1 ? 0 : n, c, 0, 0) += s;
                }
            }
        }
    });
}

namespace {

template <class Fwd, class Deriv>
Var unary(const Var& x, Fwd fwd, Deriv deriv_from_out_and_in) {
    Tensor out = x.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(out[i]);
    return make_result(std::move(out), {x}, [deriv_from_out_and_in](Node& self) {
        Tensor& g = self.parents[0]->grad_buffer();
        const Tensor& in = self.parents[0]->value;
        for (std::size_t i = 0; i < g.size(); ++i)
            g[i] += self.grad[i] * deriv_from_out_and_in(self.value[i], in[i]);
    });
}

}  // namespace

Var sigmoid(const Var& x) {
    return unary(
        x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
        [](double y, double) { return y * (1.0 - y); });
}

Var tanh(const Var& x) {
    return unary(
        x, [](double v) { return std::tanh(v); }, [](double y, double) { return 1.0 - y * y; });
}

Var relu(const Var& x) {
    return unary(
        x, [](double v) { return v > 0.0 ? v : 0.0; },
        [](double, double in) { return in > 0.0 ? 1.0 : 0.0; });
}

Var clamp(const Var& x, double lo, double hi) {
    return unary(
        x, [lo, hi](double v) { return v < lo ? lo : (v > hi ? hi : v); },
        [lo, hi](double, double in) { return in >= lo && in <= hi ? 1.0 : 0.0; });
}

Var silu(const Var& x) {
    return unary(
        x, [](double v) { return v / (1.0 + std::exp(-v)); },
        [](double, double in) {
            const double s = 1.0 / (1.0 + std::exp(-in));
            return s * (1.0 + in * (1.0 - s));
        });
}

namespace {

struct ConvGeom {
    int cin, h, w, k, stride, pad, ho, wo;
    int rows() const { return cin * k * k; }
    int cols() const { return ho * wo; }
};

void im2col(const double* x, const ConvGeom& g, double* col) {
    for (int c = 0; c < g.cin; ++c) {
        const double* xc = x + static_cast<std::size_t>(c) * g.h * g.w;
        for (int ky = 0; ky < g.k; ++ky) {
            for (int kx = 0; kx < g.k; ++kx) {
                double* row = col + static_cast<std::size_t>((c * g.k + ky) * g.k + kx) * g.cols();
                for (int oy = 0; oy < g.ho; ++oy) {
                    const int iy = oy * g.stride - g.pad + ky;
                    double* r = row + static_cast<std::size_t>(oy) * g.wo;
                    if (iy < 0 || iy >= g.h) {
                        std::fill(r, r + g.wo, 0.0);
                        continue;
                    }
                    const double* xr = xc + static_cast<std::size_t>(iy) * g.w;
                    for (int ox = 0; ox < g.wo; ++ox) {
                        const int ix = ox * g.stride - g.pad + kx;
                        r[ox] = (ix >= 0 && ix < g.w) ? xr[ix] : 0.0;
                    }
                }
            }
        }
    }
}

void col2im_add(const double* col, const ConvGeom& g, double* dx) {
    for (int c = 0; c < g.cin; ++c) {
        double* xc = dx + static_cast<std::size_t>(c) * g.h * g.w;
        for (int ky = 0; ky < g.k; ++ky) {
            for (int kx = 0; kx < g.k; ++kx) {
                const double* row =
                    col + static_cast<std::size_t>((c * g.k + ky) * g.k + kx) * g.cols();
                for (int oy = 0; oy < g.ho; ++oy) {
                    const int iy = oy * g.stride - g.pad + ky;
                    if (iy < 0 || iy >= g.h) continue;
                    const double* r = row + static_cast<std::size_t>(oy) * g.wo;
                    double* xr = xc + static_cast<std::size_t>(iy) * g.w;
                    for (int ox = 0; ox < g.wo; ++ox) {
                        const int ix = ox * g.stride - g.pad + kx;
                        if (ix >= 0 && ix < g.w) xr[ix] += r[ox];
                    }
                }
            }
        }
    }
}

}  // namespace

Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad) {
    const Shape sx = x.shape();
    const Shape sw = weight.shape();
    require(sw.h == sw.w, ErrorCode::kInvalidArgument, "conv2d: kernel must be square");
    require(sx.c == sw.c, ErrorCode::kShapeMismatch,
            "conv2d: input has " + std::to_string(sx.c) + " channels, weight expects " +
                std::to_string(sw.c));
    require(stride >= 1 && pad >= 0, ErrorCode::kInvalidArgument, "conv2d: bad stride/pad");
    if (bias.defined()) {
        require(bias.shape() == (Shape{1, sw.n, 1, 1}), ErrorCode::kShapeMismatch,
                "conv2d: bias shape " + bias.shape().str());
    }
    ConvGeom g{sx.c, sx.h, sx.w, sw.h, stride, pad, 0, 0};
    g.ho = (sx.h + 2 * pad - g.k) / stride + 1;
    g.wo = (sx.w + 2 * pad - g.k) / stride + 1;
    require(g.ho > 0 && g.wo > 0, ErrorCode::kShapeMismatch, "conv2d: empty output");
    const int cout = sw.n;
    const bool direct = (g.k == 1 && stride == 1 && pad == 0);

    Tensor out(Shape{sx.n, cout, g.ho, g.wo});
    ConstMapMat wmat(weight.value().data(), cout, g.rows());
    std::vector<double> col(direct ? 0 : static_cast<std::size_t>(g.rows()) * g.cols());
    for (int n = 0; n < sx.n; ++n) {
        const double* xn = x.value().plane(n, 0);
        if (!direct) im2col(xn, g, col.data());
        ConstMapMat cmat(direct ? xn : col.data(), g.rows(), g.cols());
        MapMat omat(out.plane(n, 0), cout, g.cols());
        omat.noalias() = wmat * cmat;
        if (bias.defined()) {
            for (int c = 0; c < cout; ++c) omat.row(c).array() += bias.value()[c];
        }
    }

    std::vector<Var> inputs{x, weight};
    if (bias.defined()) inputs.push_back(bias);
    const bool has_bias = bias.defined();
    return make_result(std::move(out), inputs, [g, cout, direct, has_bias](Node& self) {
        Node& xn = *self.parents[0];
        Node& wn = *self.parents[1];
        const int batch = xn.value.shape().n;
        std::vector<double> col(direct ? 0 : static_cast<std::size_t>(g.rows()) * g.cols());
        std::vector<double> dcol(col.size());
        ConstMapMat wmat(wn.value.data(), cout, g.rows());
        for (int n = 0; n < batch; ++n) {
            ConstMapMat gout(self.grad.plane(n, 0), cout, g.cols());
            if (wn.requires_grad) {
                const double* xin = xn.value.plane(n, 0);
                if (!direct) im2col(xin, g, col.data());
                ConstMapMat cmat(direct ? xin : col.data(), g.rows(), g.cols());
                MapMat gw(wn.grad_buffer().data(), cout, g.rows());
                gw.noalias() += gout * cmat.transpose();
            }
            if (has_bias && self.parents[2]->requires_grad) {
                Tensor& gb = self.parents[2]->grad_buffer();
                // plain loop: Eigen's vectorised sum groups terms by buffer
                // alignment, which would make results depend on the heap
                const double* row = self.grad.plane(n, 0);
                for (int c = 0; c < cout; ++c) {
                    double acc = 0.0;
                    for (int j = 0; j < g.cols(); ++j) acc += row[static_cast<std::size_t>(c) * g.cols() + j];
                    gb[c] += acc;
                }
            }
            if (xn.requires_grad) {
                double* gx = xn.grad_buffer().plane(n, 0);
                if (direct) {
                    MapMat gxm(gx, g.rows(), g.cols());
                    gxm.noalias() += wmat.transpose() * gout;
                } else {
                    MapMat dc(dcol.data(), g.rows(), g.cols());
                    dc.noalias() = wmat.transpose() * gout;
                    col2im_add(dcol.data(), g, gx);
                }
            }
        }
    });
}

Var concat_channels(const std::vector<Var>& parts) {
    require(!parts.empty(), ErrorCode::kInvalidArgument, "concat_channels of nothing");
    Shape s = parts[0].shape();
    int total = 0;
    for (const auto& p : parts) {
        const Shape ps = p.shape();
        require(ps.n == s.n && ps.h == s.h && ps.w == s.w, ErrorCode::kShapeMismatch,
                "concat_channels: " + ps.str() + " vs " + s.str());
        total += ps.c;
    }
    s.c = total;
    Tensor out(s);
    const std::size_t hw = s.plane();
    for (int n = 0; n < s.n; ++n) {
        int c0 = 0;
        for (const auto& p : parts) {
            const int pc = p.shape().c;
            std::copy_n(p.value().plane(n, 0), pc * hw, out.plane(n, c0));
            c0 += pc;
        }
    }
    return make_result(std::move(out), parts, [](Node& self) {
        const Shape so = self.value.shape();
        const std::size_t hw = so.plane();
        for (int n = 0; n < so.n; ++n) {
            int c0 = 0;
            for (auto& pp : self.parents) {
                const int pc = pp->value.shape().c;
                if (pp->requires_grad) {
                    double* g = pp->grad_buffer().plane(n, 0);
                    const double* src = self.grad.plane(n, c0);
                    for (std::size_t i = 0; i < pc * hw; ++i) g[i] += src[i];
                }
                c0 += pc;
            }
        }
    });
}

Var slice_channels(const Var& x, int c0, int count) {
    const Shape sx = x.shape();
    require(c0 >= 0 && count > 0 && c0 + count <= sx.c, ErrorCode::kInvalidArgument,
            "slice_channels out of range");
    Shape s = sx;
    s.c = count;
    Tensor out(s);
    const std::size_t hw = s.plane();
    for (int n = 0; n < s.n; ++n) std::copy_n(x.value().plane(n, c0), count * hw, out.plane(n, 0));
    return make_result(std::move(out), {x}, [c0, count](Node& self) {
        const Shape so = self.value.shape();
        const std::size_t hw = so.plane();
        Tensor& g = self.parents[0]->grad_buffer();
        for (int n = 0; n < so.n; ++n) {
            double* dst = g.plane(n, c0);
            const double* src = self.grad.plane(n, 0);
            for (std::size_t i = 0; i < count * hw; ++i) dst[i] += src[i];
        }
    });
}

Var upsample_nearest(const Var& x, int h, int w) {
    const Shape sx = x.shape();
    require(h > 0 && w > 0, ErrorCode::kInvalidArgument, "upsample_nearest: bad size");
    std::vector<int> ys(h), xs(w);
    for (int i = 0; i < h; ++i) ys[i] = static_cast<int>(static_cast<long long>(i) * sx.h / h);
    for (int j = 0; j < w; ++j) xs[j] = static_cast<int>(static_cast<long long>(j) * sx.w / w);
    Tensor out(Shape{sx.n, sx.c, h, w});
    for (int n = 0; n < sx.n; ++n)
        for (int c = 0; c < sx.c; ++c)
            for (int i = 0; i < h; ++i)
                for (int j = 0; j < w; ++j) out.at(n, c, i, j) = x.value().at(n, c, ys[i], xs[j]);
    return make_result(std::move(out), {x}, [ys, xs](Node& self) {
        const Shape so = self.value.shape();
        Tensor& g = self.parents[0]->grad_buffer();
        for (int n = 0; n < so.n; ++n)
            for (int c = 0; c < so.c; ++c)
                for (int i = 0; i < so.h; ++i)
                    for (int j = 0; j < so.w; ++j) g.at(n, c, ys[i], xs[j]) += self.grad.at(n, c, i, j);
    });
}

Var downsample_bilinear(const Var& x, int factor) {
    const Shape sx = x.shape();
    require(factor >= 2 && factor % 2 == 0, ErrorCode::kInvalidArgument,
            "downsample_bilinear: factor must be even");
    require(sx.h % factor == 0 && sx.w % factor == 0, ErrorCode::kShapeMismatch,
            "downsample_bilinear: " + sx.str() + " not divisible by " + std::to_string(factor));
    // Sample points fall halfway between source pixels f*i + f/2 - 1 and f*i + f/2.
    const int off = factor / 2 - 1;
    Shape s{sx.n, sx.c, sx.h / factor, sx.w / factor};
    Tensor out(s);
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int i = 0; i < s.h; ++i)
                for (int j = 0; j < s.w; ++j) {
                    const int y = i * factor + off;
                    const int xx = j * factor + off;
                    const Tensor& v = x.value();
                    out.at(n, c, i, j) = 0.25 * (v.at(n, c, y, xx) + v.at(n, c, y, xx + 1) +
                                                 v.at(n, c, y + 1, xx) + v.at(n, c, y + 1, xx + 1));
                }
    return make_result(std::move(out), {x}, [factor, off](Node& self) {
        const Shape so = self.value.shape();
        Tensor& g = self.parents[0]->grad_buffer();
        for (int n = 0; n < so.n; ++n)
            for (int c = 0; c < so.c; ++c)
                for (int i = 0; i < so.h; ++i)
                    for (int j = 0; j < so.w; ++j) {
                        const double d = 0.25 * self.grad.at(n, c, i, j);
                        const int y = i * factor + off;
                        const int xx = j * factor + off;
                        g.at(n, c, y, xx) += d;
                        g.at(n, c, y, xx + 1) += d;
                        g.at(n, c, y + 1, xx) += d;
                        g.at(n, c, y + 1, xx + 1) += d;
                    }
    });
}

Var sum_all(const Var& x) {
    return make_result(Tensor::scalar(x.value().sum()), {x}, [](Node& self) {
        Tensor& g = self.parents[0]->grad_buffer();
        const double d = self.grad[0];
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += d;
    });
}

Var mean_all(const Var& x) {
    const double inv = 1.0 / static_cast<double>(x.value().size());
    return scale(sum_all(x), inv);
}

}  // namespace depthdiff
