// Copyright (C) 2026 The depthdiff Authors
// SPDX-License-Identifier: Apache-2.0

// Procedural endoscopy-like scenes: a camera inside a swept tube whose wall
// carries folds and smooth bumps, lit by a light co-located with the camera.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "depthdiff/data.hpp"
#include "depthdiff/nn.hpp"

namespace depthdiff {

namespace {

constexpr double kPi = std::numbers::pi;

struct Bump {
    double theta, z, amp, sigma_theta, sigma_z;
};

struct Patch {
    double theta, z, radius;
};

struct Tube {
    double radius = 16.0;
    double ax = 0.0, ay = 0.0;
    double wx = 0.0, wy = 0.0;
    double px = 0.0, py = 0.0;
    double fold_amp = 0.0, fold_len = 40.0, fold_phase = 0.0;
    std::vector<Bump> bumps;

    double centre_x(double z) const { return ax * (std::sin(wx * z + px) - std::sin(px)); }
    double centre_y(double z) const { return ay * (std::sin(wy * z + py) - std::sin(py)); }

    double wall_radius(double theta, double z) const {
        double r = radius * (1.0 + fold_amp * std::sin(2.0 * kPi * z / fold_len + fold_phase));
        for (const auto& b : bumps) {
            double dt = std::remainder(theta - b.theta, 2.0 * kPi);
            const double dz = z - b.z;
            r += b.amp * std::exp(-(dt * dt) / (b.sigma_theta * b.sigma_theta) -
                                  (dz * dz) / (b.sigma_z * b.sigma_z));
        }
        return r;
    }

    // Negative inside the lumen.
    double inside(double xn, double yn, double s) const {
        const double dx = s * xn - centre_x(s);
        const double dy = s * yn - centre_y(s);
        return std::hypot(dx, dy) - wall_radius(std::atan2(dy, dx), s);
    }

    double theta_at(double xn, double yn, double s) const {
        return std::atan2(s * yn - centre_y(s), s * xn - centre_x(s));
    }
};

// Smooth value noise, periodic in u with an integer lattice period so the
// texture closes around the tube.
class ValueNoise {
public:
    explicit ValueNoise(std::uint64_t seed) : seed_(seed) {}

    double operator()(double u, double v, long long period) const {
        const double fu = std::floor(u), fv = std::floor(v);
        const auto iu = static_cast<long long>(fu), iv = static_cast<long long>(fv);
        const double tu = smooth(u - fu), tv = smooth(v - fv);
        auto wrap = [period](long long i) { return ((i % period) + period) % period; };
        const double a = lattice(wrap(iu), iv), b = lattice(wrap(iu + 1), iv);
        const double c = lattice(wrap(iu), iv + 1), d = lattice(wrap(iu + 1), iv + 1);
        return (a * (1 - tu) + b * tu) * (1 - tv) + (c * (1 - tu) + d * tu) * tv;
    }

    double fbm(double u, double v, long long period, int octaves) const {
        double acc = 0.0, amp = 0.5, norm = 0.0;
        for (int o = 0; o < octaves; ++o) {
            acc += amp * (*this)(u, v, period);
            norm += amp;
            u *= 2.0;
            v *= 2.0;
            period *= 2;
            amp *= 0.5;
        }
        return acc / norm;
    }

private:
    static double smooth(double t) { return t * t * (3.0 - 2.0 * t); }
    double lattice(long long i, long long j) const {
        const std::uint64_t h = mix_seed({seed_, static_cast<std::uint64_t>(i),
                                          static_cast<std::uint64_t>(j)});
        return static_cast<double>(h >> 11) * 0x1.0p-53;
    }
    std::uint64_t seed_;
};

double march_depth(const Tube& tube, double xn, double yn, const DepthRange& range) {
    constexpr double kStep = 0.5;
    double s0 = 0.25;
    double f0 = tube.inside(xn, yn, s0);
    if (f0 >= 0.0) return range.d_min;
    while (s0 < range.d_max) {
        const double s1 = std::min(s0 + kStep, range.d_max);
        const double f1 = tube.inside(xn, yn, s1);
        if (f1 >= 0.0) {
            double lo = s0, hi = s1;
            for (int it = 0; it < 60; ++it) {
                const double mid = 0.5 * (lo + hi);
                (tube.inside(xn, yn, mid) < 0.0 ? lo : hi) = mid;
            }
            return std::clamp(0.5 * (lo + hi), range.d_min, range.d_max);
        }
        s0 = s1;
        f0 = f1;
    }
    return range.d_max;  // the lumen continues past the far plane
}

}  // namespace

Intrinsics scene_intrinsics(const SceneConfig& config) {
    Intrinsics k;
    k.fx = k.fy = config.focal_scale * config.width;
    k.cx = 0.5 * (config.width - 1);
    k.cy = 0.5 * (config.height - 1);
    return k;
}

SceneSample synth_scene(std::uint64_t seed, const SceneConfig& config) {
    config.range.validate();
    require(config.height > 0 && config.width > 0 && config.height % 4 == 0 &&
                config.width % 4 == 0,
            ErrorCode::kInvalidArgument, "synth_scene: resolution must be divisible by 4");
    require(config.radius_mm > 0.0 && config.focal_scale > 0.0, ErrorCode::kInvalidArgument,
            "synth_scene: radius and focal scale must be positive");

    Rng rng(mix_seed({seed, 0x7E1Bull}));
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    auto uni = [&](double a, double b) { return a + (b - a) * u01(rng); };

    Tube tube;
    tube.radius = config.radius_mm;
    if (!config.straight) {
        tube.radius = config.radius_mm * uni(1.0 - config.radius_jitter, 1.0 + config.radius_jitter);
        tube.ax = config.bend_amplitude * tube.radius * uni(0.0, 1.0);
        tube.ay = config.bend_amplitude * tube.radius * uni(0.0, 1.0);
        tube.wx = 2.0 * kPi / uni(120.0, 320.0);
        tube.wy = 2.0 * kPi / uni(120.0, 320.0);
        tube.px = uni(0.0, 2.0 * kPi);
        tube.py = uni(0.0, 2.0 * kPi);
        tube.fold_amp = uni(0.0, 0.15);
        tube.fold_len = uni(25.0, 60.0);
        tube.fold_phase = uni(0.0, 2.0 * kPi);
        const int nb = config.max_bumps > 0
                           ? static_cast<int>(std::floor(uni(0.0, config.max_bumps + 1.0 - 1e-9)))
                           : 0;
        for (int b = 0; b < nb; ++b) {
            tube.bumps.push_back({uni(-kPi, kPi), uni(15.0, 150.0),
                                  uni(-0.3, 0.3) * tube.radius, uni(0.3, 0.9), uni(5.0, 20.0)});
        }
    }

    const int H = config.height, W = config.width;
    const Intrinsics K = scene_intrinsics(config);
    SceneSample out;
    out.intrinsics = K;
    out.depth.depth = Tensor(Shape{1, 1, H, W});
    out.depth.mask = Tensor(Shape{1, 1, H, W}, 1.0);
    std::vector<double> theta(static_cast<std::size_t>(H) * W);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const double xn = (x - K.cx) / K.fx;
            const double yn = (y - K.cy) / K.fy;
            const double z = march_depth(tube, xn, yn, config.range);
            out.depth.depth.at(0, 0, y, x) = z;
            theta[static_cast<std::size_t>(y) * W + x] = tube.theta_at(xn, yn, z);
        }
    }

    // Surface appearance.
    ValueNoise noise(mix_seed({seed, 0x7E2Bull}));
    ValueNoise vessel(mix_seed({seed, 0x7E3Bull}));
    std::vector<Patch> patches;
    if (config.textureless_patches) {
        const int np = static_cast<int>(std::floor(uni(0.0, 3.999)));
        for (int p = 0; p < np; ++p) patches.push_back({uni(-kPi, kPi), uni(20.0, 120.0), uni(6.0, 18.0)});
    }
    const std::array<double, 3> tissue{uni(0.75, 0.9), uni(0.38, 0.5), uni(0.33, 0.45)};
    const double spec_strength = config.specular ? uni(0.5, 1.0) : 0.0;
    const double light_falloff = uni(30.0, 60.0);

    auto point = [&](int y, int x) {
        const double z = out.depth.depth.at(0, 0, y, x);
        return std::array<double, 3>{z * (x - K.cx) / K.fx, z * (y - K.cy) / K.fy, z};
    };

    out.image = Tensor(Shape{1, 3, H, W});
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const auto p = point(y, x);
            const auto px0 = point(y, std::max(x - 1, 0)), px1 = point(y, std::min(x + 1, W - 1));
            const auto py0 = point(std::max(y - 1, 0), x), py1 = point(std::min(y + 1, H - 1), x);
            const std::array<double, 3> tx{px1[0] - px0[0], px1[1] - px0[1], px1[2] - px0[2]};
            const std::array<double, 3> ty{py1[0] - py0[0], py1[1] - py0[1], py1[2] - py0[2]};
            std::array<double, 3> nrm{tx[1] * ty[2] - tx[2] * ty[1], tx[2] * ty[0] - tx[0] * ty[2],
                                      tx[0] * ty[1] - tx[1] * ty[0]};
            const double nl = std::max(std::hypot(nrm[0], nrm[1], nrm[2]), 1e-12);
            const double pl = std::max(std::hypot(p[0], p[1], p[2]), 1e-12);
            double cosang = std::abs(nrm[0] * p[0] + nrm[1] * p[1] + nrm[2] * p[2]) / (nl * pl);
            cosang = std::clamp(cosang, 0.0, 1.0);
            const double atten = 1.0 / (1.0 + (pl / light_falloff) * (pl / light_falloff));

            const double th = theta[static_cast<std::size_t>(y) * W + x];
            const double zc = p[2];
            const double su = (th + kPi) / (2.0 * kPi);
            double tex = noise.fbm(su * 24.0, zc / 6.0, 24, 4) - 0.5;
            const double vv = vessel.fbm(su * 16.0, zc / 9.0, 16, 3);
            double vein = std::exp(-std::pow((vv - 0.5) / 0.02, 2.0));
            for (const auto& pt : patches) {
                const double dth = std::remainder(th - pt.theta, 2.0 * kPi) * tube.radius;
                if (std::hypot(dth, zc - pt.z) < pt.radius) {
                    tex = 0.0;
                    vein = 0.0;
                }
            }
            const double far = zc >= config.range.d_max - 1e-9 ? 0.0 : 1.0;
            const double shade = 0.04 + 0.96 * cosang * atten * far;
            const double glint =
                spec_strength * std::pow(cosang, 40.0) * atten * far * (1.0 + 2.0 * std::abs(tex));
            const std::array<double, 3> vein_tint{0.55, 0.2, 0.25};
            for (int c = 0; c < 3; ++c) {
                double albedo = tissue[static_cast<std::size_t>(c)] * (1.0 + 0.6 * tex);
                albedo = albedo * (1.0 - 0.6 * vein) + 0.6 * vein * vein_tint[static_cast<std::size_t>(c)] * tissue[static_cast<std::size_t>(c)];
                out.image.at(0, c, y, x) = std::clamp(albedo * shade + glint, 0.0, 1.0);
            }
        }
    }
    return out;
}

}  // namespace depthdiff
