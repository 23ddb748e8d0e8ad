// Copyright (C) 2026 The depthdiff Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails. Usage: acceptance [--work DIR] [criterion ...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "depthdiff/diffusion.hpp"
#include "depthdiff/grad_fusion.hpp"
#include "depthdiff/objectives.hpp"
#include "depthdiff/pipeline.hpp"
#include "depthdiff/refinement.hpp"
#include "depthdiff/schedule.hpp"

namespace fs = std::filesystem;
using namespace depthdiff;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
    char b[96];
    std::snprintf(b, sizeof b, f, a);
    return b;
}

Tensor uniform(const Shape& s, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    Tensor t(s);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = u(rng);
    return t;
}

double rel_l2(const Tensor& a, const Tensor& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

// |analytic - numeric|_2 / |numeric|_2 over all leaves, central differences.
double gradcheck(const std::function<Var()>& f, const std::vector<Var*>& leaves) {
    constexpr double h = 1e-6;
    for (Var* v : leaves) v->zero_grad();
    backward(f());
    std::vector<double> an, nu;
    for (Var* v : leaves) {
        const Tensor g = v->grad();
        an.insert(an.end(), g.values().begin(), g.values().end());
    }
    NoGradGuard ng;
    for (Var* v : leaves) {
        Tensor& x = v->mutable_value();
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double keep = x[i];
            x[i] = keep + h;
            const double fp = f().value()[0];
            x[i] = keep - h;
            const double fm = f().value()[0];
            x[i] = keep;
            nu.push_back((fp - fm) / (2 * h));
        }
    }
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < an.size(); ++i) {
        num += (an[i] - nu[i]) * (an[i] - nu[i]);
        den += nu[i] * nu[i];
    }
    return std::sqrt(num) / std::max(std::sqrt(den), 1e-10);
}

Var project(const Var& x, std::uint64_t seed) {
    return sum_all(mul(x, constant(uniform(x.shape(), seed))));
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// --- numerical criteria ----------------------------------------------------

Outcome ddim_roundtrip() {
    const auto t0 = Clock::now();
    const NoiseSchedule s = build_schedule(1000, 1e-4, 0.02, 20);
    double worst = 0.0;
    for (std::uint64_t trial = 0; trial < 5; ++trial) {
        const Tensor x0 = uniform(Shape{1, 1, 16, 20}, 100 + trial, -1.0, 1.0);
        const std::uint64_t seed = 31 + trial;
        const Tensor eps = initial_noise(x0.shape(), seed);
        // the exact injected noise, whatever the state
        NoisePredictor oracle = [&](const Var&, const Var&, int) { return constant(eps); };
        const Var guidance(Tensor(x0.shape(), 0.0));
        worst = std::max(worst, rel_l2(sample(Var(x0), guidance, oracle, s, seed).value(), x0));
    }
    const double dt = seconds_since(t0);
    return {worst <= 1e-5 && dt < 5.0,
            "max relative error " + fmt("%.2e", worst) + ", " + fmt("%.2f s", dt)};
}

Outcome diffusion_moments() {
    const NoiseSchedule s = build_schedule(1000, 1e-4, 0.02, 20);
    const Shape shape{1, 1, 2, 3};
    const Tensor x0 = uniform(shape, 5, -1.0, 1.0);
    constexpr int draws = 10000;
    double worst = 0.0;  // in standard errors
    for (int t : {1, 500, 999}) {
        const double ab = s.alpha_bar(t);
        std::vector<double> sum(shape.numel(), 0.0), sq(shape.numel(), 0.0);
        for (int k = 0; k < draws; ++k) {
            const Tensor eps = gaussian_noise(shape, mix_seed({0xACCE, static_cast<std::uint64_t>(t),
                                                               static_cast<std::uint64_t>(k)}));
            const Tensor xt = forward_diffuse(x0, t, eps, s);
            for (std::size_t i = 0; i < xt.size(); ++i) {
                sum[i] += xt[i];
                sq[i] += xt[i] * xt[i];
            }
        }
        for (std::size_t i = 0; i < x0.size(); ++i) {
            const double mean = sum[i] / draws;
            const double var = (sq[i] - draws * mean * mean) / (draws - 1);
            const double want_mean = std::sqrt(ab) * x0[i];
            const double want_var = 1.0 - ab;
            const double se_mean = std::sqrt(want_var / draws);
            const double se_var = want_var * std::sqrt(2.0 / (draws - 1));
            worst = std::max({worst, std::abs(mean - want_mean) / se_mean,
                              std::abs(var - want_var) / se_var});
        }
    }
    return {worst <= 3.0, "worst deviation " + fmt("%.2f", worst) + " standard errors"};
}

Outcome gradient_checks() {
    std::vector<std::pair<std::string, double>> errs;
    const Shape s{1, 1, 8, 8};
    {
        Var p(uniform(s, 1), true), r(uniform(s, 2), true);
        const Tensor gt = uniform(s, 3);
        Tensor mask(s, 1.0);
        for (std::size_t i = 0; i < mask.size(); i += 5) mask[i] = 0.0;
        errs.emplace_back("depth", gradcheck([&] { return depth_loss(p, r, gt, mask); }, {&p, &r}));
    }
    {
        const Shape g{1, 2, 8, 8};
        std::vector<Var> gs{Var(uniform(g, 4), true), Var(uniform(g, 5), true), Var(uniform(g, 6), true)};
        GradientField gt{uniform(g, 7), Tensor(g, 1.0)};
        errs.emplace_back("gradient", gradcheck([&] { return gradient_loss(gs, gt, 0.9); },
                                                {&gs[0], &gs[1], &gs[2]}));
    }
    {
        const Var e(uniform(s, 8));
        Var p(uniform(s, 9), true);
        errs.emplace_back("diffusion", gradcheck([&] { return diffusion_loss(e, p); }, {&p}));
    }
    {
        Rng rng(10);
        GradFusion fusion(4, 4, rng);
        Var feats(uniform(Shape{1, 4, 8, 8}, 11), true);
        Var coarse(uniform(Shape{1, 1, 32, 32}, 12), true);
        errs.emplace_back("fusion", gradcheck([&] {
            const FusionInit init = fusion.init_state(feats, coarse);
            const FusionResult r = fusion.run_fusion(init.state, init.depth, init.gradient, 3);
            return add(project(r.depth, 13), add(project(r.gradients.back(), 14), project(r.hidden, 15)));
        }, {&feats, &coarse}));
    }
    {
        Var c(uniform(Shape{1, 1, 2, 2}, 16), true);
        Var lg(uniform(Shape{1, kUpsampleMaskChannels, 2, 2}, 17, -2.0, 2.0), true);
        errs.emplace_back("convex_upsample",
                          gradcheck([&] { return project(convex_upsample(c, lg), 18); }, {&c, &lg}));
    }
    {
        Rng rng(19);
        SpnRefiner spn(3, rng);
        Var d(uniform(Shape{1, 1, 8, 8}, 20), true);
        Var f(uniform(Shape{1, 3, 8, 8}, 21), true);
        errs.emplace_back("spn_refine", gradcheck([&] { return project(spn_refine(spn, d, f, 3), 22); }, {&d, &f}));
    }
    bool ok = true;
    std::string detail;
    for (const auto& [name, e] : errs) {
        ok = ok && e < 1e-4;
        detail += (detail.empty() ? "" : ", ") + name + " " + fmt("%.1e", e);
    }
    return {ok, detail};
}

Outcome closed_form_losses() {
    const Shape s{1, 1, 6, 7};
    const Tensor gt = uniform(s, 1);
    const Tensor mask(s, 1.0);
    double worst = 0.0;
    for (double c : {0.5, -1.5, 0.01}) {
        Tensor p = gt;
        for (std::size_t i = 0; i < p.size(); ++i) p[i] += c;
        worst = std::max(worst, std::abs(depth_loss(Var(p), Var(p), gt, mask).value()[0] -
                                         2.0 * (c * c + std::abs(c))));
    }
    const Shape g{1, 2, 6, 7};
    GradientField field{uniform(g, 2), Tensor(g, 1.0)};
    Tensor off = field.values;
    for (std::size_t i = 0; i < off.size(); ++i) off[i] += 1.0;
    const Var u(off);
    worst = std::max(worst, std::abs(gradient_loss({u, u, u}, field, 0.9).value()[0] - 2.71));
    const Tensor e = uniform(s, 3);
    Tensor e1 = e;
    for (std::size_t i = 0; i < e1.size(); ++i) e1[i] += 1.0;
    worst = std::max(worst, std::abs(diffusion_loss(Var(e), Var(e1)).value()[0] - 1.0));
    return {worst <= 1e-9, "max deviation " + fmt("%.1e", worst)};
}

// Written independently of the library: one scalar loop per metric.
MetricReport reference_metrics(const Tensor& p, const Tensor& g, const Tensor& m) {
    double n = 0, se = 0, ae = 0, re = 0, hit = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (m[i] < 0.5) continue;
        n += 1;
        const double d = p[i] - g[i];
        se += d * d;
        ae += std::abs(d);
        re += std::abs(d) / g[i];
        if (p[i] > 0 && std::max(p[i] / g[i], g[i] / p[i]) < 1.25) hit += 1;
    }
    MetricReport r;
    r.rmse_mm = std::sqrt(se * (1.0 / n));
    r.mae_mm = ae * (1.0 / n);
    r.rel = re * (1.0 / n);
    r.delta = hit * (1.0 / n);
    return r;
}

Outcome metric_oracle() {
    int mismatches = 0;
    const Shape s{1, 1, 10, 10};
    for (std::uint64_t k = 0; k < 100; ++k) {
        const Tensor gt = uniform(s, 1000 + k, 10.0, 200.0);
        const Tensor pred = uniform(s, 2000 + k, 5.0, 220.0);
        Tensor mask(s, 1.0);
        std::mt19937_64 rng(3000 + k);
        for (std::size_t i = 1; i < mask.size(); ++i) mask[i] = (rng() % 5 == 0) ? 0.0 : 1.0;
        const MetricReport a = evaluate_depth(pred, gt, mask);
        const MetricReport b = reference_metrics(pred, gt, mask);
        if (a.rmse_mm != b.rmse_mm || a.mae_mm != b.mae_mm || a.rel != b.rel || a.delta != b.delta)
            ++mismatches;
    }
    const Tensor gt = uniform(s, 9, 10.0, 200.0);
    Tensor p = gt;
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = 1.25 * gt[i];
    const double boundary = evaluate_depth(p, gt, Tensor(s, 1.0)).delta;
    return {mismatches == 0 && boundary == 0.0,
            std::to_string(mismatches) + "/100 mismatches, delta at 1.25x = " + fmt("%g", boundary)};
}

Outcome invariants() {
    int outside = 0;
    constexpr int dy[9] = {-1, -1, -1, 0, 0, 0, 1, 1, 1};
    constexpr int dx[9] = {-1, 0, 1, -1, 0, 1, -1, 0, 1};
    for (std::uint64_t k = 0; k < 1000; ++k) {
        const int h = 1 + static_cast<int>(k % 6), w = 1 + static_cast<int>((k / 6) % 7);
        const Tensor c = uniform(Shape{1, 1, h, w}, 10000 + k, -50.0, 50.0);
        const double spread = 1.0 + static_cast<double>(k % 40);
        const Tensor lg = uniform(Shape{1, kUpsampleMaskChannels, h, w}, 20000 + k, -spread, spread);
        const Tensor up = convex_upsample(Var(c), Var(lg)).value();
        for (int Y = 0; Y < 4 * h; ++Y) {
            for (int X = 0; X < 4 * w; ++X) {
                double lo = INFINITY, hi = -INFINITY;
                for (int j = 0; j < 9; ++j) {
                    const int yy = std::clamp(Y / 4 + dy[j], 0, h - 1);
                    const int xx = std::clamp(X / 4 + dx[j], 0, w - 1);
                    lo = std::min(lo, c.at(0, 0, yy, xx));
                    hi = std::max(hi, c.at(0, 0, yy, xx));
                }
                const double v = up.at(0, 0, Y, X);
                if (!(v >= lo && v <= hi)) ++outside;
            }
        }
    }
    int changed = 0;
    Rng rng(7);
    SpnRefiner spn(5, rng);
    for (std::uint64_t k = 0; k < 50; ++k) {
        const double value = uniform(Shape{}, 40000 + k, -1.0, 1.0)[0];
        const Var d(Tensor(Shape{1, 1, 12, 15}, value));
        const Var f(uniform(Shape{1, 5, 12, 15}, 50000 + k, -3.0, 3.0));
        const Tensor out = spn_refine(spn, d, f, 6).value();
        for (double v : out.values()) changed += v != value ? 1 : 0;
    }
    return {outside == 0 && changed == 0, std::to_string(outside) + " upsampled values outside the "
                                              "local range, " + std::to_string(changed) +
                                              " spn values off the constant"};
}

// --- training criteria -----------------------------------------------------

// Small desk configuration at 64x80.
RunConfig desk_small() {
    RunConfig c;
    c.height = 64;
    c.width = 80;
    c.synth_val = 0;
    c.epochs = 100000;
    return c;
}

Outcome overfit(const fs::path& work) {
    const auto t0 = Clock::now();
    RunConfig cfg = desk_small();
    cfg.synth_train = 8;
    cfg.synth_eval = 0;
    cfg.max_steps = 300;
    make_synth(cfg, work / "data");
    const TrainResult tr = train(cfg, work / "run");
    const auto model = load_model(tr.checkpoint);
    const EvalResult er = evaluate(*model, cfg, cfg.train_manifest, work / "eval");
    const double dt = seconds_since(t0);
    const double limit = 0.05 * (cfg.d_max - cfg.d_min);
    return {er.mean.rmse_mm < limit && dt < 900.0 && tr.steps.size() <= 500,
            std::to_string(tr.steps.size()) + " steps, training-set RMSE " +
                fmt("%.3f mm", er.mean.rmse_mm) + " (limit " + fmt("%.2f mm", limit) + "), " +
                fmt("%.0f s", dt)};
}

Outcome sweep_trend(const fs::path& work) {
    RunConfig cfg = desk_small();
    cfg.height = 256;
    cfg.width = 320;
    cfg.crop_height = 64;
    cfg.crop_width = 80;
    cfg.n_points = 500;
    cfg.synth_train = 16;
    cfg.synth_eval = 4;
    cfg.max_steps = 400;
    cfg.sweep_levels = "50,500,5000,50000";
    cfg.sweep_seeds = "0,1,2,3,4";
    make_synth(cfg, work / "data");
    const TrainResult tr = train(cfg, work / "run");
    const auto model = load_model(tr.checkpoint);
    const std::vector<SweepRow> rows = sparsity_sweep(*model, cfg, work / "sweep");
    std::string detail;
    for (const auto& r : rows)
        detail += (detail.empty() ? "" : ", ") + std::to_string(r.level) + ": " + fmt("%.3f", r.rmse_mean);
    const bool ok = rows.size() == 4 && rows[2].rmse_mean <= rows[1].rmse_mean &&
                    rows[3].rmse_mean <= rows[2].rmse_mean;
    return {ok, "5-seed mean RMSE mm " + detail};
}

Outcome ablation_order(const fs::path& work) {
    RunConfig cfg = desk_small();
    cfg.synth_train = 16;
    cfg.synth_eval = 8;
    cfg.max_steps = 300;
    cfg.ablation_seeds = "0,1,2";
    make_synth(cfg, work / "data");
    const std::vector<AblationRow> rows = ablate(cfg, work / "ablate");
    double full = 0.0;
    for (const auto& r : rows)
        if (r.variant == "full") full = r.mean.rmse_mm;
    bool ok = rows.size() == 4;
    std::string detail;
    for (const auto& r : rows) {
        ok = ok && full <= r.mean.rmse_mm;
        detail += (detail.empty() ? "" : ", ") + r.variant + " " + fmt("%.3f", r.mean.rmse_mm);
    }
    return {ok, "3-seed mean RMSE mm " + detail};
}

Outcome determinism(const fs::path& work) {
    RunConfig cfg = desk_small();
    cfg.synth_train = 8;
    cfg.synth_eval = 4;
    cfg.max_steps = 10;
    make_synth(cfg, work / "data");
    const TrainResult a = train(cfg, work / "a");
    const TrainResult b = train(cfg, work / "b");
    bool same_losses = a.steps.size() == 10 && b.steps.size() == 10;
    for (std::size_t i = 0; same_losses && i < 10; ++i) same_losses = a.steps[i].loss == b.steps[i].loss;
    const auto model = load_model(a.checkpoint);
    evaluate(*model, cfg, cfg.eval_manifest, work / "e1");
    evaluate(*model, cfg, cfg.eval_manifest, work / "e2");
    const bool same_tables = slurp(work / "e1" / "metrics.csv") == slurp(work / "e2" / "metrics.csv") &&
                             slurp(work / "e1" / "frames.json") == slurp(work / "e2" / "frames.json");
    return {same_losses && same_tables, std::string("first 10 losses ") +
                                            (same_losses ? "identical" : "differ") + ", metric tables " +
                                            (same_tables ? "identical" : "differ")};
}

}  // namespace

int main(int argc, char** argv) {
    fs::path work = fs::temp_directory_path() / "depthdiff_acceptance";
    std::set<int> only;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--work" && i + 1 < argc) {
            work = argv[++i];
        } else {
            only.insert(std::stoi(a));
        }
    }
    const std::vector<std::pair<const char*, std::function<Outcome(const fs::path&)>>> criteria = {
        {"DDIM roundtrip oracle", [](const fs::path&) { return ddim_roundtrip(); }},
        {"forward diffusion moments", [](const fs::path&) { return diffusion_moments(); }},
        {"gradient checks", [](const fs::path&) { return gradient_checks(); }},
        {"closed-form losses", [](const fs::path&) { return closed_form_losses(); }},
        {"metric oracle", [](const fs::path&) { return metric_oracle(); }},
        {"convexity and propagation invariants", [](const fs::path&) { return invariants(); }},
        {"overfit sanity", overfit},
        {"sparsity sweep trend", sweep_trend},
        {"ablation direction", ablation_order},
        {"determinism", determinism},
    };
    int failed = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const int id = static_cast<int>(k) + 1;
        if (!only.empty() && !only.count(id)) continue;
        const fs::path dir = work / ("criterion_" + std::to_string(id));
        fs::remove_all(dir);
        fs::create_directories(dir);
        Outcome o;
        try {
            o = criteria[k].second(dir);
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        failed += o.pass ? 0 : 1;
        std::printf("criterion %d %s: %s (%s)\n", id, o.pass ? "PASS" : "FAIL", criteria[k].first,
                    o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
