// Copyright (C) 2026 The depthdiff Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end. Talks to the library only through the C API.

#include <cstdio>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "depthdiff/depthdiff.h"

namespace {

struct ConfigDeleter {
    void operator()(dd_config* c) const { dd_config_destroy(c); }
};
struct ModelDeleter {
    void operator()(dd_model* m) const { dd_model_destroy(m); }
};
using ConfigPtr = std::unique_ptr<dd_config, ConfigDeleter>;
using ModelPtr = std::unique_ptr<dd_model, ModelDeleter>;

class Failure : public std::runtime_error {
public:
    Failure(dd_status s, const std::string& what) : std::runtime_error(what), status(s) {}
    dd_status status;
};

void check(dd_status s, const char* call) {
    if (s != DD_OK) {
        throw Failure(s, std::string(call) + ": " + dd_status_name(s) + ": " + dd_last_error());
    }
}

void progress_line(const char* line, void*) {
    std::fprintf(stderr, "%s\n", line);
    std::fflush(stderr);
}

// Shared options: a base config, a preset, and one flag per config key.
struct ConfigOptions {
    std::string file;
    std::string preset = "desk";
    std::map<std::string, std::string> values;

    void attach(CLI::App* app, bool with_preset = true) {
        app->add_option("--config", file, "JSON config file (keys not given keep the base value)");
        if (with_preset) {
            app->add_option("--preset", preset, "base configuration: desk or fullscale")
                ->check(CLI::IsMember({"desk", "fullscale"}));
        }
        for (int32_t i = 0; i < dd_config_key_count(); ++i) {
            const std::string key = dd_config_key_name(i);
            app->add_option("--" + key, values[key], dd_config_key_help(i))->group("Config keys");
        }
    }

    // base: config of a checkpoint, or NULL for the preset.
    ConfigPtr resolve(const dd_config* base) const {
        dd_config* raw = nullptr;
        if (base) {
            check(dd_config_clone(base, &raw), "dd_config_clone");
        } else {
            check(dd_config_preset(preset.c_str(), &raw), "dd_config_preset");
        }
        ConfigPtr cfg(raw);
        if (!file.empty()) check(dd_config_merge_file(cfg.get(), file.c_str()), "--config");
        for (const auto& [key, value] : values) {
            if (value.empty()) continue;
            check(dd_config_set(cfg.get(), key.c_str(), value.c_str()), ("--" + key).c_str());
        }
        check(dd_config_validate(cfg.get()), "config");
        return cfg;
    }
};

std::string get(const dd_config* cfg, const char* key) {
    size_t needed = 0;
    check(dd_config_get(cfg, key, nullptr, 0, &needed), "dd_config_get");
    std::string buf(needed, '\0');
    check(dd_config_get(cfg, key, buf.data(), buf.size(), nullptr), "dd_config_get");
    buf.resize(needed - 1);
    return buf;
}

ModelPtr load(const std::string& checkpoint) {
    dd_model* raw = nullptr;
    check(dd_model_load(checkpoint.c_str(), &raw), "dd_model_load");
    return ModelPtr(raw);
}

ConfigPtr model_config(const dd_model* model) {
    dd_config* raw = nullptr;
    check(dd_model_config(model, &raw), "dd_model_config");
    return ConfigPtr(raw);
}

void print_metrics(const dd_metrics& m) {
    std::printf("frames %d  RMSE %.4f mm  MAE %.4f mm  REL %.6f  delta %.6f\n", m.frames,
                m.rmse_mm, m.mae_mm, m.rel, m.delta);
}

std::optional<std::vector<double>> parse_intrinsics(const std::string& text) {
    if (text.empty()) return std::nullopt;
    std::vector<double> v;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) v.push_back(std::stod(item));
    if (v.size() != 4) throw Failure(DD_ERR_INVALID_ARGUMENT, "--intrinsics needs fx,fy,cx,cy");
    return v;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"depthdiff: sparse-to-dense depth completion"};
    app.require_subcommand(1);
    app.set_version_flag("--version", dd_version());

    // make-synth
    ConfigOptions synth_opts;
    std::string synth_out;
    auto* synth = app.add_subcommand("make-synth", "generate synthetic train/val/eval splits");
    synth_opts.attach(synth);
    synth->add_option("--out", synth_out, "output directory")->required();

    // train
    ConfigOptions train_opts;
    std::string run_dir;
    bool resume = false;
    auto* train = app.add_subcommand("train", "train a model into a run directory");
    train_opts.attach(train);
    train->add_option("--run-dir", run_dir, "run directory")->required();
    train->add_flag("--resume", resume, "continue from the checkpoint in the run directory");

    // evaluate
    ConfigOptions eval_opts;
    std::string eval_ckpt, eval_split, eval_out;
    auto* evaluate = app.add_subcommand("evaluate", "score a checkpoint on a split");
    eval_opts.attach(evaluate, false);
    evaluate->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
    evaluate->add_option("--split", eval_split, "manifest (default: eval_manifest)");
    evaluate->add_option("--out", eval_out, "output directory")->required();

    // infer
    ConfigOptions infer_opts;
    std::string infer_ckpt, infer_image, infer_sparse, infer_gt, infer_out, intrinsics;
    bool point_cloud = false;
    auto* infer = app.add_subcommand("infer", "complete one frame");
    infer_opts.attach(infer, false);
    infer->add_option("--checkpoint", infer_ckpt, "checkpoint file")->required();
    infer->add_option("--image", infer_image, "8-bit RGB PNG")->required();
    infer->add_option("--sparse", infer_sparse, "16-bit sparse depth PNG with sidecar");
    infer->add_option("--gt", infer_gt, "ground-truth depth for an error map");
    infer->add_option("--intrinsics", intrinsics, "fx,fy,cx,cy in pixels");
    infer->add_flag("--point-cloud", point_cloud, "also write an ASCII PLY point cloud");
    infer->add_option("--out", infer_out, "output directory")->required();

    // sparsity-sweep
    ConfigOptions sweep_opts;
    std::string sweep_ckpt, sweep_out;
    auto* sweep = app.add_subcommand("sparsity-sweep", "evaluate across sparse point counts");
    sweep_opts.attach(sweep, false);
    sweep->add_option("--checkpoint", sweep_ckpt, "checkpoint file")->required();
    sweep->add_option("--out", sweep_out, "output directory")->required();

    // ablate
    ConfigOptions ablate_opts;
    std::string ablate_out;
    auto* ablate = app.add_subcommand("ablate", "train and score the four variants");
    ablate_opts.attach(ablate);
    ablate->add_option("--out", ablate_out, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            ConfigPtr cfg = synth_opts.resolve(nullptr);
            int32_t frames = 0;
            check(dd_make_synth(cfg.get(), synth_out.c_str(), &frames), "make-synth");
            std::printf("wrote %d frames; manifests %s %s %s\n", frames,
                        get(cfg.get(), "train_manifest").c_str(),
                        get(cfg.get(), "val_manifest").c_str(),
                        get(cfg.get(), "eval_manifest").c_str());
        } else if (train->parsed()) {
            ConfigPtr cfg = train_opts.resolve(nullptr);
            check(dd_train(cfg.get(), run_dir.c_str(), resume ? 1 : 0, progress_line, nullptr),
                  "train");
            std::printf("checkpoint %s/checkpoint.ddck\n", run_dir.c_str());
        } else if (evaluate->parsed()) {
            ModelPtr model = load(eval_ckpt);
            ConfigPtr base = model_config(model.get());
            ConfigPtr cfg = eval_opts.resolve(base.get());
            const std::string split = eval_split.empty() ? get(cfg.get(), "eval_manifest") : eval_split;
            dd_metrics m{};
            check(dd_evaluate(model.get(), cfg.get(), split.c_str(), eval_out.c_str(), &m),
                  "evaluate");
            print_metrics(m);
        } else if (infer->parsed()) {
            ModelPtr model = load(infer_ckpt);
            ConfigPtr base = model_config(model.get());
            ConfigPtr cfg = infer_opts.resolve(base.get());
            dd_infer_request req{};
            req.image = infer_image.c_str();
            req.sparse = infer_sparse.empty() ? nullptr : infer_sparse.c_str();
            req.ground_truth = infer_gt.empty() ? nullptr : infer_gt.c_str();
            if (const auto k = parse_intrinsics(intrinsics)) {
                req.has_intrinsics = 1;
                req.fx = (*k)[0];
                req.fy = (*k)[1];
                req.cx = (*k)[2];
                req.cy = (*k)[3];
            }
            req.point_cloud = point_cloud ? 1 : 0;
            dd_metrics m{};
            int has = 0;
            check(dd_infer(model.get(), cfg.get(), &req, infer_out.c_str(), &m, &has), "infer");
            std::printf("wrote %s/depth.png\n", infer_out.c_str());
            if (has) print_metrics(m);
        } else if (sweep->parsed()) {
            ModelPtr model = load(sweep_ckpt);
            ConfigPtr base = model_config(model.get());
            ConfigPtr cfg = sweep_opts.resolve(base.get());
            check(dd_sparsity_sweep(model.get(), cfg.get(), sweep_out.c_str(), progress_line, nullptr),
                  "sparsity-sweep");
            std::printf("wrote %s/sweep.csv\n", sweep_out.c_str());
        } else if (ablate->parsed()) {
            ConfigPtr cfg = ablate_opts.resolve(nullptr);
            check(dd_ablate(cfg.get(), ablate_out.c_str(), progress_line, nullptr), "ablate");
            std::printf("wrote %s/ablation.csv\n", ablate_out.c_str());
        }
    } catch (const Failure& f) {
        std::fprintf(stderr, "error: %s\n", f.what());
        return 1 + static_cast<int>(f.status);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
