// Copyright (C) 2026 The depthdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "depthdiff/depthdiff.h"

#include <cstring>
#include <exception>
#include <memory>
#include <new>
#include <string>

#include "depthdiff/pipeline.hpp"

struct dd_config {
    depthdiff::RunConfig cfg;
};

struct dd_model {
    std::unique_ptr<depthdiff::Model> model;
};

namespace {

thread_local std::string g_last_error;

dd_status to_status(depthdiff::ErrorCode code) {
    switch (code) {
        case depthdiff::ErrorCode::kInvalidArgument: return DD_ERR_INVALID_ARGUMENT;
        case depthdiff::ErrorCode::kShapeMismatch: return DD_ERR_SHAPE;
        case depthdiff::ErrorCode::kIo: return DD_ERR_IO;
        case depthdiff::ErrorCode::kFormat: return DD_ERR_FORMAT;
        case depthdiff::ErrorCode::kNonFinite: return DD_ERR_NON_FINITE;
        case depthdiff::ErrorCode::kState: return DD_ERR_STATE;
    }
    return DD_ERR_INTERNAL;
}

template <class F>
dd_status guarded(F&& f) {
    try {
        f();
        g_last_error.clear();
        return DD_OK;
    } catch (const depthdiff::Error& e) {
        g_last_error = e.what();
        return to_status(e.code());
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
    } catch (const std::filesystem::filesystem_error& e) {
        g_last_error = e.what();
        return DD_ERR_IO;
    } catch (const std::exception& e) {
        g_last_error = e.what();
    } catch (...) {
        g_last_error = "unknown error";
    }
    return DD_ERR_INTERNAL;
}

void need(const void* p, const char* what) {
    depthdiff::require(p != nullptr, depthdiff::ErrorCode::kInvalidArgument,
                       std::string(what) + " must not be NULL");
}

void copy_out(const std::string& text, char* buf, size_t size, size_t* needed) {
    if (needed) *needed = text.size() + 1;
    if (!buf) return;
    depthdiff::require(size > text.size(), depthdiff::ErrorCode::kInvalidArgument,
                       "output buffer too small");
    std::memcpy(buf, text.c_str(), text.size() + 1);
}

void fill(dd_metrics* out, const depthdiff::MetricReport& m, int frames) {
    out->rmse_mm = m.rmse_mm;
    out->mae_mm = m.mae_mm;
    out->rel = m.rel;
    out->delta = m.delta;
    out->n_valid = m.n_valid;
    out->frames = frames;
}

depthdiff::ProgressFn wrap(dd_progress_fn fn, void* user) {
    if (!fn) return {};
    return [fn, user](const std::string& line) { fn(line.c_str(), user); };
}

}  // namespace

extern "C" {

const char* dd_version(void) { return "0.1.0"; }

const char* dd_last_error(void) { return g_last_error.c_str(); }

const char* dd_status_name(dd_status status) {
    switch (status) {
        case DD_OK: return "ok";
        case DD_ERR_INVALID_ARGUMENT: return "invalid argument";
        case DD_ERR_SHAPE: return "shape mismatch";
        case DD_ERR_IO: return "i/o error";
        case DD_ERR_FORMAT: return "format error";
        case DD_ERR_NON_FINITE: return "non-finite value";
        case DD_ERR_STATE: return "invalid state";
        case DD_ERR_INTERNAL: return "internal error";
    }
    return "unknown";
}

dd_status dd_config_create(dd_config** out) {
    return guarded([&] {
        need(out, "out");
        *out = new dd_config{};
    });
}

dd_status dd_config_preset(const char* name, dd_config** out) {
    return guarded([&] {
        need(name, "name");
        need(out, "out");
        const std::string n = name;
        if (n == "desk") {
            *out = new dd_config{};
        } else if (n == "fullscale") {
            *out = new dd_config{depthdiff::fullscale_preset()};
        } else {
            depthdiff::fail(depthdiff::ErrorCode::kInvalidArgument, "unknown preset '" + n + "'");
        }
    });
}

dd_status dd_config_load(const char* path, dd_config** out) {
    return guarded([&] {
        need(path, "path");
        need(out, "out");
        auto c = std::make_unique<dd_config>(dd_config{depthdiff::load_config(path)});
        *out = c.release();
    });
}

dd_status dd_config_merge_file(dd_config* cfg, const char* path) {
    return guarded([&] {
        need(cfg, "cfg");
        need(path, "path");
        depthdiff::merge_config_json(cfg->cfg, depthdiff::read_text(path));
    });
}

dd_status dd_config_clone(const dd_config* cfg, dd_config** out) {
    return guarded([&] {
        need(cfg, "cfg");
        need(out, "out");
        *out = new dd_config{cfg->cfg};
    });
}

void dd_config_destroy(dd_config* cfg) { delete cfg; }

dd_status dd_config_set(dd_config* cfg, const char* key, const char* value) {
    return guarded([&] {
        need(cfg, "cfg");
        need(key, "key");
        need(value, "value");
        depthdiff::set_config_value(cfg->cfg, key, value);
    });
}

dd_status dd_config_get(const dd_config* cfg, const char* key, char* buf, size_t size,
                        size_t* needed) {
    return guarded([&] {
        need(cfg, "cfg");
        need(key, "key");
        copy_out(depthdiff::get_config_value(cfg->cfg, key), buf, size, needed);
    });
}

dd_status dd_config_to_json(const dd_config* cfg, char* buf, size_t size, size_t* needed) {
    return guarded([&] {
        need(cfg, "cfg");
        copy_out(depthdiff::config_to_json(cfg->cfg), buf, size, needed);
    });
}

dd_status dd_config_save(const dd_config* cfg, const char* path) {
    return guarded([&] {
        need(cfg, "cfg");
        need(path, "path");
        depthdiff::save_config(cfg->cfg, path);
    });
}

dd_status dd_config_validate(const dd_config* cfg) {
    return guarded([&] {
        need(cfg, "cfg");
        cfg->cfg.validate();
    });
}

int32_t dd_config_key_count(void) {
    return static_cast<int32_t>(depthdiff::config_keys().size());
}

const char* dd_config_key_name(int32_t index) {
    const auto& keys = depthdiff::config_keys();
    if (index < 0 || static_cast<size_t>(index) >= keys.size()) return nullptr;
    return keys[static_cast<size_t>(index)].name.c_str();
}

const char* dd_config_key_help(int32_t index) {
    const auto& keys = depthdiff::config_keys();
    if (index < 0 || static_cast<size_t>(index) >= keys.size()) return nullptr;
    return keys[static_cast<size_t>(index)].help.c_str();
}

dd_status dd_make_synth(dd_config* cfg, const char* out_dir, int32_t* frames) {
    return guarded([&] {
        need(cfg, "cfg");
        need(out_dir, "out_dir");
        const auto s = depthdiff::make_synth(cfg->cfg, out_dir);
        if (frames) *frames = s.frames;
    });
}

dd_status dd_train(const dd_config* cfg, const char* run_dir, int resume, dd_progress_fn progress,
                   void* user) {
    return guarded([&] {
        need(cfg, "cfg");
        need(run_dir, "run_dir");
        depthdiff::train(cfg->cfg, run_dir, resume != 0, wrap(progress, user));
    });
}

dd_status dd_model_load(const char* checkpoint, dd_model** out) {
    return guarded([&] {
        need(checkpoint, "checkpoint");
        need(out, "out");
        auto m = std::make_unique<dd_model>();
        m->model = depthdiff::load_model(checkpoint);
        *out = m.release();
    });
}

void dd_model_destroy(dd_model* model) { delete model; }

dd_status dd_model_config(const dd_model* model, dd_config** out) {
    return guarded([&] {
        need(model, "model");
        need(out, "out");
        *out = new dd_config{model->model->config()};
    });
}

dd_status dd_evaluate(const dd_model* model, const dd_config* cfg, const char* manifest,
                      const char* out_dir, dd_metrics* out) {
    return guarded([&] {
        need(model, "model");
        need(cfg, "cfg");
        need(manifest, "manifest");
        need(out_dir, "out_dir");
        const auto r = depthdiff::evaluate(*model->model, cfg->cfg, manifest, out_dir);
        if (out) fill(out, r.mean, static_cast<int>(r.frames.size()));
    });
}

dd_status dd_sparsity_sweep(const dd_model* model, const dd_config* cfg, const char* out_dir,
                            dd_progress_fn progress, void* user) {
    return guarded([&] {
        need(model, "model");
        need(cfg, "cfg");
        need(out_dir, "out_dir");
        depthdiff::sparsity_sweep(*model->model, cfg->cfg, out_dir, wrap(progress, user));
    });
}

dd_status dd_ablate(const dd_config* cfg, const char* out_dir, dd_progress_fn progress,
                    void* user) {
    return guarded([&] {
        need(cfg, "cfg");
        need(out_dir, "out_dir");
        depthdiff::ablate(cfg->cfg, out_dir, wrap(progress, user));
    });
}

dd_status dd_infer(const dd_model* model, const dd_config* cfg, const dd_infer_request* request,
                   const char* out_dir, dd_metrics* metrics, int* has_metrics) {
    return guarded([&] {
        need(model, "model");
        need(cfg, "cfg");
        need(request, "request");
        need(request->image, "request->image");
        need(out_dir, "out_dir");
        depthdiff::InferRequest r;
        r.image = request->image;
        if (request->sparse) r.sparse = request->sparse;
        if (request->ground_truth) r.ground_truth = request->ground_truth;
        if (request->has_intrinsics) {
            r.intrinsics = depthdiff::Intrinsics{request->fx, request->fy, request->cx, request->cy};
        }
        r.point_cloud = request->point_cloud != 0;
        const auto res = depthdiff::infer(*model->model, cfg->cfg, r, out_dir);
        if (has_metrics) *has_metrics = res.metrics.has_value() ? 1 : 0;
        if (metrics && res.metrics) fill(metrics, *res.metrics, 1);
    });
}

dd_status dd_compute_metrics(const double* pred_mm, const double* gt_mm, const uint8_t* mask,
                             int32_t height, int32_t width, dd_metrics* out) {
    return guarded([&] {
        need(pred_mm, "pred_mm");
        need(gt_mm, "gt_mm");
        need(mask, "mask");
        need(out, "out");
        depthdiff::require(height > 0 && width > 0, depthdiff::ErrorCode::kInvalidArgument,
                           "height and width must be positive");
        const depthdiff::Shape s{1, 1, height, width};
        const size_t n = s.numel();
        depthdiff::Tensor p(s), g(s), m(s);
        for (size_t i = 0; i < n; ++i) {
            p[i] = pred_mm[i];
            g[i] = gt_mm[i];
            m[i] = mask[i] ? 1.0 : 0.0;
        }
        fill(out, depthdiff::evaluate_depth(p, g, m), 1);
    });
}

}  // extern "C"
