/* Copyright (C) 2026 The depthdiff Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface of the depthdiff depth-completion library. All handles are
 * opaque; every fallible call returns a dd_status and, on failure, leaves a
 * message retrievable with dd_last_error() on the calling thread.
 */
#ifndef DEPTHDIFF_DEPTHDIFF_H
#define DEPTHDIFF_DEPTHDIFF_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(DEPTHDIFF_BUILDING)
#    define DD_API __declspec(dllexport)
#  else
#    define DD_API __declspec(dllimport)
#  endif
#else
#  define DD_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dd_status {
    DD_OK = 0,
    DD_ERR_INVALID_ARGUMENT = 1,
    DD_ERR_SHAPE = 2,
    DD_ERR_IO = 3,
    DD_ERR_FORMAT = 4,
    DD_ERR_NON_FINITE = 5,
    DD_ERR_STATE = 6,
    DD_ERR_INTERNAL = 7
} dd_status;

typedef struct dd_config dd_config;
typedef struct dd_model dd_model;

typedef struct dd_metrics {
    double rmse_mm;
    double mae_mm;
    double rel;
    double delta;     /* fraction of pixels with max(pred/gt, gt/pred) < 1.25 */
    int64_t n_valid;  /* valid pixels, summed over frames */
    int32_t frames;
} dd_metrics;

/* One progress line per call; may be NULL. */
typedef void (*dd_progress_fn)(const char* line, void* user);

DD_API const char* dd_version(void);
/* Message of the last failed call on this thread ("" when none). */
DD_API const char* dd_last_error(void);
DD_API const char* dd_status_name(dd_status status);

/* ---- configuration ---- */
DD_API dd_status dd_config_create(dd_config** out);
/* name: "desk" (defaults) or "fullscale". */
DD_API dd_status dd_config_preset(const char* name, dd_config** out);
DD_API dd_status dd_config_load(const char* path, dd_config** out);
/* Applies only the keys present in the JSON file at path. */
DD_API dd_status dd_config_merge_file(dd_config* cfg, const char* path);
DD_API dd_status dd_config_clone(const dd_config* cfg, dd_config** out);
DD_API void dd_config_destroy(dd_config* cfg);
DD_API dd_status dd_config_set(dd_config* cfg, const char* key, const char* value);
/* Copies the value as text into buf (NUL-terminated). *needed, when given,
 * receives the size required including the terminator. */
DD_API dd_status dd_config_get(const dd_config* cfg, const char* key, char* buf, size_t size,
                               size_t* needed);
DD_API dd_status dd_config_to_json(const dd_config* cfg, char* buf, size_t size, size_t* needed);
DD_API dd_status dd_config_save(const dd_config* cfg, const char* path);
DD_API dd_status dd_config_validate(const dd_config* cfg);
DD_API int32_t dd_config_key_count(void);
DD_API const char* dd_config_key_name(int32_t index);
DD_API const char* dd_config_key_help(int32_t index);

/* ---- data ---- */
/* Writes train/val/eval synthetic splits; cfg's manifest keys are updated. */
DD_API dd_status dd_make_synth(dd_config* cfg, const char* out_dir, int32_t* frames);

/* ---- training ---- */
DD_API dd_status dd_train(const dd_config* cfg, const char* run_dir, int resume,
                          dd_progress_fn progress, void* user);

/* ---- models ---- */
DD_API dd_status dd_model_load(const char* checkpoint, dd_model** out);
DD_API void dd_model_destroy(dd_model* model);
/* The configuration stored in the checkpoint. */
DD_API dd_status dd_model_config(const dd_model* model, dd_config** out);

/* Seeds, n_points and dump_predictions come from cfg. */
DD_API dd_status dd_evaluate(const dd_model* model, const dd_config* cfg, const char* manifest,
                             const char* out_dir, dd_metrics* out);
DD_API dd_status dd_sparsity_sweep(const dd_model* model, const dd_config* cfg,
                                   const char* out_dir, dd_progress_fn progress, void* user);
DD_API dd_status dd_ablate(const dd_config* cfg, const char* out_dir, dd_progress_fn progress,
                           void* user);

typedef struct dd_infer_request {
    const char* image;         /* 8-bit RGB PNG */
    const char* sparse;        /* 16-bit depth PNG with sidecar, or NULL */
    const char* ground_truth;  /* optional; required when sparse is NULL */
    int has_intrinsics;
    double fx, fy, cx, cy;
    int point_cloud;
} dd_infer_request;

/* Writes depth.png (+ error_map.png with ground truth, cloud.ply on request).
 * metrics may be NULL; *has_metrics is set when ground truth was scored. */
DD_API dd_status dd_infer(const dd_model* model, const dd_config* cfg,
                          const dd_infer_request* request, const char* out_dir,
                          dd_metrics* metrics, int* has_metrics);

/* Metrics over h*w row-major maps in millimetres; mask nonzero = valid. */
DD_API dd_status dd_compute_metrics(const double* pred_mm, const double* gt_mm,
                                    const uint8_t* mask, int32_t height, int32_t width,
                                    dd_metrics* out);

#ifdef __cplusplus
}
#endif

#endif /* DEPTHDIFF_DEPTHDIFF_H */
