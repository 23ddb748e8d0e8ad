// Copyright (C) 2026 The depthdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "depthdiff/config.hpp"
#include "depthdiff/io.hpp"
#include "depthdiff/model.hpp"
#include "depthdiff/objectives.hpp"

namespace depthdiff {

namespace fs = std::filesystem;

inline constexpr const char* kCheckpointName = "checkpoint.ddck";

/// Receives one human-readable progress line at a time.
using ProgressFn = std::function<void(const std::string&)>;

struct SynthSummary {
    std::vector<fs::path> manifests;  // train, val, eval
    int frames = 0;
};

/// Writes the three synthetic splits under out_dir and points the manifest
/// keys of `config` at them.
SynthSummary make_synth(RunConfig& config, const fs::path& out_dir);

struct StepRecord {
    long long step = 0;
    int epoch = 0;
    double loss = 0.0;
    double depth = 0.0;
    double grad = 0.0;
    double diff = 0.0;
    double grad_norm = 0.0;
};

struct TrainResult {
    fs::path checkpoint;
    std::vector<StepRecord> steps;  // this invocation only
    std::vector<MetricReport> validation;  // one per completed epoch
};

/// Trains into run_dir (config.json, log.jsonl, checkpoint). With `resume`,
/// continues from the checkpoint already in run_dir.
TrainResult train(const RunConfig& config, const fs::path& run_dir, bool resume = false,
                  const ProgressFn& progress = {});

struct FrameMetrics {
    std::string id;
    MetricReport metrics;
    std::uint64_t sparse_seed = 0;
    std::uint64_t noise_seed = 0;
};

struct EvalResult {
    MetricReport mean;
    std::vector<FrameMetrics> frames;
};

/// Sparse seed and noise seed used for frame `index` of an evaluation split.
std::uint64_t eval_sparse_seed(std::uint64_t data_seed, std::size_t index, std::int64_t n_points);
std::uint64_t eval_noise_seed(std::uint64_t noise_seed, std::size_t index);

/// Model built from a checkpoint's config with its parameters loaded.
std::unique_ptr<Model> load_model(const fs::path& checkpoint);

/// Runs the full pipeline on every frame of a loaded split. Frames must have
/// the model's resolution. With dump_dir set, predictions are saved there.
EvalResult evaluate_split(const Model& model, const std::vector<Sample>& split,
                          std::int64_t n_points, std::uint64_t data_seed,
                          std::uint64_t noise_seed, const fs::path& dump_dir = {});

/// Writes metrics.csv (one aggregate row) and frames.json under out_dir.
/// Uses n_points, data_seed, noise_seed and dump_predictions from `config`.
EvalResult evaluate(const Model& model, const RunConfig& config, const fs::path& manifest,
                    const fs::path& out_dir);

struct SweepRow {
    std::int64_t level = 0;
    std::vector<double> rmse;  // per seed, frame-averaged
    std::vector<double> rel;
    double rmse_mean = 0.0, rmse_std = 0.0, rel_mean = 0.0, rel_std = 0.0;
};

/// Resparsifies the evaluation split at every sweep level for every sweep
/// seed; writes sweep.csv and sweep_runs.csv under out_dir.
std::vector<SweepRow> sparsity_sweep(const Model& model, const RunConfig& config,
                                     const fs::path& out_dir, const ProgressFn& progress = {});

struct AblationRow {
    std::string variant;
    std::string label;
    std::vector<double> rmse;  // per seed
    MetricReport mean;         // seed-averaged
    double rmse_std = 0.0;
};

/// Trains and evaluates the four variants for every ablation seed under out_dir.
std::vector<AblationRow> ablate(const RunConfig& config, const fs::path& out_dir,
                                const ProgressFn& progress = {});

struct InferRequest {
    fs::path image;
    fs::path sparse;             // 16-bit depth with sidecar; raw 0 = no measurement.
                                 // When empty, n_points are sampled from the ground truth.
    fs::path ground_truth;       // optional
    std::optional<Intrinsics> intrinsics;
    bool point_cloud = false;
};

struct InferResult {
    fs::path depth;
    fs::path error_map;   // empty unless ground truth was given
    fs::path point_cloud; // empty unless requested
    std::optional<MetricReport> metrics;
};

InferResult infer(const Model& model, const RunConfig& config, const InferRequest& request,
                  const fs::path& out_dir);

/// Absolute-error heat map: black at zero error, white at >= max_error_mm.
Tensor error_heatmap(const Tensor& pred_mm, const Tensor& gt_mm, const Tensor& mask,
                     double max_error_mm);

/// Back-projects every pixel of `depth` (mask set) with the pinhole model.
struct CloudPoint {
    double x, y, z;
    std::uint8_t r, g, b;
};
std::vector<CloudPoint> back_project(const DepthMap& depth, const Tensor& image,
                                     const Intrinsics& intrinsics);
void write_ply(const fs::path& path, const std::vector<CloudPoint>& points);

}  // namespace depthdiff
