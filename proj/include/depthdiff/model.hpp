// Copyright (C) 2026 The depthdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "depthdiff/backbone.hpp"
#include "depthdiff/config.hpp"
#include "depthdiff/data.hpp"
#include "depthdiff/diffusion.hpp"
#include "depthdiff/grad_fusion.hpp"
#include "depthdiff/optim.hpp"
#include "depthdiff/refinement.hpp"

namespace depthdiff {

enum class Variant { kFull, kBaseline, kNoGuidance, kNoInit };

Variant parse_variant(const std::string& name);
std::string variant_name(Variant v);

/// Everything the pipeline produces for one batch; depths are normalized.
struct ModelOutput {
    BackboneOutput backbone;
    FusionResult fusion;
    Var guidance;       // quarter resolution; undefined for the baseline
    Var depth_quarter;  // sampler output (fusion depth for the baseline)
    Var depth_up;       // convex-upsampled
    Var depth_final;    // after propagation
};

struct LossTerms {
    Var total;
    double depth = 0.0;
    double grad = 0.0;
    double diff = 0.0;
};

/// Batched ground truth in the forms the objectives consume.
struct Targets {
    Tensor depth;      // (N,1,H,W) normalized
    Tensor mask;       // (N,1,H,W)
    Tensor depth_q;    // (N,1,H/4,W/4) normalized
    Tensor mask_q;
};

Targets make_targets(const Tensor& depth_mm, const Tensor& mask, const DepthRange& range);

class Model {
public:
    explicit Model(const RunConfig& config);
    Model(const Model&) = delete;
    Model& operator=(const Model&) = delete;

    /// image (N,3,H,W); sparse_mm / sparse_mask (N,1,H,W).
    ModelOutput forward(const Var& image, const Tensor& sparse_mm, const Tensor& sparse_mask,
                        std::uint64_t noise_seed) const;

    /// w_D L_D + w_G L_G + w_diff L_diff for one batch; `step_seed` drives
    /// the diffusion-loss timestep and noise.
    LossTerms loss(const ModelOutput& out, const Targets& targets, std::uint64_t step_seed) const;

    /// Dense prediction in millimetres for one frame, no graph recorded.
    Tensor predict_mm(const Tensor& image, const Tensor& sparse_mm, const Tensor& sparse_mask,
                      std::uint64_t noise_seed) const;

    const RunConfig& config() const { return config_; }
    Variant variant() const { return variant_; }
    const NoiseSchedule& schedule() const { return schedule_; }
    DepthRange range() const { return {config_.d_min, config_.d_max}; }

    /// All learned tensors in a fixed order with stable names.
    ParamList& parameters() { return params_; }
    /// The subset the optimizer updates (excludes the propagation head when frozen).
    ParamList trainable_parameters();
    std::size_t parameter_count() const;

private:
    RunConfig config_;
    Variant variant_;
    NoiseSchedule schedule_;
    Backbone backbone_;
    GradFusion fusion_;
    ConditionProjection guidance_;
    Denoiser denoiser_;
    UpsampleMaskHead upmask_;
    SpnRefiner spn_;
    ParamList params_;
};

struct TrainState {
    long long step = 0;
    int epoch = 0;  // completed epochs
};

/// Parameters, config snapshot, seeds, and optimizer state in one file.
void save_checkpoint(const std::filesystem::path& path, Model& model, Optimizer* optimizer,
                     const TrainState& state);

struct LoadedCheckpoint {
    RunConfig config;
    TrainState state;
    bool has_optimizer = false;
    long long optimizer_step = 0;
    std::vector<Tensor> first_moments;
    std::vector<Tensor> second_moments;
};

/// Reads only the config and training state.
RunConfig checkpoint_config(const std::filesystem::path& path);
/// Loads parameters into a model built from checkpoint_config(path).
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, Model& model);

OptimizerOptions optimizer_options(const RunConfig& config);

}  // namespace depthdiff
