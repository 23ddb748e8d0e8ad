// Copyright (C) 2026 The depthdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace depthdiff {

/// Every tunable of a run. Each field is a documented key of the JSON config
/// file and can be overridden by name (see config_keys()).
struct RunConfig {
    // data
    int height = 64;
    int width = 80;
    double d_min = 10.0;
    double d_max = 200.0;
    int n_points = 500;
    std::string train_manifest = "data/train.tsv";
    std::string val_manifest = "data/val.tsv";
    std::string eval_manifest = "data/eval.tsv";

    // synthetic data (make-synth)
    int synth_train = 64;
    int synth_val = 8;
    int synth_eval = 16;
    std::uint64_t synth_seed = 1;

    // diffusion
    int num_timesteps = 1000;
    int sampling_steps = 20;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    double clip_x0 = 1.0;  // clamp of every sampler x0 estimate (0 disables)

    // architecture
    int width_full = 32;
    int width_half = 48;
    int width_quarter = 64;
    int width_eighth = 96;
    int hidden_channels = 64;
    int denoiser_width = 32;
    int embed_dim = 32;
    int fusion_steps = 5;
    int spn_iterations = 6;
    bool sparse_anchor = true;
    std::string encoder = "conv";
    std::string denoiser_output = "velocity";  // velocity | noise
    std::string variant = "full";  // full | baseline | no_guidance | no_init

    // objective
    double gamma = 0.9;
    double w_depth = 1.0;
    double w_grad = 1.0;
    double w_diff = 1.0;

    // optimization
    std::string optimizer = "adamw";
    double lr = 1e-3;
    double weight_decay = 1e-2;
    double grad_clip = 1.0;
    int batch_size = 2;
    int epochs = 30;
    int max_steps = 0;  // 0: no cap
    int crop_height = 0;  // random training crops; 0 trains on full frames
    int crop_width = 0;
    bool freeze_spn = false;

    // seeds
    std::uint64_t seed = 0;          // parameter initialization
    std::uint64_t data_seed = 0;     // batch order, sparsification
    std::uint64_t noise_seed = 0;    // diffusion noise

    // evaluation
    std::string sweep_levels = "50,500,5000,50000";
    std::string sweep_seeds = "0,1,2,3,4";
    std::string ablation_seeds = "0,1,2";
    bool dump_predictions = false;

    void validate() const;
};

RunConfig fullscale_preset();

enum class KeyType { kInt, kUint, kDouble, kBool, kString };

struct ConfigKey {
    std::string name;
    KeyType type;
    std::string help;
};

const std::vector<ConfigKey>& config_keys();

/// Sets a key from its textual form; unknown keys and malformed values throw.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);
std::string get_config_value(const RunConfig& cfg, const std::string& key);

std::string config_to_json(const RunConfig& cfg, int indent = 2);
/// Missing keys keep their defaults; unknown keys throw.
RunConfig config_from_json(const std::string& text);
/// Applies only the keys present in `text`.
void merge_config_json(RunConfig& cfg, const std::string& text);
std::string read_text(const std::filesystem::path& path);
RunConfig load_config(const std::filesystem::path& path);
void save_config(const RunConfig& cfg, const std::filesystem::path& path);

/// Comma-separated integer list ("50,500").
std::vector<std::int64_t> parse_int_list(const std::string& text);


}  // namespace depthdiff
