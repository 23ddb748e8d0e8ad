// Copyright (C) 2026 The depthdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "depthdiff/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <variant>

#include <json.hpp>

#include "depthdiff/error.hpp"

namespace depthdiff {

using nlohmann::json;

namespace {

using Member = std::variant<int RunConfig::*, std::uint64_t RunConfig::*, double RunConfig::*,
                            bool RunConfig::*, std::string RunConfig::*>;

struct Entry {
    ConfigKey key;
    Member member;
};

#define DD_KEY(field, kind, text) Entry{{#field, KeyType::kind, text}, &RunConfig::field}

const std::vector<Entry>& entries() {
    static const std::vector<Entry> table = {
        DD_KEY(height, kInt, "image height in pixels (divisible by 4)"),
        DD_KEY(width, kInt, "image width in pixels (divisible by 4)"),
        DD_KEY(d_min, kDouble, "lower end of the depth range, mm"),
        DD_KEY(d_max, kDouble, "upper end of the depth range, mm"),
        DD_KEY(n_points, kInt, "sparse points per frame"),
        DD_KEY(train_manifest, kString, "training split manifest"),
        DD_KEY(val_manifest, kString, "held-out split evaluated after every epoch"),
        DD_KEY(eval_manifest, kString, "evaluation split manifest"),
        DD_KEY(synth_train, kInt, "make-synth: training frames"),
        DD_KEY(synth_val, kInt, "make-synth: validation frames"),
        DD_KEY(synth_eval, kInt, "make-synth: evaluation frames"),
        DD_KEY(synth_seed, kUint, "make-synth: scene seed"),
        DD_KEY(num_timesteps, kInt, "diffusion timesteps T"),
        DD_KEY(sampling_steps, kInt, "sampler steps S"),
        DD_KEY(beta_start, kDouble, "first beta of the linear schedule"),
        DD_KEY(beta_end, kDouble, "last beta of the linear schedule"),
        DD_KEY(clip_x0, kDouble, "clamp sampler x0 estimates to [-clip_x0, clip_x0] (0 disables)"),
        DD_KEY(width_full, kInt, "backbone full-resolution width"),
        DD_KEY(width_half, kInt, "backbone half-resolution width"),
        DD_KEY(width_quarter, kInt, "backbone quarter-resolution width"),
        DD_KEY(width_eighth, kInt, "backbone eighth-resolution width"),
        DD_KEY(hidden_channels, kInt, "fusion hidden channels"),
        DD_KEY(denoiser_width, kInt, "denoiser base width"),
        DD_KEY(embed_dim, kInt, "timestep embedding size (even)"),
        DD_KEY(fusion_steps, kInt, "fusion iterations I"),
        DD_KEY(spn_iterations, kInt, "propagation rounds"),
        DD_KEY(sparse_anchor, kBool, "re-impose sparse measurements after each propagation round"),
        DD_KEY(encoder, kString, "backbone encoder kind"),
        DD_KEY(denoiser_output, kString, "noise | velocity (eps rebuilt from a velocity head)"),
        DD_KEY(variant, kString, "full | baseline | no_guidance | no_init"),
        DD_KEY(gamma, kDouble, "gradient loss decay"),
        DD_KEY(w_depth, kDouble, "depth loss weight"),
        DD_KEY(w_grad, kDouble, "gradient loss weight"),
        DD_KEY(w_diff, kDouble, "diffusion loss weight"),
        DD_KEY(optimizer, kString, "adamw | adam | sgd"),
        DD_KEY(lr, kDouble, "learning rate"),
        DD_KEY(weight_decay, kDouble, "weight decay"),
        DD_KEY(grad_clip, kDouble, "global gradient norm cap (0 disables)"),
        DD_KEY(batch_size, kInt, "frames per optimizer step"),
        DD_KEY(epochs, kInt, "passes over the training split"),
        DD_KEY(max_steps, kInt, "stop after this many optimizer steps (0: no cap)"),
        DD_KEY(crop_height, kInt, "training crop height (0: full frame)"),
        DD_KEY(crop_width, kInt, "training crop width (0: full frame)"),
        DD_KEY(freeze_spn, kBool, "keep the propagation head fixed during training"),
        DD_KEY(seed, kUint, "parameter initialization seed"),
        DD_KEY(data_seed, kUint, "batch order and sparsification seed"),
        DD_KEY(noise_seed, kUint, "diffusion noise seed"),
        DD_KEY(sweep_levels, kString, "sparsity-sweep point counts"),
        DD_KEY(sweep_seeds, kString, "sparsity-sweep sparsification seeds"),
        DD_KEY(ablation_seeds, kString, "ablation training seeds"),
        DD_KEY(dump_predictions, kBool, "evaluate: also write predicted depth maps"),
    };
    return table;
}

#undef DD_KEY

const Entry& find(const std::string& key) {
    for (const auto& e : entries()) {
        if (e.key.name == key) return e;
    }
    fail(ErrorCode::kInvalidArgument, "unknown config key '" + key + "'");
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
    T v{};
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    require(ec == std::errc() && ptr == end, ErrorCode::kInvalidArgument,
            "config key '" + key + "': cannot parse '" + text + "'");
    return v;
}

std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

void RunConfig::validate() const {
    auto check = [](bool ok, const std::string& msg) {
        require(ok, ErrorCode::kInvalidArgument, "config: " + msg);
    };
    check(height > 0 && width > 0 && height % 4 == 0 && width % 4 == 0,
          "height and width must be positive multiples of 4");
    check(d_min > 0.0 && d_max > d_min, "need 0 < d_min < d_max");
    check(n_points >= 0, "n_points must be non-negative");
    check(num_timesteps >= 1 && sampling_steps >= 1 && sampling_steps <= num_timesteps,
          "need 1 <= sampling_steps <= num_timesteps");
    check(beta_start > 0.0 && beta_end < 1.0 && beta_start <= beta_end,
          "need 0 < beta_start <= beta_end < 1");
    check(clip_x0 >= 0.0, "clip_x0 must be >= 0");
    check(width_full >= 2 && width_full % 2 == 0 && width_half > 0 && width_quarter > 0 &&
              width_eighth > 0 && hidden_channels > 0 && denoiser_width > 0,
          "widths must be positive (width_full even)");
    check(embed_dim >= 2 && embed_dim % 2 == 0, "embed_dim must be even");
    check(fusion_steps >= 1, "fusion_steps must be >= 1");
    check(spn_iterations >= 1, "spn_iterations must be >= 1");
    check(variant == "full" || variant == "baseline" || variant == "no_guidance" ||
              variant == "no_init",
          "unknown variant '" + variant + "'");
    check(gamma > 0.0 && gamma <= 1.0, "gamma must be in (0, 1]");
    check(w_depth >= 0.0 && w_grad >= 0.0 && w_diff >= 0.0, "loss weights must be >= 0");
    check(denoiser_output == "noise" || denoiser_output == "velocity",
          "unknown denoiser_output '" + denoiser_output + "'");
    check(optimizer == "adamw" || optimizer == "adam" || optimizer == "sgd",
          "unknown optimizer '" + optimizer + "'");
    check(lr > 0.0 && weight_decay >= 0.0 && grad_clip >= 0.0, "invalid optimizer settings");
    check(batch_size >= 1 && epochs >= 0 && max_steps >= 0, "invalid batch/epoch settings");
    check(crop_height >= 0 && crop_width >= 0 && crop_height % 4 == 0 && crop_width % 4 == 0 &&
              crop_height <= height && crop_width <= width && (crop_height == 0) == (crop_width == 0),
          "crop size must be a multiple of 4 within the frame, both set or both 0");
    parse_int_list(sweep_levels);
    parse_int_list(sweep_seeds);
    parse_int_list(ablation_seeds);
}

RunConfig fullscale_preset() {
    RunConfig c;
    c.height = 256;
    c.width = 320;
    c.batch_size = 6;
    c.epochs = 36;
    return c;
}

const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = [] {
        std::vector<ConfigKey> k;
        for (const auto& e : entries()) k.push_back(e.key);
        return k;
    }();
    return keys;
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
    const Entry& e = find(key);
    std::visit(
        [&](auto member) {
            using T = std::remove_reference_t<decltype(cfg.*member)>;
            if constexpr (std::is_same_v<T, std::string>) {
                cfg.*member = value;
            } else if constexpr (std::is_same_v<T, bool>) {
                if (value == "true" || value == "1" || value == "on") {
                    cfg.*member = true;
                } else if (value == "false" || value == "0" || value == "off") {
                    cfg.*member = false;
                } else {
                    fail(ErrorCode::kInvalidArgument,
                         "config key '" + key + "': expected a boolean, got '" + value + "'");
                }
            } else {
                cfg.*member = parse_number<T>(key, value);
            }
        },
        e.member);
}

std::string get_config_value(const RunConfig& cfg, const std::string& key) {
    const Entry& e = find(key);
    return std::visit(
        [&](auto member) -> std::string {
            using T = std::remove_cvref_t<decltype(cfg.*member)>;
            if constexpr (std::is_same_v<T, std::string>) {
                return cfg.*member;
            } else if constexpr (std::is_same_v<T, bool>) {
                return cfg.*member ? "true" : "false";
            } else if constexpr (std::is_same_v<T, double>) {
                return format_double(cfg.*member);
            } else {
                return std::to_string(cfg.*member);
            }
        },
        e.member);
}

std::string config_to_json(const RunConfig& cfg, int indent) {
    json j = json::object();
    for (const auto& e : entries()) {
        std::visit([&](auto member) { j[e.key.name] = cfg.*member; }, e.member);
    }
    return j.dump(indent);
}

void merge_config_json(RunConfig& cfg, const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& ex) {
        fail(ErrorCode::kFormat, std::string("config is not valid JSON: ") + ex.what());
    }
    require(j.is_object(), ErrorCode::kFormat, "config must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const Entry& e = find(it.key());
        std::visit(
            [&](auto member) {
                using T = std::remove_reference_t<decltype(cfg.*member)>;
                try {
                    cfg.*member = it.value().template get<T>();
                } catch (const json::exception&) {
                    fail(ErrorCode::kFormat, "config key '" + it.key() + "' has the wrong type");
                }
            },
            e.member);
    }
}

RunConfig config_from_json(const std::string& text) {
    RunConfig cfg;
    merge_config_json(cfg, text);
    return cfg;
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), ErrorCode::kIo, "missing config: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RunConfig load_config(const std::filesystem::path& path) { return config_from_json(read_text(path)); }

void save_config(const RunConfig& cfg, const std::filesystem::path& path) {
    std::ofstream out(path);
    require(out.good(), ErrorCode::kIo, "cannot write " + path.string());
    out << config_to_json(cfg) << "\n";
}

std::vector<std::int64_t> parse_int_list(const std::string& text) {
    std::vector<std::int64_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        require(b != std::string::npos, ErrorCode::kInvalidArgument,
                "empty entry in list '" + text + "'");
        out.push_back(parse_number<std::int64_t>("list", item.substr(b, e - b + 1)));
    }
    require(!out.empty(), ErrorCode::kInvalidArgument, "empty list");
    return out;
}

}  // namespace depthdiff
