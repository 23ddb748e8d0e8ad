// Copyright (C) 2026 The depthdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "depthdiff/model.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

#include "depthdiff/data.hpp"
#include "depthdiff/objectives.hpp"

namespace depthdiff {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'D', 'D', 'C', 'K', 'P', 'T', '0', '1'};

BackboneWidths widths_of(const RunConfig& c) {
    return {c.width_full, c.width_half, c.width_quarter, c.width_eighth};
}

}  // namespace

Variant parse_variant(const std::string& name) {
    if (name == "full") return Variant::kFull;
    if (name == "baseline") return Variant::kBaseline;
    if (name == "no_guidance") return Variant::kNoGuidance;
    if (name == "no_init") return Variant::kNoInit;
    fail(ErrorCode::kInvalidArgument, "unknown variant '" + name + "'");
}

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::kFull: return "full";
        case Variant::kBaseline: return "baseline";
        case Variant::kNoGuidance: return "no_guidance";
        case Variant::kNoInit: return "no_init";
    }
    return "full";
}

Targets make_targets(const Tensor& depth_mm, const Tensor& mask, const DepthRange& range) {
    Targets t;
    t.depth = normalize_depth(depth_mm, range);
    t.mask = mask;
    quarter_ground_truth(t.depth, mask, t.depth_q, t.mask_q);
    return t;
}

Model::Model(const RunConfig& config)
    : config_(config), variant_(parse_variant(config.variant)) {
    config.validate();
    Rng rng(mix_seed({config.seed, 0xC0DEull}));
    schedule_ = build_schedule(config.num_timesteps, config.beta_start, config.beta_end,
                               config.sampling_steps);
    backbone_ = Backbone(widths_of(config), config.d_min, config.d_max, rng, config.encoder);
    fusion_ = GradFusion(config.width_quarter, config.hidden_channels, rng);
    guidance_ = ConditionProjection(config.hidden_channels, rng);
    denoiser_ = Denoiser(config.denoiser_width, config.embed_dim, config.num_timesteps, rng);
    if (config.denoiser_output == "velocity") denoiser_.set_velocity_output(schedule_.alpha_bars);
    upmask_ = UpsampleMaskHead(config.width_quarter, rng);
    spn_ = SpnRefiner(config.width_full, rng);

    backbone_.collect(params_, "backbone");
    fusion_.collect(params_, "fusion");
    guidance_.collect(params_, "guidance");
    denoiser_.collect(params_, "denoiser");
    upmask_.collect(params_, "upmask");
    spn_.collect(params_, "spn");
}

ParamList Model::trainable_parameters() {
    ParamList out;
    for (const auto& p : params_) {
        if (config_.freeze_spn && p.name.rfind("spn.", 0) == 0) continue;
        out.push_back(p);
    }
    return out;
}

std::size_t Model::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.var->value().size();
    return n;
}

ModelOutput Model::forward(const Var& image, const Tensor& sparse_mm, const Tensor& sparse_mask,
                           std::uint64_t noise_seed) const {
    ModelOutput out;
    out.backbone = backbone_.extract(image, sparse_mm, sparse_mask);
    FusionInit init = fusion_.init_state(out.backbone.features_quarter, out.backbone.coarse_depth);
    out.fusion = fusion_.run_fusion(init.state, init.depth, init.gradient, config_.fusion_steps);

    if (variant_ == Variant::kBaseline) {
        out.depth_quarter = out.fusion.depth;
    } else {
        out.guidance = variant_ == Variant::kNoGuidance
                           ? constant(Tensor(out.fusion.depth.shape(), 0.0))
                           : guidance_(out.fusion.hidden);
        SampleOptions opts;
        opts.from_pure_noise = variant_ == Variant::kNoInit;
        opts.clip_x0 = config_.clip_x0;
        out.depth_quarter = sample(out.fusion.depth, out.guidance, make_noise_predictor(denoiser_),
                                   schedule_, noise_seed, opts);
    }

    out.depth_up = convex_upsample(out.depth_quarter, upmask_(out.backbone.features_quarter));

    if (!config_.sparse_anchor) {
        out.depth_final = spn_refine(spn_, out.depth_up, out.backbone.features_full,
                                     config_.spn_iterations);
        return out;
    }
    // Measured pixels are re-imposed before and after every propagation round.
    const Tensor sparse_norm = normalize_depth(sparse_mm, range());
    Tensor keep(sparse_mask.shape());
    Tensor fixed(sparse_mask.shape());
    for (std::size_t i = 0; i < keep.size(); ++i) {
        const bool m = sparse_mask[i] > 0.5;
        keep[i] = m ? 0.0 : 1.0;
        fixed[i] = m ? sparse_norm[i] : 0.0;
    }
    const Var keep_v = constant(std::move(keep));
    const Var fixed_v = constant(std::move(fixed));
    auto anchor = [&](const Var& d) { return add(mul(d, keep_v), fixed_v); };
    const Var weights = spn_.affinities(out.backbone.features_full);
    Var d = anchor(out.depth_up);
    for (int it = 0; it < config_.spn_iterations; ++it) d = anchor(spn_propagate(d, weights, 1));
    out.depth_final = d;
    return out;
}

LossTerms Model::loss(const ModelOutput& out, const Targets& targets,
                      std::uint64_t step_seed) const {
    LossTerms terms;
    Var l_d = depth_loss(out.depth_up, out.depth_final, targets.depth, targets.mask);
    Var l_g = gradient_loss(out.fusion.gradients,
                            compute_gt_gradient(targets.depth_q, targets.mask_q), config_.gamma);
    terms.depth = l_d.value()[0];
    terms.grad = l_g.value()[0];
    Var total = add(scale(l_d, config_.w_depth), scale(l_g, config_.w_grad));

    if (variant_ != Variant::kBaseline && config_.w_diff > 0.0) {
        Rng rng(mix_seed({step_seed, 0xD1FFull}));
        std::uniform_int_distribution<int> pick(0, schedule_.num_timesteps - 1);
        const int t = pick(rng);
        Tensor x0 = targets.depth_q;
        const Tensor& fallback = out.fusion.depth.value();
        for (std::size_t i = 0; i < x0.size(); ++i) {
            if (targets.mask_q[i] <= 0.5) x0[i] = fallback[i];
        }
        const Tensor eps = gaussian_noise(x0.shape(), mix_seed({step_seed, 0xE95ull}));
        Var x_t = constant(forward_diffuse(x0, t, eps, schedule_));
        Var l_diff = diffusion_loss(constant(eps), predict_noise(denoiser_, x_t, out.guidance, t));
        terms.diff = l_diff.value()[0];
        total = add(total, scale(l_diff, config_.w_diff));
    }
    terms.total = total;
    return terms;
}

Tensor Model::predict_mm(const Tensor& image, const Tensor& sparse_mm, const Tensor& sparse_mask,
                         std::uint64_t noise_seed) const {
    NoGradGuard guard;
    ModelOutput out = forward(constant(image), sparse_mm, sparse_mask, noise_seed);
    return denormalize_depth(out.depth_final.value(), range());
}

OptimizerOptions optimizer_options(const RunConfig& config) {
    OptimizerOptions o;
    o.kind = parse_optimizer(config.optimizer);
    o.lr = config.lr;
    o.weight_decay = config.weight_decay;
    return o;
}

void save_checkpoint(const std::filesystem::path& path, Model& model, Optimizer* optimizer,
                     const TrainState& state) {
    json header;
    header["config"] = json::parse(config_to_json(model.config()));
    header["seeds"] = {{"seed", model.config().seed},
                       {"data_seed", model.config().data_seed},
                       {"noise_seed", model.config().noise_seed}};
    header["step"] = state.step;
    header["epoch"] = state.epoch;
    json params = json::array();
    for (const auto& p : model.parameters()) {
        const Shape s = p.var->shape();
        params.push_back({{"name", p.name}, {"shape", {s.n, s.c, s.h, s.w}}});
    }
    header["params"] = params;
    if (optimizer) {
        json names = json::array();
        for (const auto& p : model.trainable_parameters()) names.push_back(p.name);
        header["optimizer"] = {{"kind", optimizer_name(optimizer->options().kind)},
                               {"step", optimizer->steps_taken()},
                               {"params", names}};
    }
    const std::string text = header.dump();

    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        require(out.good(), ErrorCode::kIo, "cannot write " + tmp.string());
        out.write(kMagic, sizeof kMagic);
        const std::uint64_t len = text.size();
        out.write(reinterpret_cast<const char*>(&len), sizeof len);
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        auto put = [&](const Tensor& t) {
            out.write(reinterpret_cast<const char*>(t.data()),
                      static_cast<std::streamsize>(t.size() * sizeof(double)));
        };
        for (const auto& p : model.parameters()) put(p.var->value());
        if (optimizer) {
            for (const auto& m : optimizer->first_moments()) put(m);
            for (const auto& v : optimizer->second_moments()) put(v);
        }
        require(out.good(), ErrorCode::kIo, "write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

namespace {

json read_header(std::ifstream& in, const std::filesystem::path& path) {
    require(in.good(), ErrorCode::kIo, "missing checkpoint: " + path.string());
    char magic[8] = {};
    in.read(magic, sizeof magic);
    require(in.good() && std::memcmp(magic, kMagic, sizeof magic) == 0, ErrorCode::kFormat,
            path.string() + " is not a checkpoint");
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof len);
    require(in.good() && len < (1ull << 30), ErrorCode::kFormat,
            "corrupt checkpoint header in " + path.string());
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    require(in.good(), ErrorCode::kFormat, "truncated checkpoint " + path.string());
    try {
        return json::parse(text);
    } catch (const json::exception&) {
        fail(ErrorCode::kFormat, "corrupt checkpoint header in " + path.string());
    }
}

}  // namespace

RunConfig checkpoint_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    json header = read_header(in, path);
    return config_from_json(header["config"].dump());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, Model& model) {
    std::ifstream in(path, std::ios::binary);
    json header = read_header(in, path);
    LoadedCheckpoint ck;
    ck.config = config_from_json(header["config"].dump());
    ck.state.step = header.value("step", 0LL);
    ck.state.epoch = header.value("epoch", 0);

    const json& params = header["params"];
    ParamList& list = model.parameters();
    require(params.size() == list.size(), ErrorCode::kFormat,
            "checkpoint has " + std::to_string(params.size()) + " tensors, model expects " +
                std::to_string(list.size()));
    auto get = [&](Tensor& t) {
        in.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(t.size() * sizeof(double)));
        require(in.good(), ErrorCode::kFormat, "truncated checkpoint " + path.string());
    };
    for (std::size_t i = 0; i < list.size(); ++i) {
        const auto shape = params[i]["shape"].get<std::vector<int>>();
        const Shape s = list[i].var->shape();
        require(params[i]["name"].get<std::string>() == list[i].name &&
                    shape == std::vector<int>{s.n, s.c, s.h, s.w},
                ErrorCode::kFormat,
                "checkpoint tensor " + params[i]["name"].get<std::string>() +
                    " does not match model tensor " + list[i].name + " " + s.str());
        get(list[i].var->mutable_value());
    }
    if (header.contains("optimizer")) {
        ck.has_optimizer = true;
        ck.optimizer_step = header["optimizer"]["step"].get<long long>();
        const auto names = header["optimizer"]["params"].get<std::vector<std::string>>();
        ParamList trainable = model.trainable_parameters();
        require(names.size() == trainable.size(), ErrorCode::kFormat,
                "checkpoint optimizer state does not match the trainable parameters");
        for (auto* moments : {&ck.first_moments, &ck.second_moments}) {
            for (const auto& p : trainable) {
                Tensor t(p.var->shape());
                get(t);
                moments->push_back(std::move(t));
            }
        }
    }
    return ck;
}

}  // namespace depthdiff
