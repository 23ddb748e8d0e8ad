// Copyright (C) 2026 The depthdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "depthdiff/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace depthdiff {

using nlohmann::json;

namespace {

json config_json(const RunConfig& cfg) { return json::parse(config_to_json(cfg, -1)); }

json seeds_json(const RunConfig& cfg) {
    return {{"seed", cfg.seed}, {"data_seed", cfg.data_seed}, {"noise_seed", cfg.noise_seed}};
}

std::string csv_header_comment(const RunConfig& cfg) {
    return "# config " + config_to_json(cfg, -1) + "\n";
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::trunc) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::out | mode);
    require(out.good(), ErrorCode::kIo, "cannot write " + path.string());
    return out;
}

std::vector<Sample> load_checked(const std::string& manifest, int height, int width) {
    std::vector<Sample> split = load_split(manifest);
    for (const auto& s : split) {
        require(s.depth.height() == height && s.depth.width() == width, ErrorCode::kShapeMismatch,
                "resolution mismatch: frame " + s.id + " is " + std::to_string(s.depth.height()) +
                    "x" + std::to_string(s.depth.width()) + " but the model expects " +
                    std::to_string(height) + "x" + std::to_string(width));
    }
    return split;
}

double mean_of(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / v.size();
}

double std_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return std::sqrt(acc / (v.size() - 1));
}

json metrics_json(const MetricReport& m) {
    return {{"rmse_mm", m.rmse_mm}, {"mae_mm", m.mae_mm}, {"rel", m.rel}, {"delta", m.delta},
            {"n_valid", m.n_valid}};
}

struct Batch {
    Tensor image, depth, mask, sparse, sparse_mask;
    std::vector<std::string> ids;
};

}  // namespace

SynthSummary make_synth(RunConfig& config, const fs::path& out_dir) {
    config.validate();
    SceneConfig sc;
    sc.height = config.height;
    sc.width = config.width;
    sc.range = {config.d_min, config.d_max};
    const Intrinsics k = scene_intrinsics(sc);

    SynthSummary summary;
    const std::pair<const char*, int> splits[] = {
        {"train", config.synth_train}, {"val", config.synth_val}, {"eval", config.synth_eval}};
    for (std::size_t s = 0; s < 3; ++s) {
        const std::string name = splits[s].first;
        std::vector<ManifestEntry> entries;
        for (int i = 0; i < splits[s].second; ++i) {
            const std::uint64_t scene_seed = mix_seed({config.synth_seed, s, static_cast<std::uint64_t>(i)});
            const SceneSample scene = synth_scene(scene_seed, sc);
            char id[64];
            std::snprintf(id, sizeof id, "%s_%04d", name.c_str(), i);
            const fs::path image = out_dir / name / (std::string(id) + "_rgb.png");
            const fs::path depth = out_dir / name / (std::string(id) + "_depth.png");
            fs::create_directories(image.parent_path());
            write_png_rgb(image, scene.image);
            DepthMeta meta;
            meta.range = sc.range;
            meta.extra_json = json{{"generator", "synth_scene"},
                                   {"scene_seed", scene_seed},
                                   {"synth_seed", config.synth_seed},
                                   {"split", name},
                                   {"index", i},
                                   {"intrinsics", {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}}},
                                   {"config", config_json(config)}}
                                  .dump();
            save_depth(scene.depth, depth, meta);
            entries.push_back({id, image, depth});
            ++summary.frames;
        }
        const fs::path manifest = out_dir / (name + ".tsv");
        write_manifest(manifest, entries);
        summary.manifests.push_back(manifest);
    }
    config.train_manifest = summary.manifests[0].string();
    config.val_manifest = summary.manifests[1].string();
    config.eval_manifest = summary.manifests[2].string();
    save_config(config, out_dir / "config.json");
    return summary;
}

std::uint64_t eval_sparse_seed(std::uint64_t data_seed, std::size_t index, std::int64_t n_points) {
    return mix_seed({data_seed, 0xE7A1ull, index, static_cast<std::uint64_t>(n_points)});
}

std::uint64_t eval_noise_seed(std::uint64_t noise_seed, std::size_t index) {
    return mix_seed({noise_seed, 0xE7A2ull, index});
}

std::unique_ptr<Model> load_model(const fs::path& checkpoint) {
    auto model = std::make_unique<Model>(checkpoint_config(checkpoint));
    load_checkpoint(checkpoint, *model);
    return model;
}

TrainResult train(const RunConfig& config, const fs::path& run_dir, bool resume,
                  const ProgressFn& progress) {
    RunConfig cfg = config;
    const fs::path ckpt_path = run_dir / kCheckpointName;
    if (resume) {
        // Architecture and seeds come from the checkpoint; the schedule
        // length may be extended by the caller.
        cfg = checkpoint_config(ckpt_path);
        cfg.epochs = config.epochs;
        cfg.max_steps = config.max_steps;
    }
    cfg.validate();
    fs::create_directories(run_dir);

    const std::vector<Sample> train_set = load_checked(cfg.train_manifest, cfg.height, cfg.width);
    require(!train_set.empty(), ErrorCode::kInvalidArgument,
            "training split " + cfg.train_manifest + " is empty");
    std::vector<Sample> val_set;
    if (!cfg.val_manifest.empty()) val_set = load_checked(cfg.val_manifest, cfg.height, cfg.width);

    Model model(cfg);
    Optimizer opt(model.trainable_parameters(), optimizer_options(cfg));
    TrainState state;
    if (resume) {
        LoadedCheckpoint ck = load_checkpoint(ckpt_path, model);
        state = ck.state;
        if (ck.has_optimizer) {
            opt.restore(ck.optimizer_step, std::move(ck.first_moments), std::move(ck.second_moments));
        }
    }
    save_config(cfg, run_dir / "config.json");
    std::ofstream log = open_out(run_dir / "log.jsonl", resume ? std::ios::app : std::ios::trunc);
    log << json{{"event", resume ? "resume" : "start"},
                {"step", state.step},
                {"epoch", state.epoch},
                {"parameters", model.parameter_count()},
                {"seeds", seeds_json(cfg)},
                {"config", config_json(cfg)}}
               .dump()
        << "\n";
    log.flush();

    const int n = static_cast<int>(train_set.size());
    const int bsz = std::min(cfg.batch_size, n);
    const long long per_epoch = (n + bsz - 1) / bsz;
    const DepthRange range{cfg.d_min, cfg.d_max};
    const bool crop = cfg.crop_height > 0;
    const int ch = crop ? cfg.crop_height : cfg.height;
    const int cw = crop ? cfg.crop_width : cfg.width;

    TrainResult result;
    result.checkpoint = ckpt_path;
    bool capped = false;
    for (int epoch = state.epoch; epoch < cfg.epochs && !capped; ++epoch) {
        std::vector<int> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle_rng(mix_seed({cfg.data_seed, 0xBA7Cull, static_cast<std::uint64_t>(epoch)}));
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        const long long first = std::max(0LL, state.step - epoch * per_epoch);
        for (long long b = first; b < per_epoch; ++b) {
            if (cfg.max_steps > 0 && state.step >= cfg.max_steps) {
                capped = true;
                break;
            }
            Batch batch;
            std::vector<Tensor> img, dep, msk, sp, spm;
            for (long long j = b * bsz; j < std::min<long long>((b + 1) * bsz, n); ++j) {
                const int i = order[static_cast<std::size_t>(j)];
                const Sample& s = train_set[static_cast<std::size_t>(i)];
                const std::uint64_t key[] = {cfg.data_seed, static_cast<std::uint64_t>(epoch),
                                             static_cast<std::uint64_t>(i)};
                SparseDepth sparse = sparsify(s.depth, cfg.n_points,
                                              mix_seed({key[0], 0x5BA5ull, key[1], key[2]}));
                int y0 = 0, x0 = 0;
                if (crop) {
                    Rng crop_rng(mix_seed({key[0], 0xC209ull, key[1], key[2]}));
                    y0 = std::uniform_int_distribution<int>(0, cfg.height - ch)(crop_rng);
                    x0 = std::uniform_int_distribution<int>(0, cfg.width - cw)(crop_rng);
                }
                img.push_back(s.image.crop(y0, x0, ch, cw));
                dep.push_back(s.depth.depth.crop(y0, x0, ch, cw));
                msk.push_back(s.depth.mask.crop(y0, x0, ch, cw));
                sp.push_back(sparse.depth.crop(y0, x0, ch, cw));
                spm.push_back(sparse.mask.crop(y0, x0, ch, cw));
                batch.ids.push_back(s.id);
            }
            batch.image = stack_batch(img);
            batch.sparse = stack_batch(sp);
            batch.sparse_mask = stack_batch(spm);
            const Targets targets = make_targets(stack_batch(dep), stack_batch(msk), range);

            auto where = [&] {
                std::string ids;
                for (const auto& id : batch.ids) ids += (ids.empty() ? "" : ",") + id;
                return "step " + std::to_string(state.step) + " (epoch " + std::to_string(epoch) +
                       ", batch " + std::to_string(b) + ": " + ids + ")";
            };
            opt.zero_grad();
            // Diverged weights usually blow up inside the forward pass before a
            // loss exists; report those against the batch as well.
            LossTerms loss;
            try {
                const ModelOutput out = model.forward(
                    constant(batch.image), batch.sparse, batch.sparse_mask,
                    mix_seed({cfg.noise_seed, 0x7E5ull, static_cast<std::uint64_t>(state.step)}));
                loss = model.loss(out, targets,
                                  mix_seed({cfg.noise_seed, 0xD1Full, static_cast<std::uint64_t>(state.step)}));
            } catch (const Error& e) {
                if (e.code() != ErrorCode::kNonFinite) throw;
                fail(ErrorCode::kNonFinite, "non-finite loss at " + where() + ": " + e.what());
            }
            const double total = loss.total.value()[0];
            if (!std::isfinite(total)) fail(ErrorCode::kNonFinite, "non-finite loss at " + where());
            backward(loss.total);
            const double gn = opt.clip_grad_norm(
                cfg.grad_clip > 0.0 ? cfg.grad_clip : std::numeric_limits<double>::infinity());
            opt.step();

            StepRecord rec{state.step, epoch, total, loss.depth, loss.grad, loss.diff, gn};
            ++state.step;
            result.steps.push_back(rec);
            log << json{{"event", "step"}, {"step", rec.step}, {"epoch", epoch},
                        {"batch", batch.ids}, {"loss", total}, {"loss_depth", loss.depth},
                        {"loss_grad", loss.grad}, {"loss_diff", loss.diff}, {"grad_norm", gn},
                        {"lr", opt.options().lr}}
                       .dump()
                << "\n";
            if (progress && (state.step % 10 == 0 || state.step == 1)) {
                char line[160];
                std::snprintf(line, sizeof line, "step %lld epoch %d loss %.5f (depth %.5f grad %.5f diff %.5f)",
                              state.step, epoch, total, loss.depth, loss.grad, loss.diff);
                progress(line);
            }
        }
        log.flush();
        if (capped) break;
        state.epoch = epoch + 1;
        if (!val_set.empty()) {
            const EvalResult val =
                evaluate_split(model, val_set, cfg.n_points, cfg.data_seed, cfg.noise_seed);
            result.validation.push_back(val.mean);
            log << json{{"event", "epoch"}, {"epoch", state.epoch}, {"step", state.step},
                        {"split", cfg.val_manifest}, {"val", metrics_json(val.mean)}}
                       .dump()
                << "\n";
            if (progress) {
                char line[160];
                std::snprintf(line, sizeof line, "epoch %d val rmse %.3f mm rel %.4f delta %.4f",
                              state.epoch, val.mean.rmse_mm, val.mean.rel, val.mean.delta);
                progress(line);
            }
        }
        save_checkpoint(ckpt_path, model, &opt, state);
    }
    save_checkpoint(ckpt_path, model, &opt, state);
    log << json{{"event", "end"}, {"step", state.step}, {"epoch", state.epoch}}.dump() << "\n";
    return result;
}

EvalResult evaluate_split(const Model& model, const std::vector<Sample>& split,
                          std::int64_t n_points, std::uint64_t data_seed,
                          std::uint64_t noise_seed, const fs::path& dump_dir) {
    const RunConfig& mc = model.config();
    EvalResult result;
    std::vector<MetricReport> reports;
    for (std::size_t i = 0; i < split.size(); ++i) {
        const Sample& s = split[i];
        require(s.depth.height() == mc.height && s.depth.width() == mc.width,
                ErrorCode::kShapeMismatch,
                "resolution mismatch: frame " + s.id + " is " + std::to_string(s.depth.height()) +
                    "x" + std::to_string(s.depth.width()) + " but the model expects " +
                    std::to_string(mc.height) + "x" + std::to_string(mc.width));
        require(n_points <= s.depth.valid_count(), ErrorCode::kInvalidArgument,
                "frame " + s.id + " has " + std::to_string(s.depth.valid_count()) +
                    " valid pixels, fewer than the " + std::to_string(n_points) + " requested");
        FrameMetrics fm;
        fm.id = s.id;
        fm.sparse_seed = eval_sparse_seed(data_seed, i, n_points);
        fm.noise_seed = eval_noise_seed(noise_seed, i);
        const SparseDepth sparse = sparsify(s.depth, n_points, fm.sparse_seed);
        const Tensor pred = model.predict_mm(s.image, sparse.depth, sparse.mask, fm.noise_seed);
        fm.metrics = evaluate_depth(pred, s.depth.depth, s.depth.mask);
        if (!dump_dir.empty()) {
            DepthMeta meta;
            meta.range = model.range();
            meta.extra_json = json{{"id", s.id}, {"n_points", n_points},
                                   {"sparse_seed", fm.sparse_seed}, {"noise_seed", fm.noise_seed},
                                   {"config", config_json(mc)}}
                                  .dump();
            save_depth(DepthMap{pred, Tensor(pred.shape(), 1.0)}, dump_dir / (s.id + ".png"), meta);
        }
        reports.push_back(fm.metrics);
        result.frames.push_back(std::move(fm));
    }
    require(!reports.empty(), ErrorCode::kInvalidArgument, "evaluation split is empty");
    result.mean = mean_report(reports);
    return result;
}

EvalResult evaluate(const Model& model, const RunConfig& config, const fs::path& manifest,
                    const fs::path& out_dir) {
    const RunConfig& mc = model.config();
    const std::vector<Sample> split = load_checked(manifest.string(), mc.height, mc.width);
    fs::create_directories(out_dir);
    const EvalResult r =
        evaluate_split(model, split, config.n_points, config.data_seed, config.noise_seed,
                       config.dump_predictions ? out_dir / "predictions" : fs::path{});

    std::ofstream csv = open_out(out_dir / "metrics.csv");
    csv << csv_header_comment(config);
    csv << "split,frames,n_points,RMSE,MAE,REL,delta\n";
    csv << manifest.string() << ',' << split.size() << ',' << config.n_points << ','
        << fmt(r.mean.rmse_mm) << ',' << fmt(r.mean.mae_mm) << ',' << fmt(r.mean.rel) << ','
        << fmt(r.mean.delta) << '\n';

    json frames = json::array();
    for (const auto& f : r.frames) {
        json j = metrics_json(f.metrics);
        j["id"] = f.id;
        j["sparse_seed"] = f.sparse_seed;
        j["noise_seed"] = f.noise_seed;
        frames.push_back(j);
    }
    std::ofstream fj = open_out(out_dir / "frames.json");
    fj << json{{"config", config_json(config)},
               {"model_config", config_json(mc)},
               {"seeds", seeds_json(config)},
               {"split", manifest.string()},
               {"mean", metrics_json(r.mean)},
               {"frames", frames}}
              .dump(1)
       << "\n";
    return r;
}

std::vector<SweepRow> sparsity_sweep(const Model& model, const RunConfig& config,
                                     const fs::path& out_dir, const ProgressFn& progress) {
    const RunConfig& mc = model.config();
    const std::vector<Sample> split = load_checked(config.eval_manifest, mc.height, mc.width);
    require(!split.empty(), ErrorCode::kInvalidArgument, "evaluation split is empty");
    const auto levels = parse_int_list(config.sweep_levels);
    const auto seeds = parse_int_list(config.sweep_seeds);
    for (const auto level : levels) {
        require(level >= 0, ErrorCode::kInvalidArgument, "negative sweep level");
        for (const auto& s : split) {
            require(level <= s.depth.valid_count(), ErrorCode::kInvalidArgument,
                    "sweep level " + std::to_string(level) + " exceeds the " +
                        std::to_string(s.depth.valid_count()) + " valid pixels of frame " + s.id);
        }
    }

    fs::create_directories(out_dir);
    std::ofstream runs = open_out(out_dir / "sweep_runs.csv");
    runs << csv_header_comment(config) << "level,seed,RMSE,MAE,REL,delta\n";
    std::vector<SweepRow> rows;
    for (const auto level : levels) {
        SweepRow row;
        row.level = level;
        for (const auto seed : seeds) {
            const std::uint64_t data_seed =
                mix_seed({config.data_seed, 0x5EEDull, static_cast<std::uint64_t>(seed)});
            const EvalResult r = evaluate_split(model, split, level, data_seed, config.noise_seed);
            row.rmse.push_back(r.mean.rmse_mm);
            row.rel.push_back(r.mean.rel);
            runs << level << ',' << seed << ',' << fmt(r.mean.rmse_mm) << ','
                 << fmt(r.mean.mae_mm) << ',' << fmt(r.mean.rel) << ',' << fmt(r.mean.delta)
                 << '\n';
            if (progress) {
                char line[128];
                std::snprintf(line, sizeof line, "level %lld seed %lld rmse %.3f mm",
                              static_cast<long long>(level), static_cast<long long>(seed),
                              r.mean.rmse_mm);
                progress(line);
            }
        }
        row.rmse_mean = mean_of(row.rmse);
        row.rmse_std = std_of(row.rmse);
        row.rel_mean = mean_of(row.rel);
        row.rel_std = std_of(row.rel);
        rows.push_back(std::move(row));
    }
    std::ofstream csv = open_out(out_dir / "sweep.csv");
    csv << csv_header_comment(config) << "points,RMSE_mean,RMSE_std,REL_mean,REL_std,seeds\n";
    for (const auto& r : rows) {
        csv << r.level << ',' << fmt(r.rmse_mean) << ',' << fmt(r.rmse_std) << ','
            << fmt(r.rel_mean) << ',' << fmt(r.rel_std) << ',' << r.rmse.size() << '\n';
    }
    return rows;
}

std::vector<AblationRow> ablate(const RunConfig& config, const fs::path& out_dir,
                                const ProgressFn& progress) {
    config.validate();
    const std::pair<const char*, const char*> variants[] = {
        {"baseline", "Baseline"},
        {"no_guidance", "w/o guidance"},
        {"no_init", "w/o init depth"},
        {"full", "Full"}};
    const auto seeds = parse_int_list(config.ablation_seeds);
    std::vector<AblationRow> rows;
    for (const auto& [variant, label] : variants) {
        AblationRow row;
        row.variant = variant;
        row.label = label;
        std::vector<MetricReport> per_seed;
        for (const auto seed : seeds) {
            RunConfig cfg = config;
            cfg.variant = variant;
            cfg.seed = static_cast<std::uint64_t>(seed);
            cfg.data_seed = static_cast<std::uint64_t>(seed);
            cfg.noise_seed = static_cast<std::uint64_t>(seed);
            const fs::path dir = out_dir / variant / ("seed_" + std::to_string(seed));
            if (progress) progress(std::string("training ") + variant + " seed " + std::to_string(seed));
            const TrainResult tr = train(cfg, dir, false, progress);
            const auto model = load_model(tr.checkpoint);
            const EvalResult er = evaluate(*model, cfg, cfg.eval_manifest, dir / "eval");
            per_seed.push_back(er.mean);
            row.rmse.push_back(er.mean.rmse_mm);
            if (progress) {
                char line[128];
                std::snprintf(line, sizeof line, "%s seed %lld eval rmse %.3f mm", variant,
                              static_cast<long long>(seed), er.mean.rmse_mm);
                progress(line);
            }
        }
        row.mean = mean_report(per_seed);
        row.rmse_std = std_of(row.rmse);
        rows.push_back(std::move(row));
    }
    std::ofstream csv = open_out(out_dir / "ablation.csv");
    csv << csv_header_comment(config) << "Method,variant,RMSE,RMSE_std,MAE,REL,delta,seeds\n";
    for (const auto& r : rows) {
        csv << r.label << ',' << r.variant << ',' << fmt(r.mean.rmse_mm) << ','
            << fmt(r.rmse_std) << ',' << fmt(r.mean.mae_mm) << ',' << fmt(r.mean.rel) << ','
            << fmt(r.mean.delta) << ',' << r.rmse.size() << '\n';
    }
    return rows;
}

Tensor error_heatmap(const Tensor& pred_mm, const Tensor& gt_mm, const Tensor& mask,
                     double max_error_mm) {
    require_same_shape(pred_mm.shape(), gt_mm.shape(), "error_heatmap");
    require_same_shape(mask.shape(), gt_mm.shape(), "error_heatmap mask");
    require(max_error_mm > 0.0, ErrorCode::kInvalidArgument, "error_heatmap: bad scale");
    const Shape s = gt_mm.shape();
    Tensor out(Shape{1, 3, s.h, s.w}, 0.0);
    for (int y = 0; y < s.h; ++y) {
        for (int x = 0; x < s.w; ++x) {
            if (mask.at(0, 0, y, x) <= 0.5) continue;
            const double v =
                std::clamp(std::abs(pred_mm.at(0, 0, y, x) - gt_mm.at(0, 0, y, x)) / max_error_mm,
                           0.0, 1.0);
            // "hot": black -> red -> yellow -> white
            out.at(0, 0, y, x) = std::clamp(3.0 * v, 0.0, 1.0);
            out.at(0, 1, y, x) = std::clamp(3.0 * v - 1.0, 0.0, 1.0);
            out.at(0, 2, y, x) = std::clamp(3.0 * v - 2.0, 0.0, 1.0);
        }
    }
    return out;
}

std::vector<CloudPoint> back_project(const DepthMap& depth, const Tensor& image,
                                     const Intrinsics& k) {
    require(k.fx > 0.0 && k.fy > 0.0, ErrorCode::kInvalidArgument,
            "back_project: focal lengths must be positive");
    const int h = depth.height(), w = depth.width();
    const bool colour = !image.empty();
    if (colour) {
        require(image.shape() == (Shape{1, 3, h, w}), ErrorCode::kShapeMismatch,
                "back_project: image " + image.shape().str() + " vs depth " +
                    depth.depth.shape().str());
    }
    auto byte = [](double v) {
        return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    };
    std::vector<CloudPoint> pts;
    for (int v = 0; v < h; ++v) {
        for (int u = 0; u < w; ++u) {
            if (depth.mask.at(0, 0, v, u) <= 0.5) continue;
            const double z = depth.depth.at(0, 0, v, u);
            CloudPoint p{(u - k.cx) * z / k.fx, (v - k.cy) * z / k.fy, z, 255, 255, 255};
            if (colour) {
                p.r = byte(image.at(0, 0, v, u));
                p.g = byte(image.at(0, 1, v, u));
                p.b = byte(image.at(0, 2, v, u));
            }
            pts.push_back(p);
        }
    }
    return pts;
}

void write_ply(const fs::path& path, const std::vector<CloudPoint>& points) {
    std::ofstream out = open_out(path);
    out << "ply\nformat ascii 1.0\ncomment units mm\n"
        << "element vertex " << points.size() << "\n"
        << "property float x\nproperty float y\nproperty float z\n"
        << "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
    char line[160];
    for (const auto& p : points) {
        std::snprintf(line, sizeof line, "%.9g %.9g %.9g %u %u %u\n", p.x, p.y, p.z, p.r, p.g, p.b);
        out << line;
    }
    require(out.good(), ErrorCode::kIo, "write failed for " + path.string());
}

InferResult infer(const Model& model, const RunConfig& config, const InferRequest& request,
                  const fs::path& out_dir) {
    require(!request.point_cloud || request.intrinsics.has_value(), ErrorCode::kInvalidArgument,
            "infer: a point cloud was requested but no camera intrinsics were given");
    const RunConfig& mc = model.config();
    require(!request.sparse.empty() || !request.ground_truth.empty(), ErrorCode::kInvalidArgument,
            "infer: need a sparse depth map or ground truth to sample one from");
    const Tensor image = read_png_rgb(request.image);
    DepthMap sparse;
    if (!request.sparse.empty()) {
        sparse = load_depth(request.sparse);
    } else {
        const DepthMap gt = load_depth(request.ground_truth);
        const SparseDepth s =
            sparsify(gt, config.n_points, eval_sparse_seed(config.data_seed, 0, config.n_points));
        sparse = DepthMap{s.depth, s.mask};
    }
    const Shape si = image.shape();
    require(si.h == sparse.height() && si.w == sparse.width(), ErrorCode::kShapeMismatch,
            "infer: image and sparse depth differ in size");
    require(si.h == mc.height && si.w == mc.width, ErrorCode::kShapeMismatch,
            "resolution mismatch: input is " + std::to_string(si.h) + "x" + std::to_string(si.w) +
                " but the model expects " + std::to_string(mc.height) + "x" +
                std::to_string(mc.width));

    const std::uint64_t noise_seed = eval_noise_seed(config.noise_seed, 0);
    const Tensor pred = model.predict_mm(image, sparse.depth, sparse.mask, noise_seed);
    const DepthMap pred_map{pred, Tensor(pred.shape(), 1.0)};

    fs::create_directories(out_dir);
    InferResult result;
    result.depth = out_dir / "depth.png";
    DepthMeta meta;
    meta.range = model.range();
    meta.extra_json = json{{"image", request.image.string()},
                           {"sparse", request.sparse.empty() ? "sampled from ground truth"
                                                             : request.sparse.string()},
                           {"noise_seed", noise_seed},
                           {"sparse_points", sparse.valid_count()},
                           {"config", config_json(mc)}}
                          .dump();
    save_depth(pred_map, result.depth, meta);

    if (!request.ground_truth.empty()) {
        const DepthMap gt = load_depth(request.ground_truth);
        require(gt.height() == si.h && gt.width() == si.w, ErrorCode::kShapeMismatch,
                "infer: ground truth differs in size from the input");
        result.metrics = evaluate_depth(pred, gt.depth, gt.mask);
        result.error_map = out_dir / "error_map.png";
        write_png_rgb(result.error_map,
                      error_heatmap(pred, gt.depth, gt.mask, 0.1 * (mc.d_max - mc.d_min)));
    }
    if (request.point_cloud) {
        result.point_cloud = out_dir / "cloud.ply";
        write_ply(result.point_cloud, back_project(pred_map, image, *request.intrinsics));
    }
    return result;
}

}  // namespace depthdiff
