#pragma once

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "slotmotion/datagen/io.hpp"
#include "slotmotion/motionseg/serialize.hpp"
#include "slotmotion/train/ablate.hpp"
#include "slotmotion/train/trainer.hpp"
#include "slotmotion/viz/render.hpp"

namespace slotmotion::cli {

namespace fs = std::filesystem;

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir;
    bool quiet = false;
};

inline void add_common(CLI::App* cmd, CommonArgs& a) {
    cmd->add_option("-c,--config", a.config_path, "flat key = value config file");
    cmd->add_option("-s,--set", a.overrides, "config override, key=value (repeatable)");
    const char* env_out = std::getenv("SLOTMOTION_OUT");
    a.out_dir = env_out ? std::string(env_out) : std::string("out");
    cmd->add_option("-o,--out", a.out_dir, "output directory (default $SLOTMOTION_OUT or ./out)");
    cmd->add_flag("-q,--quiet", a.quiet, "suppress progress output");
}

inline TrainConfig build_config(const CommonArgs& a) {
    TrainConfig cfg;
    if (!a.config_path.empty()) cfg = load_config_file(a.config_path);
    for (const auto& kv : a.overrides) apply_override(cfg, kv);
    return cfg;
}

inline int run_gen(const CommonArgs& a, int clips, int val_clips, bool write_motion) {
    TrainConfig cfg = build_config(a);
    if (clips > 0) cfg.train_clips = clips;
    if (val_clips >= 0) cfg.val_clips = val_clips;
    cfg.gen.validate();

    for (const std::string split : {std::string("train"), std::string("val")}) {
        const int n = split == "train" ? cfg.train_clips : cfg.val_clips;
        if (n <= 0) continue;
        std::vector<ClipSample> samples;
        samples.reserve(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i)
            samples.push_back(generate_clip(clip_seed(cfg.seed, split, i), cfg.gen));
        DatasetManifest manifest;
        manifest.clip_count = n;
        manifest.width = cfg.gen.width;
        manifest.height = cfg.gen.height;
        manifest.frames = cfg.gen.frames;
        manifest.seed = cfg.seed;
        manifest.split = split;
        write_dataset(samples, manifest, a.out_dir);
        if (write_motion) {
            for (int i = 0; i < n; ++i) {
                DegradeConfig dg = cfg.degrade;
                dg.seed = mix_seed(cfg.degrade.seed, static_cast<uint64_t>(i));
                MotionMaskSet set =
                    cfg.motion_postprocess
                        ? oracle_motion_masks_postprocessed(samples[static_cast<size_t>(i)], dg,
                                                            cfg.postprocess,
                                                            cfg.model.feature_height(),
                                                            cfg.model.feature_width())
                        : oracle_motion_masks(samples[static_cast<size_t>(i)], dg,
                                              cfg.model.feature_height(),
                                              cfg.model.feature_width());
                write_motion_masks(set, fs::path(a.out_dir) / split / clip_dir_name(i),
                                   cfg.model.feature_height(), cfg.model.feature_width());
            }
        }
        if (!a.quiet)
            std::cout << "wrote " << n << " clips to " << (fs::path(a.out_dir) / split).string()
                      << "\n";
    }
    return 0;
}

inline int run_train(const CommonArgs& a, const std::string& data_dir, const std::string& resume) {
    TrainConfig cfg = build_config(a);
    if (!resume.empty()) cfg.resume = resume;
    cfg.validate();

    std::ostream* log = a.quiet ? nullptr : &std::cout;
    fs::create_directories(a.out_dir);

    if (!data_dir.empty()) {
        ClipStore train_set = ClipStore::load(data_dir, "train", cfg);
        std::optional<ClipStore> val_set;
        if (fs::exists(fs::path(data_dir) / "val" / "manifest.json"))
            val_set = ClipStore::load(data_dir, "val", cfg);
        RunRecord rec = train_model(cfg, train_set, val_set ? &*val_set : nullptr, a.out_dir, log);
        if (!a.quiet && val_set) std::cout << rec.final_eval.to_text();
    } else {
        ClipStore train_set = ClipStore::generate(cfg, "train", cfg.train_clips);
        ClipStore val_set = ClipStore::generate(cfg, "val", cfg.val_clips);
        RunRecord rec = train_model(cfg, train_set, &val_set, a.out_dir, log);
        if (!a.quiet) std::cout << rec.final_eval.to_text();
    }
    return 0;
}

inline int run_eval(const CommonArgs& a, const std::string& checkpoint, const std::string& data_dir,
                    int stride) {
    TrainConfig cfg = build_config(a);
    CheckpointMeta meta;
    cfg.model = peek_checkpoint_config(checkpoint, &meta);
    cfg.gen.width = cfg.model.frame_width;
    cfg.gen.height = cfg.model.frame_height;
    if (stride > 0) cfg.eval_stride = stride;

    VideoSlotModel<float> model(cfg.model, 0);
    load_checkpoint(checkpoint, model.params());

    ClipStore data = data_dir.empty() ? ClipStore::generate(cfg, "val", cfg.val_clips)
                                      : ClipStore::load(data_dir, "val", cfg);
    MetricReport report = evaluate_model(model, data, cfg.gen.frames, cfg.eval_stride);
    fs::create_directories(a.out_dir);
    std::ofstream os(fs::path(a.out_dir) / "eval_report.json");
    os << report.to_json().dump(2) << "\n";
    std::cout << report.to_text();
    return 0;
}

inline int run_ablate(const CommonArgs& a, const std::string& grid_name,
                      const std::string& seeds_text) {
    TrainConfig cfg = build_config(a);
    std::vector<uint64_t> seeds;
    {
        std::stringstream ss(seeds_text);
        std::string item;
        while (std::getline(ss, item, ','))
            if (!item.empty()) seeds.push_back(std::stoull(item));
    }
    if (seeds.empty()) throw ConfigError("ablate: no seeds given");
    const auto grid = resolve_grid(grid_name);
    std::ostream* log = a.quiet ? nullptr : &std::cout;
    fs::create_directories(a.out_dir);
    auto results = ablate(cfg, grid, seeds, a.out_dir, log);
    const std::string table = render_ablation_table(results);
    std::cout << table;
    std::ofstream os(fs::path(a.out_dir) / "ablation.json");
    os << ablation_to_json(results).dump(2) << "\n";
    std::ofstream ts(fs::path(a.out_dir) / "ablation_table.txt");
    ts << table;
    return 0;
}

inline int run_viz(const CommonArgs& a, const std::string& checkpoint, const std::string& data_dir,
                   int clip_index, std::string metrics_log) {
    TrainConfig cfg = build_config(a);
    CheckpointMeta meta;
    cfg.model = peek_checkpoint_config(checkpoint, &meta);
    cfg.gen.width = cfg.model.frame_width;
    cfg.gen.height = cfg.model.frame_height;

    VideoSlotModel<float> model(cfg.model, 0);
    load_checkpoint(checkpoint, model.params());

    ClipSample clip;
    if (data_dir.empty()) {
        clip = generate_clip(clip_seed(cfg.seed, "val", clip_index), cfg.gen);
    } else {
        clip = read_clip(fs::path(data_dir) / "val" / clip_dir_name(clip_index));
    }

    fs::create_directories(a.out_dir);
    std::vector<Tensor<float>> frames;
    for (int t = 0; t < clip.length; ++t) frames.push_back(frame_to_chw<float>(clip, t));
    Tape<float> tape;
    VideoSlotModel<float>::Pass ps(model, tape);
    Rng iter_rng(mix_seed(cfg.seed, 0x717ULL));
    auto outs = model.forward_clip(ps, frames, /*want_recon=*/false, &iter_rng);

    for (int t = 0; t < clip.length; ++t) {
        const auto& att = tape.val(outs[static_cast<size_t>(t)].attention);
        SegmentationResult seg = attention_to_masks(att, cfg.model.feature_height(),
                                                    cfg.model.feature_width(), clip.height,
                                                    clip.width);
        char name[64];
        std::snprintf(name, sizeof(name), "overlay_%04d.png", t);
        write_png_rgb8((fs::path(a.out_dir) / name).string(), overlay_labels(clip, t, seg.labels_up));
        std::snprintf(name, sizeof(name), "attention_%04d.png", t);
        write_png_rgb8((fs::path(a.out_dir) / name).string(),
                       attention_montage(att, cfg.model.feature_height(), cfg.model.feature_width(),
                                         /*upscale=*/4, /*columns=*/5));
    }

    if (metrics_log.empty())
        metrics_log = (fs::path(checkpoint).parent_path().parent_path() / "metrics.jsonl").string();
    if (!plot_loss_curves(metrics_log, (fs::path(a.out_dir) / "loss_curves.png").string()))
        std::cerr << "warning: no metrics log at " << metrics_log << ", skipping loss curves\n";
    else if (!a.quiet)
        std::cout << "wrote loss curves from " << metrics_log << "\n";
    if (!a.quiet) std::cout << "wrote " << clip.length << " overlays to " << a.out_dir << "\n";
    return 0;
}

// Exit codes: 0 success, 1 configuration/usage error, 2 runtime failure.
inline int run(int argc, const char* const* argv) {
    CLI::App app{"motion-guided slot video auto-encoder"};
    app.require_subcommand(1);

    CommonArgs gen_args, train_args, eval_args, ablate_args, viz_args;

    auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
    add_common(gen, gen_args);
    int gen_clips = 0, gen_val_clips = -1;
    bool gen_motion = false;
    gen->add_option("--clips", gen_clips, "training clips (overrides config)");
    gen->add_option("--val-clips", gen_val_clips, "validation clips (overrides config)");
    gen->add_flag("--write-motion", gen_motion, "also write motion supervision masks");

    auto* train = app.add_subcommand("train", "train a model");
    add_common(train, train_args);
    std::string train_data, train_resume;
    train->add_option("--data", train_data, "dataset root (omit to generate in memory)");
    train->add_option("--resume", train_resume, "checkpoint to resume from");

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    add_common(eval, eval_args);
    std::string eval_ckpt, eval_data;
    int eval_stride = 0;
    eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
    eval->add_option("--data", eval_data, "dataset root (omit to generate the val split)");
    eval->add_option("--stride", eval_stride, "sliding-window stride");

    auto* abl = app.add_subcommand("ablate", "run an ablation grid");
    add_common(abl, ablate_args);
    std::string grid_name = "table1", seeds_text = "1,2,3";
    abl->add_option("--grid", grid_name, "grid name (table1)");
    abl->add_option("--seeds", seeds_text, "comma-separated seeds");

    auto* viz = app.add_subcommand("viz", "render overlays, attention maps and loss curves");
    add_common(viz, viz_args);
    std::string viz_ckpt, viz_data, viz_metrics;
    int viz_clip = 0;
    viz->add_option("--checkpoint", viz_ckpt, "checkpoint file")->required();
    viz->add_option("--data", viz_data, "dataset root (omit to generate a clip)");
    viz->add_option("--clip-index", viz_clip, "clip index within the val split");
    viz->add_option("--metrics-log", viz_metrics, "metrics.jsonl for loss curves");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (gen->parsed()) return run_gen(gen_args, gen_clips, gen_val_clips, gen_motion);
        if (train->parsed()) return run_train(train_args, train_data, train_resume);
        if (eval->parsed()) return run_eval(eval_args, eval_ckpt, eval_data, eval_stride);
        if (abl->parsed()) return run_ablate(ablate_args, grid_name, seeds_text);
        if (viz->parsed()) return run_viz(viz_args, viz_ckpt, viz_data, viz_clip, viz_metrics);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}

} // namespace slotmotion::cli
