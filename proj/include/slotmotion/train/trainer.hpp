#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <string>
#include <vector>

#include "slotmotion/losses/losses.hpp"
#include "slotmotion/model/checkpoint.hpp"
#include "slotmotion/model/model.hpp"
#include "slotmotion/train/batches.hpp"
#include "slotmotion/train/evaluate.hpp"
#include "slotmotion/train/schedule.hpp"
#include "slotmotion/train/store.hpp"

namespace slotmotion {

// Raised when the objective stops being finite; carries the failing step and
// the last finite breakdown for diagnosis.
class TrainAbort : public std::runtime_error {
public:
    TrainAbort(int64_t step, const LossBreakdown& last)
        : std::runtime_error("loss became non-finite at step " + std::to_string(step) +
                             " (last finite: total=" + std::to_string(last.total) +
                             " recon=" + std::to_string(last.recon) +
                             " motion=" + std::to_string(last.motion) +
                             " temporal=" + std::to_string(last.temporal) + ")"),
          step(step),
          last_finite(last) {}
    int64_t step;
    LossBreakdown last_finite;
};

struct StepLog {
    int64_t step = 0;
    int epoch = 0;
    double lr = 0.0;
    LossBreakdown loss;
};

struct EvalLog {
    int epoch = 0;
    MetricReport report;
};

struct RunRecord {
    std::vector<StepLog> steps;
    std::vector<EvalLog> evals;
    std::vector<std::string> checkpoint_paths;
    std::string config_snapshot;
    MetricReport final_eval;
};

namespace detail {

inline void append_metrics_line(std::ostream& os, const StepLog& s) {
    nlohmann::json j{{"step", s.step},        {"epoch", s.epoch},
                     {"lr", s.lr},            {"recon", s.loss.recon},
                     {"motion", s.loss.motion}, {"temporal", s.loss.temporal},
                     {"total", s.loss.total}};
    os << j.dump() << "\n";
}

} // namespace detail

// Accumulates the loss graph for one clip on the given tape. Returns the
// scalar total node plus the value breakdown.
template <typename T>
TotalLoss clip_loss(VideoSlotModel<T>& model, typename VideoSlotModel<T>::Pass& ps,
                    const ClipStore& data, int clip_index, const TrainConfig& cfg, Rng* iter_rng) {
    Tape<T>& tape = *ps.tape;
    const ClipSample& clip = data.clip(clip_index);
    const bool motion_active = cfg.use_motion && cfg.lambda_motion != 0.0;
    const bool temporal_active = cfg.use_temporal && clip.length >= 2;

    std::vector<Tensor<T>> frames;
    frames.reserve(static_cast<size_t>(clip.length));
    for (int t = 0; t < clip.length; ++t) frames.push_back(frame_to_chw<T>(clip, t));

    auto outs = model.forward_clip(ps, frames, /*want_recon=*/cfg.use_recon, iter_rng);

    int rec = -1;
    if (cfg.use_recon) {
        for (int t = 0; t < clip.length; ++t) {
            int term = recon_loss(tape, outs[static_cast<size_t>(t)].recon, frames[static_cast<size_t>(t)]);
            rec = rec < 0 ? term : add(tape, rec, term);
        }
        rec = scale(tape, rec, 1.0 / static_cast<double>(clip.length));
    }

    int mot = -1;
    if (motion_active) {
        const MotionMaskSet& masks = data.masks(clip_index);
        for (int t = 0; t < clip.length; ++t) {
            const auto& frame_masks = masks.frames[static_cast<size_t>(t)];
            if (frame_masks.empty()) continue;
            Assignment a = greedy_match(frame_masks, tape.val(outs[static_cast<size_t>(t)].attention));
            int term = motion_loss(tape, outs[static_cast<size_t>(t)].attention, frame_masks, a);
            mot = mot < 0 ? term : add(tape, mot, term);
        }
        if (mot < 0) mot = tape.constant(Tensor<T>::scalar(T(0)));
    }

    int tmp = -1;
    if (temporal_active) {
        std::vector<int> slot_seq;
        slot_seq.reserve(outs.size());
        for (const auto& o : outs) slot_seq.push_back(o.slots);
        tmp = temporal_loss(tape, slot_seq);
    }

    LossWeights w{cfg.lambda_motion, cfg.lambda_temporal};
    return total_loss(tape, rec, mot, tmp, w);
}

// Full optimization loop: quota-aware batches, warmup + decay schedule, Adam,
// JSONL metrics log, periodic checkpoints, optional periodic evaluation.
inline RunRecord train_model(const TrainConfig& cfg, const ClipStore& train_set,
                             const ClipStore* val_set, const std::string& out_dir,
                             std::ostream* log = nullptr) {
    cfg.validate();
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(out_dir) / "checkpoints");

    VideoSlotModel<float> model(cfg.model, mix_seed(cfg.seed, hash_name("init")));
    const bool motion_active = cfg.use_motion && cfg.lambda_motion != 0.0;

    int64_t step = 0;
    int start_epoch = 0;
    if (!cfg.resume.empty()) {
        CheckpointMeta meta = load_checkpoint(cfg.resume, model.params());
        step = meta.step;
        start_epoch = static_cast<int>(meta.epoch);
        if (log) *log << "resumed from " << cfg.resume << " at step " << step << "\n";
    }

    RunRecord rec;
    rec.config_snapshot = config_to_text(cfg);
    {
        std::ofstream cs(fs::path(out_dir) / "config.txt");
        cs << rec.config_snapshot;
    }
    std::ofstream metrics_log(fs::path(out_dir) / "metrics.jsonl",
                              cfg.resume.empty() ? std::ios::trunc : std::ios::app);
    if (!metrics_log) throw IoError("cannot open metrics log in " + out_dir);

    LrSchedule sched{cfg.base_lr, cfg.warmup_iters, cfg.decay_rate, cfg.decay_step};
    Rng iter_rng(mix_seed(cfg.seed, hash_name("slot-noise")));
    LossBreakdown last_finite;

    std::vector<char> bearing;
    if (motion_active) bearing = train_set.motion_bearing_flags();
    else bearing.assign(static_cast<size_t>(train_set.size()), 0);

    auto save_ckpt = [&](const std::string& name, int epoch) {
        const std::string path = (fs::path(out_dir) / "checkpoints" / name).string();
        CheckpointMeta meta;
        meta.step = step;
        meta.epoch = epoch;
        meta.has_optimizer = true;
        save_checkpoint(path, model.params(), cfg.model, meta);
        rec.checkpoint_paths.push_back(path);
        return path;
    };

    for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
        auto batches = build_batches(bearing, cfg.batch_size,
                                     mix_seed(cfg.seed, static_cast<uint64_t>(epoch)), motion_active);
        for (const auto& batch : batches) {
            model.params().zero_grads();
            LossBreakdown mean{};
            mean.lambda_motion = cfg.lambda_motion;
            mean.lambda_temporal = cfg.lambda_temporal;
            for (int clip_index : batch) {
                Tape<float> tape;
                typename VideoSlotModel<float>::Pass ps(model, tape);
                TotalLoss tl = clip_loss(model, ps, train_set, clip_index, cfg, &iter_rng);
                tape.backward(tl.node);
                ps.bind.flush_grads(tape);
                mean.recon += tl.breakdown.recon;
                mean.motion += tl.breakdown.motion;
                mean.temporal += tl.breakdown.temporal;
            }
            const double inv = 1.0 / static_cast<double>(batch.size());
            mean.recon *= inv;
            mean.motion *= inv;
            mean.temporal *= inv;
            mean.total = mean.recon + cfg.lambda_motion * mean.motion +
                         cfg.lambda_temporal * mean.temporal;
            if (!mean.finite()) throw TrainAbort(step, last_finite);
            last_finite = mean;

            for (int p = 0; p < model.params().size(); ++p) {
                Tensor<float>& g = model.params().at(p).grad;
                for (int64_t i = 0; i < g.numel(); ++i) g[i] = static_cast<float>(g[i] * inv);
            }
            if (cfg.grad_clip > 0) model.params().clip_grad_norm(cfg.grad_clip);

            const double lr = lr_at(sched, step);
            model.params().adam_step(lr, 0.9, 0.999, 1e-8, step + 1);
            ++step;

            StepLog sl{step, epoch, lr, mean};
            rec.steps.push_back(sl);
            detail::append_metrics_line(metrics_log, sl);
        }
        if (log)
            *log << "epoch " << epoch << " total " << last_finite.total << " recon "
                 << last_finite.recon << " motion " << last_finite.motion << "\n";

        if (cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0)
            save_ckpt("epoch_" + std::to_string(epoch + 1) + ".smck", epoch + 1);
        if (val_set && cfg.eval_every > 0 && (epoch + 1) % cfg.eval_every == 0) {
            EvalLog el;
            el.epoch = epoch + 1;
            el.report = evaluate_model(model, *val_set, cfg.gen.frames, cfg.eval_stride);
            rec.evals.push_back(el);
            if (log) *log << "epoch " << epoch << " val\n" << el.report.to_text();
        }
    }

    save_ckpt("final.smck", cfg.epochs);
    if (val_set) {
        rec.final_eval = evaluate_model(*&model, *val_set, cfg.gen.frames, cfg.eval_stride);
        std::ofstream summary(fs::path(out_dir) / "metrics_summary.json");
        summary << rec.final_eval.to_json().dump(2) << "\n";
    }
    metrics_log.flush();
    return rec;
}

} // namespace slotmotion
