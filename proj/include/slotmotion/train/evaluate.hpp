#pragma once

#include <json.hpp>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "slotmotion/metrics/ari.hpp"
#include "slotmotion/metrics/segmentation.hpp"
#include "slotmotion/model/checkpoint.hpp"
#include "slotmotion/model/model.hpp"
#include "slotmotion/train/store.hpp"

namespace slotmotion {

// Metrics averaged per frame, then over frames. A metric left undefined on
// every frame (e.g. no static instance anywhere) stays undefined instead of
// polluting the average with zeros.
struct MetricReport {
    std::optional<double> fg_ari;
    std::optional<double> fg_ari_moving;
    std::optional<double> fg_ari_static;
    std::optional<double> ari_all;
    std::optional<double> f_measure_score;
    std::optional<double> miou_score;
    int frames_evaluated = 0;

    nlohmann::json to_json() const {
        auto put = [](const std::optional<double>& v) {
            return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
        };
        return {{"fg_ari", put(fg_ari)},
                {"fg_ari_moving", put(fg_ari_moving)},
                {"fg_ari_static", put(fg_ari_static)},
                {"ari", put(ari_all)},
                {"f_measure", put(f_measure_score)},
                {"miou", put(miou_score)},
                {"frames_evaluated", frames_evaluated}};
    }

    std::string to_text() const {
        auto fmt = [](const std::optional<double>& v) {
            if (!v) return std::string("undefined");
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.1f", *v * 100.0);
            return std::string(buf);
        };
        std::string s;
        s += "Fg.ARI        " + fmt(fg_ari) + "\n";
        s += "Fg.ARI moving " + fmt(fg_ari_moving) + "\n";
        s += "Fg.ARI static " + fmt(fg_ari_static) + "\n";
        s += "ARI           " + fmt(ari_all) + "\n";
        s += "F-measure     " + fmt(f_measure_score) + "\n";
        s += "mIoU          " + fmt(miou_score) + "\n";
        s += "frames        " + std::to_string(frames_evaluated) + "\n";
        return s;
    }
};

namespace detail {

struct MeanAcc {
    double sum = 0.0;
    int64_t n = 0;
    void add(const std::optional<double>& v) {
        if (v) {
            sum += *v;
            ++n;
        }
    }
    std::optional<double> mean() const {
        if (n == 0) return std::nullopt;
        return sum / static_cast<double>(n);
    }
};

inline std::vector<int> gt_labels_of_frame(const ClipSample& clip, int t) {
    std::vector<int> gt(static_cast<size_t>(clip.height) * clip.width);
    for (int y = 0; y < clip.height; ++y)
        for (int x = 0; x < clip.width; ++x)
            gt[static_cast<size_t>(y) * clip.width + x] = clip.mask_at(t, y, x);
    return gt;
}

} // namespace detail

// Per-frame metric bundle against ground truth; prediction is a full-frame
// label map.
struct FrameScores {
    std::optional<double> fg_ari, fg_ari_moving, fg_ari_static, ari_all, f, iou;
};

inline FrameScores score_frame(const std::vector<int>& pred_labels, const ClipSample& clip, int t) {
    FrameScores s;
    const std::vector<int> gt = detail::gt_labels_of_frame(clip, t);
    s.ari_all = ari(pred_labels, gt);
    s.fg_ari = fg_ari(pred_labels, gt);

    std::set<int> moving(clip.moving_ids[static_cast<size_t>(t)].begin(),
                         clip.moving_ids[static_cast<size_t>(t)].end());
    std::set<int> stat;
    for (int id : gt)
        if (id != 0 && !moving.count(id)) stat.insert(id);
    s.fg_ari_moving = fg_ari_subset(pred_labels, gt, moving);
    s.fg_ari_static = fg_ari_subset(pred_labels, gt, stat);

    const auto pred_segs = segments_from_labels(pred_labels, /*exclude_label=*/-1);
    const auto gt_segs = segments_from_labels(gt, /*exclude_label=*/0);
    if (!gt_segs.empty()) {
        s.f = f_measure(pred_segs, gt_segs);
        s.iou = miou(pred_segs, gt_segs);
    }
    return s;
}

// Sliding-window evaluation. Windows of the training clip length advance by
// `stride`; each processed frame contributes one per-frame measurement.
// Motion masks are never consulted here.
template <typename T>
MetricReport evaluate_model(VideoSlotModel<T>& model, const ClipStore& data, int clip_length,
                            int stride, uint64_t eval_seed = 0x5EEDULL) {
    require(stride >= 1, "evaluate_model: stride must be >= 1");
    require(clip_length >= 1, "evaluate_model: clip length must be >= 1");
    const ModelConfig& mc = model.config();
    detail::MeanAcc fg, fgm, fgs, aall, fm, mi;
    int frames_done = 0;
    Rng iter_rng(mix_seed(eval_seed, 0x37A7E5ULL));

    for (int ci = 0; ci < data.size(); ++ci) {
        const ClipSample& clip = data.clip(ci);
        require(clip.height == mc.frame_height && clip.width == mc.frame_width,
                "evaluate_model: dataset frame shape does not match the model");
        std::vector<int> starts;
        if (clip.length <= clip_length) {
            starts.push_back(0);
        } else {
            for (int s = 0; s + clip_length <= clip.length; s += stride) starts.push_back(s);
        }
        for (int start : starts) {
            const int len = std::min(clip_length, clip.length - start);
            std::vector<Tensor<T>> frames;
            frames.reserve(static_cast<size_t>(len));
            for (int t = 0; t < len; ++t) frames.push_back(frame_to_chw<T>(clip, start + t));
            Tape<T> tape;
            typename VideoSlotModel<T>::Pass ps(model, tape);
            auto outs = model.forward_clip(ps, frames, /*want_recon=*/false, &iter_rng);
            for (int t = 0; t < len; ++t) {
                SegmentationResult seg =
                    attention_to_masks(tape.val(outs[static_cast<size_t>(t)].attention),
                                       mc.feature_height(), mc.feature_width(), clip.height,
                                       clip.width);
                FrameScores sc = score_frame(seg.labels_up, clip, start + t);
                fg.add(sc.fg_ari);
                fgm.add(sc.fg_ari_moving);
                fgs.add(sc.fg_ari_static);
                aall.add(sc.ari_all);
                fm.add(sc.f);
                mi.add(sc.iou);
                ++frames_done;
            }
        }
    }
    MetricReport r;
    r.fg_ari = fg.mean();
    r.fg_ari_moving = fgm.mean();
    r.fg_ari_static = fgs.mean();
    r.ari_all = aall.mean();
    r.f_measure_score = fm.mean();
    r.miou_score = mi.mean();
    r.frames_evaluated = frames_done;
    return r;
}

// Scores the motion supervision itself as a segmentation: every mask becomes
// a label, everything else is one catch-all region. This is the reference
// point a trained model has to beat.
inline MetricReport evaluate_raw_motion_masks(const ClipStore& data) {
    detail::MeanAcc fg, fgm, fgs;
    int frames_done = 0;
    for (int ci = 0; ci < data.size(); ++ci) {
        const ClipSample& clip = data.clip(ci);
        const MotionMaskSet& set = data.masks(ci);
        for (int t = 0; t < clip.length; ++t) {
            const auto& frame_masks = set.frames[static_cast<size_t>(t)];
            const int fh = data.feature_height(), fw = data.feature_width();
            std::vector<int> feat_labels(static_cast<size_t>(fh) * fw, 0);
            for (size_t k = 0; k < frame_masks.size(); ++k)
                for (size_t i = 0; i < frame_masks[k].mask.data.size(); ++i)
                    if (frame_masks[k].mask.data[i]) feat_labels[i] = static_cast<int>(k) + 1;
            std::vector<int> pred(static_cast<size_t>(clip.height) * clip.width);
            for (int y = 0; y < clip.height; ++y)
                for (int x = 0; x < clip.width; ++x)
                    pred[static_cast<size_t>(y) * clip.width + x] =
                        feat_labels[static_cast<size_t>(y * fh / clip.height) * fw +
                                    static_cast<size_t>(x * fw / clip.width)];
            FrameScores sc = score_frame(pred, clip, t);
            fg.add(sc.fg_ari);
            fgm.add(sc.fg_ari_moving);
            fgs.add(sc.fg_ari_static);
            ++frames_done;
        }
    }
    MetricReport r;
    r.fg_ari = fg.mean();
    r.fg_ari_moving = fgm.mean();
    r.fg_ari_static = fgs.mean();
    r.frames_evaluated = frames_done;
    return r;
}

} // namespace slotmotion
