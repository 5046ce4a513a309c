#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "slotmotion/core/random.hpp"
#include "slotmotion/datagen/types.hpp"
#include "slotmotion/motionseg/masks.hpp"
#include "slotmotion/motionseg/postprocess.hpp"

namespace slotmotion {

namespace detail {

struct FullResCandidate {
    int object_id = 0;
    SegmentCandidate segment;
};

inline float mean_normalized_flow_magnitude(const ClipSample& clip, int t, const BinaryMask& mask) {
    double max_mag = 0.0;
    for (int y = 0; y < clip.height; ++y)
        for (int x = 0; x < clip.width; ++x) {
            const double u = clip.flow_at(t, y, x, 0), v = clip.flow_at(t, y, x, 1);
            max_mag = std::max(max_mag, std::sqrt(u * u + v * v));
        }
    if (max_mag <= 0.0) return 0.0f;
    double sum = 0.0;
    int64_t n = 0;
    for (int y = 0; y < clip.height; ++y)
        for (int x = 0; x < clip.width; ++x) {
            if (!mask.at(y, x)) continue;
            const double u = clip.flow_at(t, y, x, 0), v = clip.flow_at(t, y, x, 1);
            sum += std::sqrt(u * u + v * v) / max_mag;
            ++n;
        }
    return n > 0 ? static_cast<float>(sum / static_cast<double>(n)) : 0.0f;
}

// Selects and degrades ground-truth masks at full resolution. Selection:
// every moving object unless dropped, plus static objects sampled at
// static_keep_rate. All randomness is keyed on (seed, frame, object id).
inline std::vector<std::vector<FullResCandidate>> oracle_fullres(const ClipSample& clip,
                                                                 const DegradeConfig& degrade) {
    degrade.validate();
    std::vector<std::vector<FullResCandidate>> out(static_cast<size_t>(clip.length));
    for (int t = 0; t < clip.length; ++t) {
        const auto& movers = clip.moving_ids[static_cast<size_t>(t)];
        for (int id = 1; id <= clip.object_count; ++id) {
            const bool moving = std::find(movers.begin(), movers.end(), id) != movers.end();
            Rng rng(mix_seed(degrade.seed, static_cast<uint64_t>(t) * 1000003ULL +
                                               static_cast<uint64_t>(id)));
            bool selected;
            if (moving)
                selected = !rng.bernoulli(degrade.drop_rate);
            else
                selected = degrade.static_keep_rate > 0.0f && rng.bernoulli(degrade.static_keep_rate);
            if (!selected) continue;

            BinaryMask mask(clip.height, clip.width);
            for (int y = 0; y < clip.height; ++y)
                for (int x = 0; x < clip.width; ++x)
                    if (clip.mask_at(t, y, x) == id) mask.at(y, x) = 1;
            if (mask.count() == 0) continue;

            if (degrade.boundary_erosion > 0) mask = erode(mask, degrade.boundary_erosion);
            if (degrade.noise_flip_rate > 0.0f)
                for (auto& v : mask.data)
                    if (rng.bernoulli(degrade.noise_flip_rate)) v = v ? 0 : 1;
            if (mask.count() == 0) continue;

            FullResCandidate cand;
            cand.object_id = id;
            cand.segment.confidence = static_cast<float>(
                rng.uniform(degrade.confidence.min, degrade.confidence.max));
            cand.segment.mean_flow_magnitude = mean_normalized_flow_magnitude(clip, t, mask);
            cand.segment.mask = std::move(mask);
            out[static_cast<size_t>(t)].push_back(std::move(cand));
        }
    }
    return out;
}

// Downsamples to feature resolution and enforces within-frame disjointness
// (earlier masks keep contested cells). Masks that come out empty are skipped.
inline MotionMaskSet pack_to_feature_res(const std::vector<std::vector<FullResCandidate>>& fullres,
                                         int feature_h, int feature_w) {
    MotionMaskSet set;
    set.frames.resize(fullres.size());
    for (size_t t = 0; t < fullres.size(); ++t) {
        BinaryMask claimed(feature_h, feature_w);
        for (const auto& cand : fullres[t]) {
            BinaryMask small = downsample_mask(cand.segment.mask, feature_h, feature_w);
            for (size_t i = 0; i < small.data.size(); ++i) {
                if (small.data[i] && claimed.data[i]) small.data[i] = 0;
            }
            if (small.count() == 0) continue;
            for (size_t i = 0; i < small.data.size(); ++i)
                if (small.data[i]) claimed.data[i] = 1;
            MotionMask mm;
            mm.mask = std::move(small);
            mm.confidence = cand.segment.confidence;
            mm.source_frame = static_cast<int>(t);
            set.frames[t].push_back(std::move(mm));
        }
    }
    return set;
}

} // namespace detail

// Ground-truth-derived motion supervision, degraded per DegradeConfig and
// downsampled to the feature grid. With an identity DegradeConfig this is
// exactly the set of ground-truth moving-object masks.
inline MotionMaskSet oracle_motion_masks(const ClipSample& clip, const DegradeConfig& degrade,
                                         int feature_h, int feature_w) {
    require(feature_h > 0 && feature_w > 0 && clip.height % feature_h == 0 &&
                clip.width % feature_w == 0,
            "oracle_motion_masks: feature shape must divide the frame shape");
    return detail::pack_to_feature_res(detail::oracle_fullres(clip, degrade), feature_h, feature_w);
}

// Same oracle, but candidates additionally pass through the segment filters
// (at full resolution, before downsampling), emulating a cleaned-up real
// segmenter output.
inline MotionMaskSet oracle_motion_masks_postprocessed(const ClipSample& clip,
                                                       const DegradeConfig& degrade,
                                                       const PostprocessParams& params,
                                                       int feature_h, int feature_w) {
    require(feature_h > 0 && feature_w > 0 && clip.height % feature_h == 0 &&
                clip.width % feature_w == 0,
            "oracle_motion_masks: feature shape must divide the frame shape");
    auto fullres = detail::oracle_fullres(clip, degrade);
    for (auto& frame : fullres) {
        std::vector<SegmentCandidate> segs;
        segs.reserve(frame.size());
        for (auto& c : frame) segs.push_back(c.segment);
        auto kept = postprocess(segs, clip.height, clip.width, params);
        std::vector<detail::FullResCandidate> filtered;
        for (auto& k : kept) {
            detail::FullResCandidate c;
            c.segment = std::move(k);
            filtered.push_back(std::move(c));
        }
        frame = std::move(filtered);
    }
    return detail::pack_to_feature_res(fullres, feature_h, feature_w);
}

} // namespace slotmotion
