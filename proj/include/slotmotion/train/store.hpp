#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "slotmotion/datagen/generate.hpp"
#include "slotmotion/datagen/io.hpp"
#include "slotmotion/motionseg/oracle.hpp"
#include "slotmotion/motionseg/serialize.hpp"
#include "slotmotion/train/config.hpp"

namespace slotmotion {

inline uint64_t clip_seed(uint64_t dataset_seed, const std::string& split, int index) {
    return mix_seed(mix_seed(dataset_seed, hash_name(split)), static_cast<uint64_t>(index));
}

// In-memory clip collection with lazily materialized motion supervision.
// Motion masks come from the per-clip directory when present on disk and are
// computed by the oracle otherwise. Access to mask contents is counted, which
// lets tests pin down that motion-free training never touches them.
class ClipStore {
public:
    static ClipStore generate(const TrainConfig& cfg, const std::string& split, int clip_count) {
        ClipStore s(cfg);
        s.clips_.reserve(static_cast<size_t>(clip_count));
        for (int i = 0; i < clip_count; ++i)
            s.clips_.push_back(generate_clip(clip_seed(cfg.seed, split, i), cfg.gen));
        s.masks_.resize(s.clips_.size());
        return s;
    }

    static ClipStore load(const std::filesystem::path& root, const std::string& split,
                          const TrainConfig& cfg) {
        ClipStore s(cfg);
        auto [clips, manifest] = read_dataset(root, split);
        s.clips_ = std::move(clips);
        s.masks_.resize(s.clips_.size());
        s.disk_dirs_.reserve(s.clips_.size());
        for (int i = 0; i < manifest.clip_count; ++i)
            s.disk_dirs_.push_back(root / split / clip_dir_name(i));
        return s;
    }

    static ClipStore from_clips(std::vector<ClipSample> clips, const TrainConfig& cfg) {
        ClipStore s(cfg);
        s.clips_ = std::move(clips);
        s.masks_.resize(s.clips_.size());
        return s;
    }

    int size() const { return static_cast<int>(clips_.size()); }
    const ClipSample& clip(int i) const { return clips_[static_cast<size_t>(i)]; }

    int feature_height() const { return cfg_.model.feature_height(); }
    int feature_width() const { return cfg_.model.feature_width(); }

    const MotionMaskSet& masks(int i) const {
        auto& slot = masks_[static_cast<size_t>(i)];
        if (!slot.has_value()) {
            if (static_cast<size_t>(i) < disk_dirs_.size() && has_motion_masks(disk_dirs_[static_cast<size_t>(i)]))
                slot = read_motion_masks(disk_dirs_[static_cast<size_t>(i)]);
            else
                slot = compute_masks(clips_[static_cast<size_t>(i)], i);
        }
        ++mask_reads_;
        return *slot;
    }

    bool motion_bearing(int i) const { return masks(i).any(); }

    std::vector<char> motion_bearing_flags() const {
        std::vector<char> out(static_cast<size_t>(size()));
        for (int i = 0; i < size(); ++i) out[static_cast<size_t>(i)] = motion_bearing(i) ? 1 : 0;
        return out;
    }

    int64_t mask_reads() const { return mask_reads_; }

private:
    explicit ClipStore(const TrainConfig& cfg) : cfg_(cfg) {}

    MotionMaskSet compute_masks(const ClipSample& clip, int index) const {
        DegradeConfig dg = cfg_.degrade;
        dg.seed = mix_seed(cfg_.degrade.seed, static_cast<uint64_t>(index));
        if (cfg_.motion_postprocess)
            return oracle_motion_masks_postprocessed(clip, dg, cfg_.postprocess, feature_height(),
                                                     feature_width());
        return oracle_motion_masks(clip, dg, feature_height(), feature_width());
    }

    TrainConfig cfg_;
    std::vector<ClipSample> clips_;
    std::vector<std::filesystem::path> disk_dirs_;
    mutable std::vector<std::optional<MotionMaskSet>> masks_;
    mutable int64_t mask_reads_ = 0;
};

} // namespace slotmotion
