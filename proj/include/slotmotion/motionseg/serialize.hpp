#pragma once

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <string>

#include "slotmotion/core/image.hpp"
#include "slotmotion/motionseg/masks.hpp"

namespace slotmotion {

// On-disk layout inside a clip directory:
//   motion_%04d.png  16-bit label map at feature resolution; 0 = no mask,
//                    value k = k-th mask of that frame (1-based)
//   motion.json      {"frames": [{"confidences": [...]}, ...]}
inline void write_motion_masks(const MotionMaskSet& set, const std::filesystem::path& dir,
                               int feature_h, int feature_w) {
    nlohmann::json sidecar;
    sidecar["frames"] = nlohmann::json::array();
    for (size_t t = 0; t < set.frames.size(); ++t) {
        ImageU16 label;
        label.height = feature_h;
        label.width = feature_w;
        label.pixels.assign(static_cast<size_t>(feature_h) * feature_w, 0);
        nlohmann::json confs = nlohmann::json::array();
        for (size_t k = 0; k < set.frames[t].size(); ++k) {
            const MotionMask& mm = set.frames[t][k];
            require(mm.mask.height == feature_h && mm.mask.width == feature_w,
                    "write_motion_masks: mask shape mismatch");
            for (size_t i = 0; i < mm.mask.data.size(); ++i)
                if (mm.mask.data[i]) label.pixels[i] = static_cast<uint16_t>(k + 1);
            confs.push_back(mm.confidence);
        }
        char name[32];
        std::snprintf(name, sizeof(name), "motion_%04zu.png", t);
        write_png_gray16((dir / name).string(), label);
        sidecar["frames"].push_back({{"confidences", confs}});
    }
    std::ofstream os(dir / "motion.json");
    if (!os) throw IoError("cannot write " + (dir / "motion.json").string());
    os << sidecar.dump(2) << "\n";
}

inline bool has_motion_masks(const std::filesystem::path& dir) {
    return std::filesystem::exists(dir / "motion.json");
}

inline MotionMaskSet read_motion_masks(const std::filesystem::path& dir) {
    std::ifstream is(dir / "motion.json");
    if (!is) throw IoError("cannot read " + (dir / "motion.json").string());
    nlohmann::json sidecar;
    try {
        is >> sidecar;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad motion sidecar " + (dir / "motion.json").string() + ": " + e.what());
    }
    MotionMaskSet set;
    const auto& frames = sidecar.at("frames");
    set.frames.resize(frames.size());
    for (size_t t = 0; t < frames.size(); ++t) {
        char name[32];
        std::snprintf(name, sizeof(name), "motion_%04zu.png", t);
        ImageU16 label = read_png_gray16((dir / name).string());
        const auto confs = frames[t].at("confidences").get<std::vector<float>>();
        for (size_t k = 0; k < confs.size(); ++k) {
            MotionMask mm;
            mm.mask = BinaryMask(label.height, label.width);
            for (size_t i = 0; i < label.pixels.size(); ++i)
                if (label.pixels[i] == k + 1) mm.mask.data[i] = 1;
            if (mm.mask.count() == 0)
                throw FormatError("motion mask " + std::to_string(k) + " of frame " +
                                  std::to_string(t) + " in " + dir.string() + " is empty");
            mm.confidence = confs[k];
            mm.source_frame = static_cast<int>(t);
            set.frames[t].push_back(std::move(mm));
        }
    }
    return set;
}

} // namespace slotmotion
