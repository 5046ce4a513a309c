#pragma once

#include <cstdint>
#include <deque>
#include <vector>

#include "slotmotion/core/error.hpp"

namespace slotmotion {

// Binary mask with explicit shape; row-major uint8 storage.
struct BinaryMask {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> data;

    BinaryMask() = default;
    BinaryMask(int h, int w) : height(h), width(w), data(static_cast<size_t>(h) * w, 0) {}

    uint8_t& at(int y, int x) { return data[static_cast<size_t>(y) * width + x]; }
    uint8_t at(int y, int x) const { return data[static_cast<size_t>(y) * width + x]; }

    int64_t count() const {
        int64_t n = 0;
        for (uint8_t v : data) n += v ? 1 : 0;
        return n;
    }

    bool operator==(const BinaryMask& o) const {
        return height == o.height && width == o.width && data == o.data;
    }
};

// A single motion segment at feature resolution.
struct MotionMask {
    BinaryMask mask;
    float confidence = 1.0f;
    int source_frame = 0;
};

// Per-frame sets of motion segments; frames may be empty.
struct MotionMaskSet {
    std::vector<std::vector<MotionMask>> frames;

    int count_at(int t) const { return static_cast<int>(frames[static_cast<size_t>(t)].size()); }
    int64_t total_count() const {
        int64_t n = 0;
        for (const auto& f : frames) n += static_cast<int64_t>(f.size());
        return n;
    }
    bool any() const {
        for (const auto& f : frames)
            if (!f.empty()) return true;
        return false;
    }
};

struct ConfidenceModel {
    float min = 1.0f;
    float max = 1.0f;
};

struct DegradeConfig {
    float drop_rate = 0.0f;        // chance a moving object yields no mask
    float static_keep_rate = 0.0f; // chance a static object yields a mask anyway
    int boundary_erosion = 0;      // 4-neighborhood erosion iterations, full resolution
    float noise_flip_rate = 0.0f;  // per-pixel flip probability, full resolution
    ConfidenceModel confidence;
    uint64_t seed = 0;

    void validate() const {
        require(drop_rate >= 0.0f && drop_rate <= 1.0f, "degrade: drop_rate outside [0,1]");
        require(static_keep_rate >= 0.0f && static_keep_rate <= 1.0f,
                "degrade: static_keep_rate outside [0,1]");
        require(noise_flip_rate >= 0.0f && noise_flip_rate <= 1.0f,
                "degrade: noise_flip_rate outside [0,1]");
        require(boundary_erosion >= 0, "degrade: boundary_erosion must be >= 0");
        require(confidence.min >= 0.0f && confidence.max <= 1.0f && confidence.min <= confidence.max,
                "degrade: confidence range invalid");
    }

    bool is_identity() const {
        return drop_rate == 0.0f && static_keep_rate == 0.0f && boundary_erosion == 0 &&
               noise_flip_rate == 0.0f;
    }
};

// 4-connectivity components in deterministic order: components are labeled
// by the row-major position of their first pixel.
inline std::vector<BinaryMask> connected_components(const BinaryMask& mask) {
    std::vector<BinaryMask> out;
    std::vector<uint8_t> seen(mask.data.size(), 0);
    const int H = mask.height, W = mask.width;
    for (int y0 = 0; y0 < H; ++y0) {
        for (int x0 = 0; x0 < W; ++x0) {
            const size_t idx0 = static_cast<size_t>(y0) * W + x0;
            if (!mask.data[idx0] || seen[idx0]) continue;
            BinaryMask comp(H, W);
            std::deque<std::pair<int, int>> queue{{y0, x0}};
            seen[idx0] = 1;
            while (!queue.empty()) {
                auto [y, x] = queue.front();
                queue.pop_front();
                comp.at(y, x) = 1;
                const int dy[4] = {-1, 1, 0, 0};
                const int dx[4] = {0, 0, -1, 1};
                for (int d = 0; d < 4; ++d) {
                    const int ny = y + dy[d], nx = x + dx[d];
                    if (ny < 0 || ny >= H || nx < 0 || nx >= W) continue;
                    const size_t nidx = static_cast<size_t>(ny) * W + nx;
                    if (mask.data[nidx] && !seen[nidx]) {
                        seen[nidx] = 1;
                        queue.emplace_back(ny, nx);
                    }
                }
            }
            out.push_back(std::move(comp));
        }
    }
    return out;
}

inline int count_components(const BinaryMask& mask) {
    return static_cast<int>(connected_components(mask).size());
}

// Block-majority pooling; a block counts as positive when at least half of
// its pixels are (ties go positive, which preserves thin structures).
inline BinaryMask downsample_mask(const BinaryMask& mask, int target_h, int target_w) {
    require(target_h > 0 && target_w > 0, "downsample_mask: target must be positive");
    require(mask.height % target_h == 0 && mask.width % target_w == 0,
            "downsample_mask: shape " + std::to_string(mask.height) + "x" +
                std::to_string(mask.width) + " not divisible by target " +
                std::to_string(target_h) + "x" + std::to_string(target_w));
    const int by = mask.height / target_h, bx = mask.width / target_w;
    BinaryMask out(target_h, target_w);
    for (int y = 0; y < target_h; ++y)
        for (int x = 0; x < target_w; ++x) {
            int pos = 0;
            for (int dy = 0; dy < by; ++dy)
                for (int dx = 0; dx < bx; ++dx)
                    if (mask.at(y * by + dy, x * bx + dx)) ++pos;
            out.at(y, x) = (2 * pos >= by * bx) ? 1 : 0;
        }
    return out;
}

inline BinaryMask erode(const BinaryMask& mask, int iterations) {
    BinaryMask cur = mask;
    for (int it = 0; it < iterations; ++it) {
        BinaryMask next(cur.height, cur.width);
        for (int y = 0; y < cur.height; ++y)
            for (int x = 0; x < cur.width; ++x) {
                if (!cur.at(y, x)) continue;
                const bool keep = y > 0 && y + 1 < cur.height && x > 0 && x + 1 < cur.width &&
                                  cur.at(y - 1, x) && cur.at(y + 1, x) && cur.at(y, x - 1) &&
                                  cur.at(y, x + 1);
                next.at(y, x) = keep ? 1 : 0;
            }
        cur = std::move(next);
    }
    return cur;
}

} // namespace slotmotion
