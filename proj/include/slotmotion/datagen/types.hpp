#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "slotmotion/core/error.hpp"

namespace slotmotion {

struct Vec2 {
    float x = 0.0f;
    float y = 0.0f;

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    float norm() const { return std::sqrt(x * x + y * y); }
};

enum class ShapeKind { Circle, Square, Triangle };

struct ObjectSpec {
    ShapeKind kind = ShapeKind::Circle;
    std::array<float, 3> color = {1.0f, 1.0f, 1.0f}; // values on the 8-bit grid
    float size = 8.0f;                               // bounding-box edge, pixels
    std::vector<Vec2> trajectory;                    // world-space center per frame
    bool is_mover = false;
};

enum class Background { Solid, Gradient };

struct GenConfig {
    int width = 64;
    int height = 64;
    int frames = 5;
    int min_objects = 4;
    int max_objects = 8;
    float mover_prob = 0.5f;
    float min_size = 8.0f;
    float max_size = 14.0f;
    // Per-frame displacement; the moving-label rule triggers above
    // moving_threshold * diagonal (4.52 px at 64x64), so keep movers above it.
    float min_speed = 5.0f;
    float max_speed = 8.0f;
    float camera_amplitude = 1.0f; // max per-frame camera shift, pixels
    bool integer_motion = false;   // snap all displacements to whole pixels
    bool smooth_frames = false;    // 3x3 box blur on frames only, masks stay exact
    int palette_size = 0;          // 0 = continuous random colors, k > 0 = fixed k-color palette
    Background background = Background::Solid;
    float moving_threshold = 0.05f; // fraction of the image diagonal

    void validate() const {
        require(width > 0 && height > 0 && frames > 0, "gen: frame shape and length must be positive");
        if (min_objects < 1 || max_objects < min_objects)
            throw ConfigError("gen: invalid object count range [" + std::to_string(min_objects) +
                              "," + std::to_string(max_objects) + "]");
        if (min_size < 8.0f)
            throw ConfigError("gen: min_size must be >= 8 px, got " + std::to_string(min_size));
        if (max_size < min_size) throw ConfigError("gen: max_size < min_size");
        // An object must fit fully inside the frame at t=0.
        if (max_size + 2.0f > static_cast<float>(std::min(width, height)))
            throw ConfigError("gen: max_size " + std::to_string(max_size) +
                              " px cannot fit in a " + std::to_string(width) + "x" +
                              std::to_string(height) + " frame");
        if (mover_prob < 0.0f || mover_prob > 1.0f) throw ConfigError("gen: mover_prob outside [0,1]");
    }
};

// One generated video clip plus its full ground truth.
struct ClipSample {
    int width = 0;
    int height = 0;
    int length = 0;
    int object_count = 0;
    std::vector<float> frames;          // T*H*W*3, values in [0,1] on the 8-bit grid
    std::vector<uint16_t> instance_masks; // T*H*W, 0 = background, i>=1 = object id
    std::vector<float> flow;            // T*H*W*2 forward flow (u,v), pixels/frame
    std::vector<std::vector<int>> moving_ids; // per frame, sorted object ids
    std::vector<Vec2> camera_motion;    // screen shift induced between t and t+1 (last is zero)

    float frame_at(int t, int y, int x, int c) const {
        return frames[((static_cast<size_t>(t) * height + y) * width + x) * 3 + c];
    }
    float& frame_at(int t, int y, int x, int c) {
        return frames[((static_cast<size_t>(t) * height + y) * width + x) * 3 + c];
    }
    uint16_t mask_at(int t, int y, int x) const {
        return instance_masks[(static_cast<size_t>(t) * height + y) * width + x];
    }
    uint16_t& mask_at(int t, int y, int x) {
        return instance_masks[(static_cast<size_t>(t) * height + y) * width + x];
    }
    float flow_at(int t, int y, int x, int c) const {
        return flow[((static_cast<size_t>(t) * height + y) * width + x) * 2 + c];
    }
    float& flow_at(int t, int y, int x, int c) {
        return flow[((static_cast<size_t>(t) * height + y) * width + x) * 2 + c];
    }
    float diagonal() const {
        return std::sqrt(static_cast<float>(width) * width + static_cast<float>(height) * height);
    }
};

struct DatasetManifest {
    int clip_count = 0;
    int width = 0;
    int height = 0;
    int frames = 0;
    uint64_t seed = 0;
    std::string split = "train"; // "train" or "val"
};

} // namespace slotmotion
