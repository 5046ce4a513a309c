#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "slotmotion/core/random.hpp"
#include "slotmotion/datagen/types.hpp"

namespace slotmotion {

namespace detail {

// Analytic point-in-shape tests against pixel centers; no anti-aliasing, so
// the instance masks are exact.
inline bool shape_contains(ShapeKind kind, const Vec2& center, float size, float px, float py) {
    const float dx = px - center.x;
    const float dy = py - center.y;
    const float h = size * 0.5f;
    switch (kind) {
        case ShapeKind::Circle:
            return dx * dx + dy * dy <= h * h;
        case ShapeKind::Square:
            return std::fabs(dx) <= h && std::fabs(dy) <= h;
        case ShapeKind::Triangle: {
            // Upright triangle inscribed in the size x size box.
            if (dy < -h || dy > h) return false;
            const float t = (dy + h) / size;          // 0 at apex, 1 at base
            return std::fabs(dx) <= t * h;
        }
    }
    return false;
}

inline float quantize_u8(float v) {
    float c = std::min(std::max(v, 0.0f), 1.0f);
    return std::round(c * 255.0f) / 255.0f;
}

inline void background_color(Background bg, float wx, float wy, int height, float* rgb) {
    if (bg == Background::Solid) {
        rgb[0] = rgb[1] = rgb[2] = quantize_u8(0.10f);
        return;
    }
    // Gradient in world coordinates so that camera shifts move it rigidly.
    float t = 0.5f + 0.5f * std::sin(wy * 6.283185307179586f / (2.0f * static_cast<float>(height)));
    (void)wx;
    rgb[0] = quantize_u8(0.05f + 0.10f * t);
    rgb[1] = quantize_u8(0.05f + 0.10f * t);
    rgb[2] = quantize_u8(0.10f + 0.15f * t);
}

} // namespace detail

// Per-frame moving-object labels. For each consecutive frame pair the mask
// centroid of every object visible in both frames is propagated by the
// camera-induced shift and compared against the true next-frame centroid;
// the object is moving iff the residual exceeds threshold * image diagonal.
// The last frame inherits the preceding pair's labels, intersected with the
// objects still visible in it.
inline std::vector<std::vector<int>> label_moving(const ClipSample& clip, float threshold) {
    const int T = clip.length;
    std::vector<std::vector<int>> out(static_cast<size_t>(T));
    if (T == 0) return out;

    // Centroids of visible pixels per (frame, object).
    std::vector<std::vector<std::optional<Vec2>>> centroid(
        static_cast<size_t>(T), std::vector<std::optional<Vec2>>(static_cast<size_t>(clip.object_count) + 1));
    for (int t = 0; t < T; ++t) {
        std::vector<double> sx(static_cast<size_t>(clip.object_count) + 1, 0.0);
        std::vector<double> sy(static_cast<size_t>(clip.object_count) + 1, 0.0);
        std::vector<int64_t> cnt(static_cast<size_t>(clip.object_count) + 1, 0);
        for (int y = 0; y < clip.height; ++y)
            for (int x = 0; x < clip.width; ++x) {
                uint16_t id = clip.mask_at(t, y, x);
                if (id == 0) continue;
                sx[id] += x;
                sy[id] += y;
                cnt[id] += 1;
            }
        for (int id = 1; id <= clip.object_count; ++id)
            if (cnt[static_cast<size_t>(id)] > 0)
                centroid[static_cast<size_t>(t)][static_cast<size_t>(id)] =
                    Vec2{static_cast<float>(sx[static_cast<size_t>(id)] / cnt[static_cast<size_t>(id)]),
                         static_cast<float>(sy[static_cast<size_t>(id)] / cnt[static_cast<size_t>(id)])};
    }

    const float limit = threshold * clip.diagonal();
    for (int t = 0; t + 1 < T; ++t) {
        for (int id = 1; id <= clip.object_count; ++id) {
            const auto& c0 = centroid[static_cast<size_t>(t)][static_cast<size_t>(id)];
            const auto& c1 = centroid[static_cast<size_t>(t) + 1][static_cast<size_t>(id)];
            if (!c0 || !c1) continue; // absent in either frame: skipped
            Vec2 propagated = *c0 + clip.camera_motion[static_cast<size_t>(t)];
            if ((*c1 - propagated).norm() > limit) out[static_cast<size_t>(t)].push_back(id);
        }
    }
    if (T >= 2) {
        for (int id : out[static_cast<size_t>(T) - 2])
            if (centroid[static_cast<size_t>(T) - 1][static_cast<size_t>(id)])
                out[static_cast<size_t>(T) - 1].push_back(id);
    }
    return out;
}

// Rasterizes a fully specified scene. Object ids are 1-based indices into
// `objects`; later ids occlude earlier ones. `camera_motion[t]` is the screen
// shift induced between frames t and t+1 (the last entry must be zero).
inline ClipSample render_clip(const std::vector<ObjectSpec>& objects,
                              const std::vector<Vec2>& camera_motion, const GenConfig& cfg) {
    cfg.validate();
    const int T = cfg.frames, H = cfg.height, W = cfg.width;
    require(static_cast<int>(camera_motion.size()) == T, "render_clip: camera_motion length != frames");
    for (const auto& o : objects)
        require(static_cast<int>(o.trajectory.size()) == T,
                "render_clip: trajectory length != clip length");

    ClipSample clip;
    clip.width = W;
    clip.height = H;
    clip.length = T;
    clip.object_count = static_cast<int>(objects.size());
    clip.frames.assign(static_cast<size_t>(T) * H * W * 3, 0.0f);
    clip.instance_masks.assign(static_cast<size_t>(T) * H * W, 0);
    clip.flow.assign(static_cast<size_t>(T) * H * W * 2, 0.0f);
    clip.camera_motion = camera_motion;

    // Cumulative camera offset added to world positions to get screen positions.
    std::vector<Vec2> offset(static_cast<size_t>(T));
    for (int t = 1; t < T; ++t)
        offset[static_cast<size_t>(t)] =
            offset[static_cast<size_t>(t) - 1] + camera_motion[static_cast<size_t>(t) - 1];

    auto screen_center = [&](int obj, int t) {
        return objects[static_cast<size_t>(obj)].trajectory[static_cast<size_t>(t)] +
               offset[static_cast<size_t>(t)];
    };

    for (int t = 0; t < T; ++t) {
        for (int y = 0; y < H; ++y) {
            for (int x = 0; x < W; ++x) {
                const float px = static_cast<float>(x), py = static_cast<float>(y);
                int top = 0; // 0 = background, ids are 1-based; later ids occlude
                for (int i = 0; i < clip.object_count; ++i) {
                    const ObjectSpec& o = objects[static_cast<size_t>(i)];
                    if (detail::shape_contains(o.kind, screen_center(i, t), o.size, px, py))
                        top = i + 1;
                }
                clip.mask_at(t, y, x) = static_cast<uint16_t>(top);
                if (top > 0) {
                    const auto& c = objects[static_cast<size_t>(top) - 1].color;
                    clip.frame_at(t, y, x, 0) = c[0];
                    clip.frame_at(t, y, x, 1) = c[1];
                    clip.frame_at(t, y, x, 2) = c[2];
                } else {
                    float rgb[3];
                    detail::background_color(cfg.background, px - offset[static_cast<size_t>(t)].x,
                                             py - offset[static_cast<size_t>(t)].y, H, rgb);
                    clip.frame_at(t, y, x, 0) = rgb[0];
                    clip.frame_at(t, y, x, 1) = rgb[1];
                    clip.frame_at(t, y, x, 2) = rgb[2];
                }
                // Forward flow: object pixels move with their object, background
                // pixels move with the camera. Nothing moves after the last frame.
                if (t + 1 < T) {
                    Vec2 f = camera_motion[static_cast<size_t>(t)];
                    if (top > 0) f = screen_center(top - 1, t + 1) - screen_center(top - 1, t);
                    clip.flow_at(t, y, x, 0) = f.x;
                    clip.flow_at(t, y, x, 1) = f.y;
                }
            }
        }
    }

    if (cfg.smooth_frames) {
        // 3x3 box blur, frames only; re-quantized to keep the 8-bit round trip exact.
        std::vector<float> src = clip.frames;
        for (int t = 0; t < T; ++t)
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x)
                    for (int c = 0; c < 3; ++c) {
                        float acc = 0.0f;
                        int n = 0;
                        for (int dy = -1; dy <= 1; ++dy)
                            for (int dx = -1; dx <= 1; ++dx) {
                                int yy = y + dy, xx = x + dx;
                                if (yy < 0 || yy >= H || xx < 0 || xx >= W) continue;
                                acc += src[((static_cast<size_t>(t) * H + yy) * W + xx) * 3 +
                                           static_cast<size_t>(c)];
                                ++n;
                            }
                        clip.frame_at(t, y, x, c) = detail::quantize_u8(acc / static_cast<float>(n));
                    }
    }

    clip.moving_ids = label_moving(clip, cfg.moving_threshold);
    return clip;
}

// Samples a random scene and renders it. Pure function of (seed, cfg).
inline ClipSample generate_clip(uint64_t seed, const GenConfig& cfg) {
    cfg.validate();
    Rng rng(mix_seed(seed, 0x636C6970ULL));
    const int T = cfg.frames, H = cfg.height, W = cfg.width;

    const int count = static_cast<int>(rng.uniform_int(cfg.min_objects, cfg.max_objects));
    std::vector<ObjectSpec> objects;
    objects.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) {
        ObjectSpec o;
        switch (rng.uniform_int(0, 2)) {
            case 0: o.kind = ShapeKind::Circle; break;
            case 1: o.kind = ShapeKind::Square; break;
            default: o.kind = ShapeKind::Triangle; break;
        }
        o.size = static_cast<float>(rng.uniform(cfg.min_size, cfg.max_size));
        // Saturated colors, snapped to the 8-bit grid. With a finite palette,
        // distinct instances frequently share a color, so appearance alone
        // cannot separate them.
        double hue, sat, val;
        if (cfg.palette_size > 0) {
            const int idx = static_cast<int>(rng.uniform_int(0, cfg.palette_size - 1));
            hue = 6.0 * (static_cast<double>(idx) + 0.5) / cfg.palette_size;
            sat = 0.9;
            val = 0.9;
        } else {
            hue = rng.uniform(0.0, 6.0);
            sat = rng.uniform(0.75, 1.0);
            val = rng.uniform(0.75, 1.0);
        }
        const double c = val * sat, xm = c * (1.0 - std::fabs(std::fmod(hue, 2.0) - 1.0));
        double r = 0, g = 0, b = 0;
        if (hue < 1) { r = c; g = xm; }
        else if (hue < 2) { r = xm; g = c; }
        else if (hue < 3) { g = c; b = xm; }
        else if (hue < 4) { g = xm; b = c; }
        else if (hue < 5) { r = xm; b = c; }
        else { r = c; b = xm; }
        const double m = val - c;
        o.color = {detail::quantize_u8(static_cast<float>(r + m)),
                   detail::quantize_u8(static_cast<float>(g + m)),
                   detail::quantize_u8(static_cast<float>(b + m))};
        o.is_mover = rng.bernoulli(cfg.mover_prob);

        const float margin = o.size * 0.5f + 1.0f;
        Vec2 pos{static_cast<float>(rng.uniform(margin, static_cast<double>(W) - 1.0 - margin)),
                 static_cast<float>(rng.uniform(margin, static_cast<double>(H) - 1.0 - margin))};
        Vec2 vel{0.0f, 0.0f};
        if (o.is_mover) {
            const double speed = rng.uniform(cfg.min_speed, cfg.max_speed);
            const double ang = rng.uniform(0.0, 6.283185307179586);
            vel = {static_cast<float>(speed * std::cos(ang)),
                   static_cast<float>(speed * std::sin(ang))};
            if (cfg.integer_motion) {
                vel.x = std::round(vel.x);
                vel.y = std::round(vel.y);
                if (vel.x == 0.0f && vel.y == 0.0f) vel.x = 1.0f;
            }
        }
        if (cfg.integer_motion) {
            pos.x = std::round(pos.x);
            pos.y = std::round(pos.y);
        }

        o.trajectory.resize(static_cast<size_t>(T));
        o.trajectory[0] = pos;
        for (int t = 1; t < T; ++t) {
            pos = pos + vel;
            // Reflect movers at the walls so they stay in view.
            const float lox = margin, hix = static_cast<float>(W) - 1.0f - margin;
            const float loy = margin, hiy = static_cast<float>(H) - 1.0f - margin;
            if (pos.x < lox) { pos.x = 2 * lox - pos.x; vel.x = -vel.x; }
            if (pos.x > hix) { pos.x = 2 * hix - pos.x; vel.x = -vel.x; }
            if (pos.y < loy) { pos.y = 2 * loy - pos.y; vel.y = -vel.y; }
            if (pos.y > hiy) { pos.y = 2 * hiy - pos.y; vel.y = -vel.y; }
            o.trajectory[static_cast<size_t>(t)] = pos;
        }
        objects.push_back(std::move(o));
    }

    std::vector<Vec2> camera(static_cast<size_t>(T));
    for (int t = 0; t + 1 < T; ++t) {
        Vec2 shift{0.0f, 0.0f};
        if (cfg.camera_amplitude > 0.0f) {
            shift = {static_cast<float>(rng.uniform(-cfg.camera_amplitude, cfg.camera_amplitude)),
                     static_cast<float>(rng.uniform(-cfg.camera_amplitude, cfg.camera_amplitude))};
            if (cfg.integer_motion) {
                shift.x = std::round(shift.x);
                shift.y = std::round(shift.y);
            }
        }
        camera[static_cast<size_t>(t)] = shift;
    }
    return render_clip(objects, camera, cfg);
}

} // namespace slotmotion
