#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <string>
#include <vector>

#include "slotmotion/core/image.hpp"
#include "slotmotion/core/tensor.hpp"
#include "slotmotion/datagen/types.hpp"

namespace slotmotion {

// Fixed slot colors (golden-angle hues), so a slot keeps its color across
// frames and figures.
inline std::array<uint8_t, 3> slot_color(int slot) {
    const double hue = std::fmod(0.1 + slot * 0.618033988749895, 1.0) * 6.0;
    const double c = 0.85, x = c * (1.0 - std::fabs(std::fmod(hue, 2.0) - 1.0));
    double r = 0, g = 0, b = 0;
    if (hue < 1) { r = c; g = x; }
    else if (hue < 2) { r = x; g = c; }
    else if (hue < 3) { g = c; b = x; }
    else if (hue < 4) { g = x; b = c; }
    else if (hue < 5) { r = x; b = c; }
    else { r = c; b = x; }
    const double m = 0.12;
    return {static_cast<uint8_t>(std::lround((r + m) * 255.0)),
            static_cast<uint8_t>(std::lround((g + m) * 255.0)),
            static_cast<uint8_t>(std::lround((b + m) * 255.0))};
}

// Frame blended with the per-pixel slot color (50/50).
inline ImageU8 overlay_labels(const ClipSample& clip, int t, const std::vector<int>& labels_up) {
    ImageU8 img;
    img.height = clip.height;
    img.width = clip.width;
    img.channels = 3;
    img.pixels.resize(static_cast<size_t>(clip.height) * clip.width * 3);
    for (int y = 0; y < clip.height; ++y)
        for (int x = 0; x < clip.width; ++x) {
            const auto color = slot_color(labels_up[static_cast<size_t>(y) * clip.width + x]);
            for (int c = 0; c < 3; ++c) {
                const double f = clip.frame_at(t, y, x, c) * 255.0;
                img.at(y, x, c) = static_cast<uint8_t>(std::lround(0.5 * f + 0.5 * color[c]));
            }
        }
    return img;
}

// K attention maps as one grid image, nearest-upscaled, brightest = 1.
template <typename T>
ImageU8 attention_montage(const Tensor<T>& attention, int feature_h, int feature_w, int upscale,
                          int columns) {
    const int64_t k = attention.dim(1);
    const int cols = std::min<int>(columns, static_cast<int>(k));
    const int rows = static_cast<int>((k + cols - 1) / cols);
    const int cell_h = feature_h * upscale, cell_w = feature_w * upscale;
    const int pad = 2;
    ImageU8 img;
    img.height = rows * cell_h + (rows + 1) * pad;
    img.width = cols * cell_w + (cols + 1) * pad;
    img.channels = 3;
    img.pixels.assign(static_cast<size_t>(img.height) * img.width * 3, 32);
    for (int64_t s = 0; s < k; ++s) {
        const int gy = static_cast<int>(s) / cols, gx = static_cast<int>(s) % cols;
        const int oy = pad + gy * (cell_h + pad), ox = pad + gx * (cell_w + pad);
        const auto tint = slot_color(static_cast<int>(s));
        for (int y = 0; y < cell_h; ++y)
            for (int x = 0; x < cell_w; ++x) {
                const int fy = y / upscale, fx = x / upscale;
                const double a = std::clamp(
                    static_cast<double>(attention[(static_cast<int64_t>(fy) * feature_w + fx) * k + s]),
                    0.0, 1.0);
                for (int c = 0; c < 3; ++c)
                    img.at(oy + y, ox + x, c) = static_cast<uint8_t>(std::lround(a * tint[c]));
            }
    }
    return img;
}

namespace detail {

inline void draw_line(ImageU8& img, int x0, int y0, int x1, int y1, const std::array<uint8_t, 3>& c) {
    const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
        if (y0 >= 0 && y0 < img.height && x0 >= 0 && x0 < img.width)
            for (int ch = 0; ch < 3; ++ch) img.at(y0, x0, ch) = c[ch];
        if (x0 == x1 && y0 == y1) break;
        const int e2 = 2 * err;
        if (e2 >= dy) { err += dy; x0 += sx; }
        if (e2 <= dx) { err += dx; y0 += sy; }
    }
}

} // namespace detail

// Loss curves from a JSONL metrics log. Returns false (and writes nothing)
// when the log has no usable rows.
inline bool plot_loss_curves(const std::string& metrics_jsonl, const std::string& out_png) {
    std::ifstream is(metrics_jsonl);
    if (!is) return false;
    std::vector<std::array<double, 4>> rows; // total, recon, motion, temporal
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) continue;
        rows.push_back({j.value("total", 0.0), j.value("recon", 0.0), j.value("motion", 0.0),
                        j.value("temporal", 0.0)});
    }
    if (rows.empty()) return false;

    const int W = 640, H = 360, margin = 24;
    ImageU8 img;
    img.height = H;
    img.width = W;
    img.channels = 3;
    img.pixels.assign(static_cast<size_t>(H) * W * 3, 250);
    detail::draw_line(img, margin, H - margin, W - margin, H - margin, {0, 0, 0});
    detail::draw_line(img, margin, margin, margin, H - margin, {0, 0, 0});

    // log10 scale across all curves, clamped away from zero
    double lo = 1e30, hi = -1e30;
    for (const auto& r : rows)
        for (double v : r) {
            const double lv = std::log10(std::max(v, 1e-8));
            lo = std::min(lo, lv);
            hi = std::max(hi, lv);
        }
    if (hi - lo < 1e-9) hi = lo + 1.0;
    const std::array<std::array<uint8_t, 3>, 4> colors{{{20, 20, 20}, {200, 60, 60}, {60, 120, 200}, {60, 160, 90}}};
    for (int series = 0; series < 4; ++series) {
        int px = -1, py = -1;
        for (size_t i = 0; i < rows.size(); ++i) {
            const double lv = std::log10(std::max(rows[i][static_cast<size_t>(series)], 1e-8));
            const int x = margin + static_cast<int>((W - 2.0 * margin) * (rows.size() == 1 ? 0.5 : static_cast<double>(i) / (rows.size() - 1)));
            const int y = H - margin - static_cast<int>((H - 2.0 * margin) * (lv - lo) / (hi - lo));
            if (px >= 0) detail::draw_line(img, px, py, x, y, colors[static_cast<size_t>(series)]);
            px = x;
            py = y;
        }
    }
    write_png_rgb8(out_png, img);
    return true;
}

} // namespace slotmotion
