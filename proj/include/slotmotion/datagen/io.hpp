#pragma once

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <string>
#include <vector>

#include "slotmotion/core/error.hpp"
#include "slotmotion/core/image.hpp"
#include "slotmotion/datagen/types.hpp"

namespace slotmotion {

namespace fsys = std::filesystem;

namespace detail {

inline void put_u32le(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                          static_cast<unsigned char>((v >> 8) & 0xFF),
                          static_cast<unsigned char>((v >> 16) & 0xFF),
                          static_cast<unsigned char>((v >> 24) & 0xFF)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline uint32_t get_u32le(const unsigned char* b) {
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

inline void put_f32le(std::ostream& os, float v) {
    uint32_t u;
    static_assert(sizeof(u) == sizeof(v));
    std::memcpy(&u, &v, 4);
    put_u32le(os, u);
}

inline float get_f32le(const unsigned char* b) {
    uint32_t u = get_u32le(b);
    float v;
    std::memcpy(&v, &u, 4);
    return v;
}

inline std::string frame_name(const char* stem, int t, const char* ext) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%04d.%s", stem, t, ext);
    return buf;
}

} // namespace detail

// Flow file layout: 4-byte magic "MFLO", u32le width, u32le height, then
// row-major f32le (u, v) pairs per pixel.
inline void write_flow(const std::string& path, int width, int height, const float* uv) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open flow file for writing: " + path);
    os.write("MFLO", 4);
    detail::put_u32le(os, static_cast<uint32_t>(width));
    detail::put_u32le(os, static_cast<uint32_t>(height));
    for (int64_t i = 0; i < static_cast<int64_t>(width) * height * 2; ++i)
        detail::put_f32le(os, uv[i]);
    if (!os) throw IoError("short write on flow file: " + path);
}

inline void read_flow(const std::string& path, int& width, int& height, std::vector<float>& uv) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open flow file: " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 12)
        throw FormatError("truncated flow file " + path + ": expected at least 12 bytes, found " +
                          std::to_string(bytes.size()));
    if (std::memcmp(bytes.data(), "MFLO", 4) != 0)
        throw FormatError("bad magic tag in flow file " + path + ": expected MFLO");
    width = static_cast<int>(detail::get_u32le(bytes.data() + 4));
    height = static_cast<int>(detail::get_u32le(bytes.data() + 8));
    const size_t expected = 12 + static_cast<size_t>(width) * height * 2 * 4;
    if (bytes.size() != expected)
        throw FormatError("flow file " + path + ": expected " + std::to_string(expected) +
                          " bytes, found " + std::to_string(bytes.size()));
    uv.resize(static_cast<size_t>(width) * height * 2);
    for (size_t i = 0; i < uv.size(); ++i) uv[i] = detail::get_f32le(bytes.data() + 12 + i * 4);
}

inline std::string clip_dir_name(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "clip_%05d", index);
    return buf;
}

inline void write_clip(const ClipSample& clip, const fsys::path& dir) {
    fsys::create_directories(dir);
    const int T = clip.length, H = clip.height, W = clip.width;
    for (int t = 0; t < T; ++t) {
        ImageU8 frame;
        frame.height = H;
        frame.width = W;
        frame.channels = 3;
        frame.pixels.resize(static_cast<size_t>(H) * W * 3);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                for (int c = 0; c < 3; ++c)
                    frame.at(y, x, c) =
                        static_cast<uint8_t>(std::lround(clip.frame_at(t, y, x, c) * 255.0f));
        write_png_rgb8((dir / detail::frame_name("frame", t, "png")).string(), frame);

        ImageU16 mask;
        mask.height = H;
        mask.width = W;
        mask.pixels.resize(static_cast<size_t>(H) * W);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) mask.at(y, x) = clip.mask_at(t, y, x);
        write_png_gray16((dir / detail::frame_name("mask", t, "png")).string(), mask);

        write_flow((dir / detail::frame_name("flow", t, "bin")).string(), W, H,
                   clip.flow.data() + static_cast<size_t>(t) * H * W * 2);
    }

    nlohmann::json labels;
    labels["object_count"] = clip.object_count;
    labels["moving_ids"] = clip.moving_ids;
    nlohmann::json cam = nlohmann::json::array();
    for (const auto& v : clip.camera_motion) cam.push_back({v.x, v.y});
    labels["camera_motion"] = cam;
    std::ofstream os(dir / "labels.json");
    if (!os) throw IoError("cannot write " + (dir / "labels.json").string());
    os << labels.dump(2) << "\n";
}

inline ClipSample read_clip(const fsys::path& dir) {
    std::ifstream is(dir / "labels.json");
    if (!is) throw IoError("cannot read " + (dir / "labels.json").string());
    nlohmann::json labels;
    try {
        is >> labels;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad labels file " + (dir / "labels.json").string() + ": " + e.what());
    }

    ClipSample clip;
    clip.object_count = labels.at("object_count").get<int>();
    clip.moving_ids = labels.at("moving_ids").get<std::vector<std::vector<int>>>();
    for (const auto& v : labels.at("camera_motion"))
        clip.camera_motion.push_back({v.at(0).get<float>(), v.at(1).get<float>()});
    clip.length = static_cast<int>(clip.moving_ids.size());
    require(clip.length > 0, "empty clip at " + dir.string());

    for (int t = 0; t < clip.length; ++t) {
        ImageU8 frame = read_png_rgb8((dir / detail::frame_name("frame", t, "png")).string());
        ImageU16 mask = read_png_gray16((dir / detail::frame_name("mask", t, "png")).string());
        if (t == 0) {
            clip.height = frame.height;
            clip.width = frame.width;
            clip.frames.assign(static_cast<size_t>(clip.length) * clip.height * clip.width * 3, 0.0f);
            clip.instance_masks.assign(static_cast<size_t>(clip.length) * clip.height * clip.width, 0);
            clip.flow.assign(static_cast<size_t>(clip.length) * clip.height * clip.width * 2, 0.0f);
        }
        if (frame.height != clip.height || frame.width != clip.width ||
            mask.height != clip.height || mask.width != clip.width)
            throw FormatError("inconsistent frame shape in clip " + dir.string() + " at t=" +
                              std::to_string(t));
        for (int y = 0; y < clip.height; ++y)
            for (int x = 0; x < clip.width; ++x) {
                for (int c = 0; c < 3; ++c)
                    clip.frame_at(t, y, x, c) = static_cast<float>(frame.at(y, x, c)) / 255.0f;
                uint16_t id = mask.at(y, x);
                if (id > clip.object_count)
                    throw FormatError("mask id " + std::to_string(id) + " in " +
                                      (dir / detail::frame_name("mask", t, "png")).string() +
                                      " exceeds object count " + std::to_string(clip.object_count));
                clip.mask_at(t, y, x) = id;
            }

        int fw = 0, fh = 0;
        std::vector<float> uv;
        read_flow((dir / detail::frame_name("flow", t, "bin")).string(), fw, fh, uv);
        if (fw != clip.width || fh != clip.height)
            throw FormatError("flow shape mismatch in clip " + dir.string() + " at t=" +
                              std::to_string(t));
        std::copy(uv.begin(), uv.end(),
                  clip.flow.begin() + static_cast<int64_t>(t) * clip.height * clip.width * 2);
    }
    return clip;
}

inline void write_dataset(const std::vector<ClipSample>& clips, const DatasetManifest& manifest,
                          const fsys::path& root) {
    require(manifest.clip_count == static_cast<int>(clips.size()),
            "manifest clip_count does not match clip list");
    const fsys::path split_dir = root / manifest.split;
    fsys::create_directories(split_dir);
    for (size_t i = 0; i < clips.size(); ++i)
        write_clip(clips[i], split_dir / clip_dir_name(static_cast<int>(i)));

    nlohmann::json m;
    m["clip_count"] = manifest.clip_count;
    m["width"] = manifest.width;
    m["height"] = manifest.height;
    m["frames"] = manifest.frames;
    m["seed"] = manifest.seed;
    m["split"] = manifest.split;
    std::ofstream os(split_dir / "manifest.json");
    if (!os) throw IoError("cannot write " + (split_dir / "manifest.json").string());
    os << m.dump(2) << "\n";
}

inline DatasetManifest read_manifest(const fsys::path& root, const std::string& split) {
    const fsys::path p = root / split / "manifest.json";
    std::ifstream is(p);
    if (!is) throw IoError("cannot read manifest: " + p.string());
    nlohmann::json m;
    try {
        is >> m;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad manifest " + p.string() + ": " + e.what());
    }
    DatasetManifest out;
    out.clip_count = m.at("clip_count").get<int>();
    out.width = m.at("width").get<int>();
    out.height = m.at("height").get<int>();
    out.frames = m.at("frames").get<int>();
    out.seed = m.at("seed").get<uint64_t>();
    out.split = m.at("split").get<std::string>();
    if (out.clip_count <= 0) throw FormatError("manifest " + p.string() + ": clip_count must be > 0");
    return out;
}

inline std::pair<std::vector<ClipSample>, DatasetManifest> read_dataset(const fsys::path& root,
                                                                        const std::string& split) {
    DatasetManifest manifest = read_manifest(root, split);
    std::vector<ClipSample> clips;
    clips.reserve(static_cast<size_t>(manifest.clip_count));
    for (int i = 0; i < manifest.clip_count; ++i)
        clips.push_back(read_clip(root / split / clip_dir_name(i)));
    return {std::move(clips), std::move(manifest)};
}

} // namespace slotmotion
