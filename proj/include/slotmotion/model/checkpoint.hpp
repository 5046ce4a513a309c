#pragma once

#include <cstring>
#include <fstream>
#include <json.hpp>
#include <string>
#include <vector>

#include "slotmotion/core/params.hpp"
#include "slotmotion/model/config.hpp"

namespace slotmotion {

// Checkpoint container: magic "SMCK", u32 version, a JSON header (model
// config + metadata), then named shape-tagged float32 arrays. Optimizer
// moments ride along as "opt.m.<name>" / "opt.v.<name>" entries so a resumed
// run continues exactly. Round trips are byte-exact.
struct CheckpointMeta {
    int64_t step = 0;
    int64_t epoch = 0;
    bool has_optimizer = false;
};

namespace detail {

inline void ck_put_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                          static_cast<unsigned char>((v >> 8) & 0xFF),
                          static_cast<unsigned char>((v >> 16) & 0xFF),
                          static_cast<unsigned char>((v >> 24) & 0xFF)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline uint32_t ck_get_u32(std::istream& is, const std::string& path) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw FormatError("truncated checkpoint: " + path);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

inline void ck_put_array(std::ostream& os, const std::string& name, const Shape& shape,
                         const std::vector<float>& data) {
    ck_put_u32(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    ck_put_u32(os, static_cast<uint32_t>(shape.size()));
    for (int64_t d : shape) ck_put_u32(os, static_cast<uint32_t>(d));
    for (float v : data) {
        uint32_t u;
        std::memcpy(&u, &v, 4);
        ck_put_u32(os, u);
    }
}

struct NamedArray {
    std::string name;
    Shape shape;
    std::vector<float> data;
};

inline NamedArray ck_get_array(std::istream& is, const std::string& path) {
    NamedArray a;
    uint32_t name_len = ck_get_u32(is, path);
    a.name.resize(name_len);
    is.read(a.name.data(), name_len);
    uint32_t ndim = ck_get_u32(is, path);
    int64_t numel = 1;
    for (uint32_t i = 0; i < ndim; ++i) {
        int64_t d = static_cast<int64_t>(ck_get_u32(is, path));
        a.shape.push_back(d);
        numel *= d;
    }
    a.data.resize(static_cast<size_t>(numel));
    for (int64_t i = 0; i < numel; ++i) {
        uint32_t u = ck_get_u32(is, path);
        std::memcpy(&a.data[static_cast<size_t>(i)], &u, 4);
    }
    if (!is) throw FormatError("truncated checkpoint: " + path);
    return a;
}

template <typename T>
std::vector<float> to_f32(const Tensor<T>& t) {
    std::vector<float> out(static_cast<size_t>(t.numel()));
    for (int64_t i = 0; i < t.numel(); ++i) out[static_cast<size_t>(i)] = static_cast<float>(t[i]);
    return out;
}

} // namespace detail

template <typename T>
void save_checkpoint(const std::string& path, const ParamStore<T>& store, const ModelConfig& cfg,
                     const CheckpointMeta& meta) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open checkpoint for writing: " + path);
    nlohmann::json header;
    header["model"] = cfg.to_json();
    header["step"] = meta.step;
    header["epoch"] = meta.epoch;
    header["has_optimizer"] = meta.has_optimizer;
    const std::string hj = header.dump();

    os.write("SMCK", 4);
    detail::ck_put_u32(os, 1u);
    detail::ck_put_u32(os, static_cast<uint32_t>(hj.size()));
    os.write(hj.data(), static_cast<std::streamsize>(hj.size()));

    const uint32_t per = meta.has_optimizer ? 3u : 1u;
    detail::ck_put_u32(os, static_cast<uint32_t>(store.size()) * per);
    for (int i = 0; i < store.size(); ++i) {
        const Param<T>& p = store.at(i);
        detail::ck_put_array(os, p.name, p.value.shape(), detail::to_f32(p.value));
        if (meta.has_optimizer) {
            detail::ck_put_array(os, "opt.m." + p.name, p.m.shape(), detail::to_f32(p.m));
            detail::ck_put_array(os, "opt.v." + p.name, p.v.shape(), detail::to_f32(p.v));
        }
    }
    if (!os) throw IoError("short write on checkpoint: " + path);
}

inline ModelConfig peek_checkpoint_config(const std::string& path, CheckpointMeta* meta_out = nullptr) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "SMCK", 4) != 0)
        throw FormatError("bad magic in checkpoint " + path + ": expected SMCK");
    uint32_t version = detail::ck_get_u32(is, path);
    if (version != 1) throw FormatError("unsupported checkpoint version " + std::to_string(version));
    uint32_t hlen = detail::ck_get_u32(is, path);
    std::string hj(hlen, '\0');
    is.read(hj.data(), hlen);
    if (!is) throw FormatError("truncated checkpoint: " + path);
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(hj);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad checkpoint header in " + path + ": " + e.what());
    }
    if (meta_out) {
        meta_out->step = header.at("step").get<int64_t>();
        meta_out->epoch = header.at("epoch").get<int64_t>();
        meta_out->has_optimizer = header.at("has_optimizer").get<bool>();
    }
    return ModelConfig::from_json(header.at("model"));
}

// Loads arrays into an already-registered store; every store parameter must
// be present with a matching shape.
template <typename T>
CheckpointMeta load_checkpoint(const std::string& path, ParamStore<T>& store) {
    CheckpointMeta meta;
    peek_checkpoint_config(path, &meta);

    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint: " + path);
    is.seekg(8);
    uint32_t hlen = detail::ck_get_u32(is, path);
    is.seekg(12 + static_cast<std::streamoff>(hlen));
    uint32_t count = detail::ck_get_u32(is, path);

    std::vector<bool> filled(static_cast<size_t>(store.size()), false);
    for (uint32_t i = 0; i < count; ++i) {
        detail::NamedArray a = detail::ck_get_array(is, path);
        Tensor<T>* dst = nullptr;
        std::string base = a.name;
        int kind = 0;
        if (base.rfind("opt.m.", 0) == 0) {
            base = base.substr(6);
            kind = 1;
        } else if (base.rfind("opt.v.", 0) == 0) {
            base = base.substr(6);
            kind = 2;
        }
        int pid = store.find(base);
        if (pid < 0)
            throw FormatError("checkpoint " + path + " contains unknown parameter '" + a.name + "'");
        Param<T>& p = store.at(pid);
        dst = kind == 0 ? &p.value : (kind == 1 ? &p.m : &p.v);
        if (dst->shape() != a.shape)
            throw FormatError("checkpoint " + path + ": parameter '" + a.name + "' has shape " +
                              shape_str(a.shape) + ", expected " + shape_str(dst->shape()));
        for (int64_t j = 0; j < dst->numel(); ++j)
            (*dst)[j] = static_cast<T>(a.data[static_cast<size_t>(j)]);
        if (kind == 0) filled[static_cast<size_t>(pid)] = true;
    }
    for (int i = 0; i < store.size(); ++i)
        if (!filled[static_cast<size_t>(i)])
            throw FormatError("checkpoint " + path + " is missing parameter '" + store.at(i).name +
                              "'");
    return meta;
}

} // namespace slotmotion
