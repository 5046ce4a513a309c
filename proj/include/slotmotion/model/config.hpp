#pragma once

#include <json.hpp>
#include <string>

#include "slotmotion/core/error.hpp"

namespace slotmotion {

enum class DecodeMode { OneShot, PerSlot };
enum class InferenceMode { SingleStep, Iterative };

inline std::string to_string(DecodeMode m) {
    return m == DecodeMode::OneShot ? "one_shot" : "per_slot";
}
inline std::string to_string(InferenceMode m) {
    return m == InferenceMode::SingleStep ? "single_step" : "iterative";
}

inline DecodeMode decode_mode_from_string(const std::string& s) {
    if (s == "one_shot") return DecodeMode::OneShot;
    if (s == "per_slot") return DecodeMode::PerSlot;
    throw ConfigError("unknown decode_mode '" + s + "' (expected one_shot or per_slot)");
}
inline InferenceMode inference_mode_from_string(const std::string& s) {
    if (s == "single_step") return InferenceMode::SingleStep;
    if (s == "iterative") return InferenceMode::Iterative;
    throw ConfigError("unknown inference_mode '" + s + "' (expected single_step or iterative)");
}

struct ModelConfig {
    int frame_height = 64;
    int frame_width = 64;
    int slots = 10;        // K
    int slot_dim = 64;     // D_slot
    int enc_channels = 64; // D_inp; the ConvGRU state has the same width
    int dec_channels = 64;
    int enc_refine_blocks = 2; // stride-1 blocks after the downsampling ones
    int downsample_ratio = 4;  // 2 or 4
    DecodeMode decode_mode = DecodeMode::OneShot;
    InferenceMode inference_mode = InferenceMode::SingleStep;
    int iterative_steps = 3; // L, iterative mode only
    bool use_memory = true;  // ConvGRU on/off
    bool use_pos_encoding = true;
    bool learnable_memory_init = false; // default: zero initial memory state
    bool slot_residual_mlp = false;

    int feature_height() const { return frame_height / downsample_ratio; }
    int feature_width() const { return frame_width / downsample_ratio; }
    int locations() const { return feature_height() * feature_width(); }

    void validate() const {
        if (slots < 1) throw ConfigError("model: slots must be >= 1");
        if (slot_dim < 1 || enc_channels < 1 || dec_channels < 1)
            throw ConfigError("model: channel widths must be >= 1");
        if (downsample_ratio != 2 && downsample_ratio != 4)
            throw ConfigError("model: downsample_ratio must be 2 or 4");
        if (frame_height % downsample_ratio != 0 || frame_width % downsample_ratio != 0)
            throw ConfigError("model: frame shape " + std::to_string(frame_height) + "x" +
                              std::to_string(frame_width) + " not divisible by ratio " +
                              std::to_string(downsample_ratio));
        if (enc_refine_blocks < 0 || enc_refine_blocks > 8)
            throw ConfigError("model: enc_refine_blocks outside [0,8]");
        if (inference_mode == InferenceMode::Iterative && iterative_steps < 1)
            throw ConfigError("model: iterative_steps must be >= 1");
    }

    nlohmann::json to_json() const {
        return {{"frame_height", frame_height},
                {"frame_width", frame_width},
                {"slots", slots},
                {"slot_dim", slot_dim},
                {"enc_channels", enc_channels},
                {"dec_channels", dec_channels},
                {"enc_refine_blocks", enc_refine_blocks},
                {"downsample_ratio", downsample_ratio},
                {"decode_mode", to_string(decode_mode)},
                {"inference_mode", to_string(inference_mode)},
                {"iterative_steps", iterative_steps},
                {"use_memory", use_memory},
                {"use_pos_encoding", use_pos_encoding},
                {"learnable_memory_init", learnable_memory_init},
                {"slot_residual_mlp", slot_residual_mlp}};
    }

    static ModelConfig from_json(const nlohmann::json& j) {
        ModelConfig c;
        c.frame_height = j.at("frame_height").get<int>();
        c.frame_width = j.at("frame_width").get<int>();
        c.slots = j.at("slots").get<int>();
        c.slot_dim = j.at("slot_dim").get<int>();
        c.enc_channels = j.at("enc_channels").get<int>();
        c.dec_channels = j.at("dec_channels").get<int>();
        c.enc_refine_blocks = j.at("enc_refine_blocks").get<int>();
        c.downsample_ratio = j.at("downsample_ratio").get<int>();
        c.decode_mode = decode_mode_from_string(j.at("decode_mode").get<std::string>());
        c.inference_mode = inference_mode_from_string(j.at("inference_mode").get<std::string>());
        c.iterative_steps = j.at("iterative_steps").get<int>();
        c.use_memory = j.at("use_memory").get<bool>();
        c.use_pos_encoding = j.at("use_pos_encoding").get<bool>();
        c.learnable_memory_init = j.at("learnable_memory_init").get<bool>();
        c.slot_residual_mlp = j.at("slot_residual_mlp").get<bool>();
        c.validate();
        return c;
    }
};

} // namespace slotmotion
