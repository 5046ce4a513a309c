#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "slotmotion/core/error.hpp"
#include "slotmotion/datagen/types.hpp"
#include "slotmotion/model/config.hpp"
#include "slotmotion/motionseg/masks.hpp"
#include "slotmotion/motionseg/postprocess.hpp"

namespace slotmotion {

// Everything a run needs, addressable through flat `key = value` text.
struct TrainConfig {
    // dataset generation
    GenConfig gen;
    int train_clips = 2000;
    int val_clips = 200;
    uint64_t seed = 0;

    // model
    ModelConfig model;

    // supervision
    bool use_motion = true;
    bool use_recon = true;
    bool use_temporal = true;
    double lambda_motion = 0.5;
    double lambda_temporal = 0.01;
    DegradeConfig degrade;
    bool motion_postprocess = false;
    PostprocessParams postprocess;

    // optimization
    int batch_size = 20;
    int epochs = 500;
    double base_lr = 0.001;
    int64_t warmup_iters = 2000;
    double decay_rate = 0.5;
    int64_t decay_step = 500000;
    double grad_clip = 0.0; // 0 disables
    int checkpoint_every = 50; // epochs
    int eval_every = 0;        // epochs; 0 = final evaluation only
    int eval_stride = 5;
    std::string resume; // checkpoint path, empty = fresh run

    void validate() const {
        gen.validate();
        model.validate();
        degrade.validate();
        if (train_clips < 1) throw ConfigError("train_clips must be >= 1");
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (epochs < 0) throw ConfigError("epochs must be >= 0");
        if (base_lr <= 0) throw ConfigError("base_lr must be > 0");
        if (warmup_iters < 0) throw ConfigError("warmup_iters must be >= 0");
        if (decay_step < 1) throw ConfigError("decay_step must be >= 1");
        if (eval_stride < 1) throw ConfigError("eval_stride must be >= 1");
        if (model.frame_height != gen.height || model.frame_width != gen.width)
            throw ConfigError("model frame shape must match the generator frame shape");
    }
};

namespace detail {

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("bad boolean for '" + key + "': " + v);
}

inline double parse_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("bad number for '" + key + "': " + v);
    }
}

inline int64_t parse_int(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        int64_t i = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return i;
    } catch (const std::exception&) {
        throw ConfigError("bad integer for '" + key + "': " + v);
    }
}

inline std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

} // namespace detail

inline void apply_config_key(TrainConfig& c, const std::string& key, const std::string& value) {
    using detail::parse_bool;
    using detail::parse_double;
    using detail::parse_int;
    auto i = [&] { return static_cast<int>(parse_int(key, value)); };
    auto f = [&] { return static_cast<float>(parse_double(key, value)); };

    if (key == "width") { c.gen.width = i(); c.model.frame_width = c.gen.width; }
    else if (key == "height") { c.gen.height = i(); c.model.frame_height = c.gen.height; }
    else if (key == "clip_length") c.gen.frames = i();
    else if (key == "min_objects") c.gen.min_objects = i();
    else if (key == "max_objects") c.gen.max_objects = i();
    else if (key == "mover_prob") c.gen.mover_prob = f();
    else if (key == "min_size") c.gen.min_size = f();
    else if (key == "max_size") c.gen.max_size = f();
    else if (key == "min_speed") c.gen.min_speed = f();
    else if (key == "max_speed") c.gen.max_speed = f();
    else if (key == "camera_amplitude") c.gen.camera_amplitude = f();
    else if (key == "integer_motion") c.gen.integer_motion = parse_bool(key, value);
    else if (key == "smooth_frames") c.gen.smooth_frames = parse_bool(key, value);
    else if (key == "palette_size") c.gen.palette_size = i();
    else if (key == "background") {
        if (value == "solid") c.gen.background = Background::Solid;
        else if (value == "gradient") c.gen.background = Background::Gradient;
        else throw ConfigError("bad background '" + value + "' (expected solid or gradient)");
    }
    else if (key == "moving_threshold") c.gen.moving_threshold = f();
    else if (key == "train_clips") c.train_clips = i();
    else if (key == "val_clips") c.val_clips = i();
    else if (key == "seed") c.seed = static_cast<uint64_t>(parse_int(key, value));
    else if (key == "slots") c.model.slots = i();
    else if (key == "slot_dim") c.model.slot_dim = i();
    else if (key == "enc_channels") c.model.enc_channels = i();
    else if (key == "dec_channels") c.model.dec_channels = i();
    else if (key == "enc_refine_blocks") c.model.enc_refine_blocks = i();
    else if (key == "downsample_ratio") c.model.downsample_ratio = i();
    else if (key == "decode_mode") c.model.decode_mode = decode_mode_from_string(value);
    else if (key == "inference_mode") c.model.inference_mode = inference_mode_from_string(value);
    else if (key == "iterative_steps") c.model.iterative_steps = i();
    else if (key == "use_memory") c.model.use_memory = parse_bool(key, value);
    else if (key == "use_pos_encoding") c.model.use_pos_encoding = parse_bool(key, value);
    else if (key == "learnable_memory_init") c.model.learnable_memory_init = parse_bool(key, value);
    else if (key == "slot_residual_mlp") c.model.slot_residual_mlp = parse_bool(key, value);
    else if (key == "use_motion") c.use_motion = parse_bool(key, value);
    else if (key == "use_recon") c.use_recon = parse_bool(key, value);
    else if (key == "use_temporal") c.use_temporal = parse_bool(key, value);
    else if (key == "lambda_motion") c.lambda_motion = parse_double(key, value);
    else if (key == "lambda_temporal") c.lambda_temporal = parse_double(key, value);
    else if (key == "drop_rate") c.degrade.drop_rate = f();
    else if (key == "static_keep_rate") c.degrade.static_keep_rate = f();
    else if (key == "boundary_erosion") c.degrade.boundary_erosion = i();
    else if (key == "noise_flip_rate") c.degrade.noise_flip_rate = f();
    else if (key == "conf_min") c.degrade.confidence.min = f();
    else if (key == "conf_max") c.degrade.confidence.max = f();
    else if (key == "degrade_seed") c.degrade.seed = static_cast<uint64_t>(parse_int(key, value));
    else if (key == "motion_postprocess") c.motion_postprocess = parse_bool(key, value);
    else if (key == "pp_min_pixels") c.postprocess.min_pixels = i();
    else if (key == "pp_min_bbox") c.postprocess.min_bbox_dim = i();
    else if (key == "pp_max_area") c.postprocess.max_area_fraction = f();
    else if (key == "pp_boundary") c.postprocess.boundary_margin = i();
    else if (key == "pp_conf") c.postprocess.conf_threshold = f();
    else if (key == "pp_mag") c.postprocess.mag_threshold = f();
    else if (key == "batch_size") c.batch_size = i();
    else if (key == "epochs") c.epochs = i();
    else if (key == "base_lr") c.base_lr = parse_double(key, value);
    else if (key == "warmup_iters") c.warmup_iters = parse_int(key, value);
    else if (key == "decay_rate") c.decay_rate = parse_double(key, value);
    else if (key == "decay_step") c.decay_step = parse_int(key, value);
    else if (key == "grad_clip") c.grad_clip = parse_double(key, value);
    else if (key == "checkpoint_every") c.checkpoint_every = i();
    else if (key == "eval_every") c.eval_every = i();
    else if (key == "eval_stride") c.eval_stride = i();
    else if (key == "resume") c.resume = value;
    else throw ConfigError("unknown config key '" + key + "'");
}

// Flat text form: `key = value`, one per line, '#' starts a comment.
inline void apply_config_text(TrainConfig& c, std::istream& is, const std::string& origin) {
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        apply_config_key(c, key, value);
    }
}

inline TrainConfig load_config_file(const std::string& path, TrainConfig base = TrainConfig{}) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config file: " + path);
    apply_config_text(base, is, path);
    return base;
}

// key=value override, as accepted on the command line.
inline void apply_override(TrainConfig& c, const std::string& kv) {
    const size_t eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("override must look like key=value, got '" + kv + "'");
    apply_config_key(c, detail::trim(kv.substr(0, eq)), detail::trim(kv.substr(eq + 1)));
}

inline std::string config_to_text(const TrainConfig& c) {
    std::ostringstream os;
    os << "# dataset\n";
    os << "width = " << c.gen.width << "\n";
    os << "height = " << c.gen.height << "\n";
    os << "clip_length = " << c.gen.frames << "\n";
    os << "min_objects = " << c.gen.min_objects << "\n";
    os << "max_objects = " << c.gen.max_objects << "\n";
    os << "mover_prob = " << c.gen.mover_prob << "\n";
    os << "min_size = " << c.gen.min_size << "\n";
    os << "max_size = " << c.gen.max_size << "\n";
    os << "min_speed = " << c.gen.min_speed << "\n";
    os << "max_speed = " << c.gen.max_speed << "\n";
    os << "camera_amplitude = " << c.gen.camera_amplitude << "\n";
    os << "integer_motion = " << (c.gen.integer_motion ? "true" : "false") << "\n";
    os << "smooth_frames = " << (c.gen.smooth_frames ? "true" : "false") << "\n";
    os << "palette_size = " << c.gen.palette_size << "\n";
    os << "background = " << (c.gen.background == Background::Solid ? "solid" : "gradient") << "\n";
    os << "moving_threshold = " << c.gen.moving_threshold << "\n";
    os << "train_clips = " << c.train_clips << "\n";
    os << "val_clips = " << c.val_clips << "\n";
    os << "seed = " << c.seed << "\n";
    os << "# model\n";
    os << "slots = " << c.model.slots << "\n";
    os << "slot_dim = " << c.model.slot_dim << "\n";
    os << "enc_channels = " << c.model.enc_channels << "\n";
    os << "dec_channels = " << c.model.dec_channels << "\n";
    os << "enc_refine_blocks = " << c.model.enc_refine_blocks << "\n";
    os << "downsample_ratio = " << c.model.downsample_ratio << "\n";
    os << "decode_mode = " << to_string(c.model.decode_mode) << "\n";
    os << "inference_mode = " << to_string(c.model.inference_mode) << "\n";
    os << "iterative_steps = " << c.model.iterative_steps << "\n";
    os << "use_memory = " << (c.model.use_memory ? "true" : "false") << "\n";
    os << "use_pos_encoding = " << (c.model.use_pos_encoding ? "true" : "false") << "\n";
    os << "learnable_memory_init = " << (c.model.learnable_memory_init ? "true" : "false") << "\n";
    os << "slot_residual_mlp = " << (c.model.slot_residual_mlp ? "true" : "false") << "\n";
    os << "# supervision\n";
    os << "use_motion = " << (c.use_motion ? "true" : "false") << "\n";
    os << "use_recon = " << (c.use_recon ? "true" : "false") << "\n";
    os << "use_temporal = " << (c.use_temporal ? "true" : "false") << "\n";
    os << "lambda_motion = " << c.lambda_motion << "\n";
    os << "lambda_temporal = " << c.lambda_temporal << "\n";
    os << "drop_rate = " << c.degrade.drop_rate << "\n";
    os << "static_keep_rate = " << c.degrade.static_keep_rate << "\n";
    os << "boundary_erosion = " << c.degrade.boundary_erosion << "\n";
    os << "noise_flip_rate = " << c.degrade.noise_flip_rate << "\n";
    os << "conf_min = " << c.degrade.confidence.min << "\n";
    os << "conf_max = " << c.degrade.confidence.max << "\n";
    os << "degrade_seed = " << c.degrade.seed << "\n";
    os << "motion_postprocess = " << (c.motion_postprocess ? "true" : "false") << "\n";
    os << "pp_min_pixels = " << c.postprocess.min_pixels << "\n";
    os << "pp_min_bbox = " << c.postprocess.min_bbox_dim << "\n";
    os << "pp_max_area = " << c.postprocess.max_area_fraction << "\n";
    os << "pp_boundary = " << c.postprocess.boundary_margin << "\n";
    os << "pp_conf = " << c.postprocess.conf_threshold << "\n";
    os << "pp_mag = " << c.postprocess.mag_threshold << "\n";
    os << "# optimization\n";
    os << "batch_size = " << c.batch_size << "\n";
    os << "epochs = " << c.epochs << "\n";
    os << "base_lr = " << c.base_lr << "\n";
    os << "warmup_iters = " << c.warmup_iters << "\n";
    os << "decay_rate = " << c.decay_rate << "\n";
    os << "decay_step = " << c.decay_step << "\n";
    os << "grad_clip = " << c.grad_clip << "\n";
    os << "checkpoint_every = " << c.checkpoint_every << "\n";
    os << "eval_every = " << c.eval_every << "\n";
    os << "eval_stride = " << c.eval_stride << "\n";
    if (!c.resume.empty()) os << "resume = " << c.resume << "\n";
    return os.str();
}

} // namespace slotmotion
