#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "slotmotion/core/params.hpp"
#include "slotmotion/core/random.hpp"
#include "slotmotion/core/tape.hpp"
#include "slotmotion/datagen/types.hpp"
#include "slotmotion/model/config.hpp"

namespace slotmotion {

// [x, y, 1-x, 1-y] coordinate grid in [0,1], used for positional encodings.
template <typename T>
Tensor<T> position_grid(int h, int w) {
    Tensor<T> g({4, h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double fx = w > 1 ? static_cast<double>(x) / (w - 1) : 0.5;
            const double fy = h > 1 ? static_cast<double>(y) / (h - 1) : 0.5;
            g.at(0, y, x) = static_cast<T>(fx);
            g.at(1, y, x) = static_cast<T>(fy);
            g.at(2, y, x) = static_cast<T>(1.0 - fx);
            g.at(3, y, x) = static_cast<T>(1.0 - fy);
        }
    return g;
}

template <typename T>
Tensor<T> frame_to_chw(const ClipSample& clip, int t) {
    Tensor<T> out({3, clip.height, clip.width});
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < clip.height; ++y)
            for (int x = 0; x < clip.width; ++x)
                out.at(c, y, x) = static_cast<T>(clip.frame_at(t, y, x, c));
    return out;
}

// Video slot auto-encoder: per-frame CNN encoder, optional ConvGRU memory,
// slot binding (single attention step carried across frames, or the iterative
// variant from randomly initialized slots), and decoding (a single decoder
// pass over the alpha-combined slot map, or one decoder pass per slot).
template <typename T>
class VideoSlotModel {
public:
    VideoSlotModel(const ModelConfig& cfg, uint64_t init_seed) : cfg_(cfg), seed_(init_seed) {
        cfg_.validate();
        register_params();
        pos_feat_ = position_grid<T>(cfg_.feature_height(), cfg_.feature_width());
    }

    const ModelConfig& config() const { return cfg_; }
    ParamStore<T>& params() { return store_; }
    const ParamStore<T>& params() const { return store_; }

    // One tape-bound forward context. Parameter leaves are created lazily and
    // shared across all calls made through the same pass.
    struct Pass {
        Pass(VideoSlotModel& m, Tape<T>& t) : model(&m), tape(&t), bind(m.store_) {}
        VideoSlotModel* model;
        Tape<T>* tape;
        TapeBinding<T> bind;

        int p(const std::string& name) {
            int pid = model->store_.find(name);
            require(pid >= 0, "unknown parameter: " + name);
            return bind.use(*tape, pid);
        }
    };

    // frame [3,H,W] -> features [C,H',W']
    int encode(Pass& ps, const Tensor<T>& frame_chw) {
        require(frame_chw.rank() == 3 && frame_chw.dim(0) == 3 &&
                    frame_chw.dim(1) == cfg_.frame_height && frame_chw.dim(2) == cfg_.frame_width,
                "encode: frame shape " + shape_str(frame_chw.shape()) + " does not match config " +
                    std::to_string(cfg_.frame_height) + "x" + std::to_string(cfg_.frame_width));
        Tape<T>& t = *ps.tape;
        int x = t.constant(frame_chw);
        int h = relu(t, conv2d(t, x, ps.p("enc.conv0.w"), ps.p("enc.conv0.b"), 2, 2));
        if (cfg_.downsample_ratio == 4)
            h = relu(t, conv2d(t, h, ps.p("enc.conv1.w"), ps.p("enc.conv1.b"), 2, 1));
        for (int i = 0; i < cfg_.enc_refine_blocks; ++i) {
            const std::string base = "enc.refine" + std::to_string(i);
            h = relu(t, conv2d(t, h, ps.p(base + ".w"), ps.p(base + ".b"), 1, 1));
        }
        if (cfg_.use_pos_encoding) {
            int grid = t.constant(pos_feat_);
            h = add(t, h, conv2d(t, grid, ps.p("enc.pos.w"), ps.p("enc.pos.b"), 1, 0));
        }
        return h;
    }

    // Gated recurrent update over the feature grid; the new hidden state is
    // both the aggregated feature map and the next memory state.
    std::pair<int, int> memory_step(Pass& ps, int r_prev, int h) {
        Tape<T>& t = *ps.tape;
        require(t.val(r_prev).same_shape(t.val(h)), "memory_step: state/input shape mismatch");
        int z = sigmoid(t, add(t, conv2d(t, h, ps.p("gru.xz.w"), ps.p("gru.z.b"), 1, 1),
                               conv2d(t, r_prev, ps.p("gru.hz.w"), -1, 1, 1)));
        int r = sigmoid(t, add(t, conv2d(t, h, ps.p("gru.xr.w"), ps.p("gru.r.b"), 1, 1),
                               conv2d(t, r_prev, ps.p("gru.hr.w"), -1, 1, 1)));
        int cand = tanh(t, add(t, conv2d(t, h, ps.p("gru.xh.w"), ps.p("gru.h.b"), 1, 1),
                               conv2d(t, mul(t, r, r_prev), ps.p("gru.hh.w"), -1, 1, 1)));
        // h' = (1-z) * r_prev + z * cand
        int out = add(t, r_prev, mul(t, z, sub(t, cand, r_prev)));
        return {out, out};
    }

    struct Binding {
        int slots;     // [K, D]
        int attention; // [N, K]; rows sum to 1
    };

    // One attention step from the previous slot state.
    Binding bind_single_step(Pass& ps, int s_prev, int features) {
        Tape<T>& t = *ps.tape;
        int hn = chw_to_nc(t, features);
        int k = linear(t, hn, ps.p("att.k.w"), ps.p("att.k.b"));
        int v = linear(t, hn, ps.p("att.v.w"), ps.p("att.v.b"));
        int q = linear(t, s_prev, ps.p("att.q.w"), ps.p("att.q.b"));
        int logits = scale(t, matmul(t, k, q, false, true),
                           1.0 / std::sqrt(static_cast<double>(cfg_.slot_dim)));
        int w = softmax_rows(t, logits);
        int wn = normalize_cols(t, w, 1e-8);
        int s = matmul(t, wn, v, true, false);
        if (cfg_.slot_residual_mlp) {
            int hmid = relu(t, linear(t, s, ps.p("mlp.w1"), ps.p("mlp.b1")));
            s = add(t, s, linear(t, hmid, ps.p("mlp.w2"), ps.p("mlp.b2")));
        }
        return {s, w};
    }

    // Iterative attention from randomly initialized slots, GRU slot updates.
    Binding bind_iterative(Pass& ps, int features, int steps, Rng& rng) {
        require(steps >= 1, "bind_iterative: steps must be >= 1");
        Tape<T>& t = *ps.tape;
        int hn = chw_to_nc(t, features);
        int k = linear(t, hn, ps.p("att.k.w"), ps.p("att.k.b"));
        int v = linear(t, hn, ps.p("att.v.w"), ps.p("att.v.b"));

        Tensor<T> eps({cfg_.slots, cfg_.slot_dim});
        for (int64_t i = 0; i < eps.numel(); ++i) eps[i] = static_cast<T>(rng.normal());
        int mu = broadcast_vec_rows(t, ps.p("slot.mu"), cfg_.slots);
        int sg = broadcast_vec_rows(t, exp(t, ps.p("slot.logsigma")), cfg_.slots);
        int s = add(t, mu, mul(t, sg, t.constant(std::move(eps))));

        int w = -1;
        for (int l = 0; l < steps; ++l) {
            int q = linear(t, s, ps.p("att.q.w"), ps.p("att.q.b"));
            int logits = scale(t, matmul(t, k, q, false, true),
                               1.0 / std::sqrt(static_cast<double>(cfg_.slot_dim)));
            w = softmax_rows(t, logits);
            int wn = normalize_cols(t, w, 1e-8);
            int u = matmul(t, wn, v, true, false);
            s = slot_gru(ps, s, u);
        }
        return {s, w};
    }

    // Combines broadcast slot features under the attention alpha masks and
    // decodes the single combined map. Because the alpha masks sum to one at
    // every location, the positional term can be added once after combining.
    int decode_one_shot(Pass& ps, int slots, int attention) {
        Tape<T>& t = *ps.tape;
        int f = matmul(t, attention, slots); // [N, D]
        int fmap = nc_to_chw(t, f, cfg_.feature_height(), cfg_.feature_width());
        return decoder_stack(ps, fmap, /*out_channels=*/3);
    }

    struct PerSlotDecode {
        int recon;  // [3, H, W]
        int alphas; // [H*W, K], rows sum to 1
    };

    // Decodes every slot separately to RGB + alpha logit and composites with
    // a per-pixel softmax over slots.
    PerSlotDecode decode_per_slot(Pass& ps, int slots) {
        Tape<T>& t = *ps.tape;
        const int N = cfg_.locations();
        std::vector<int> rgb_nc(static_cast<size_t>(cfg_.slots));
        std::vector<int> alpha_logits(static_cast<size_t>(cfg_.slots));
        for (int i = 0; i < cfg_.slots; ++i) {
            int g = broadcast_vec_rows(t, row(t, slots, i), N);
            int fmap = nc_to_chw(t, g, cfg_.feature_height(), cfg_.feature_width());
            int out = decoder_stack(ps, fmap, /*out_channels=*/4); // [4, H, W]
            rgb_nc[static_cast<size_t>(i)] = chw_to_nc(t, slice_channels(t, out, 0, 3));
            alpha_logits[static_cast<size_t>(i)] =
                reshape(t, slice_channels(t, out, 3, 4),
                        {static_cast<int64_t>(cfg_.frame_height) * cfg_.frame_width});
        }
        int alphas = softmax_rows(t, stack_cols(t, alpha_logits));
        int recon_nc = -1;
        for (int i = 0; i < cfg_.slots; ++i) {
            int term = mul_colvec(t, rgb_nc[static_cast<size_t>(i)], col(t, alphas, i));
            recon_nc = recon_nc < 0 ? term : add(t, recon_nc, term);
        }
        return {nc_to_chw(t, recon_nc, cfg_.frame_height, cfg_.frame_width), alphas};
    }

    int initial_memory(Pass& ps) {
        if (cfg_.learnable_memory_init) return ps.p("mem.init");
        return ps.tape->constant(Tensor<T>(
            {cfg_.enc_channels, cfg_.feature_height(), cfg_.feature_width()}));
    }

    int initial_slots(Pass& ps) { return ps.p("slot.init"); }

    // Recurrent state threaded across the frames of a clip (node ids live on
    // the pass's tape).
    struct FrameState {
        int memory = -1;
        int slots = -1;
        bool first = true;
    };

    struct FrameOutput {
        int slots = -1;
        int attention = -1;
        int recon = -1;  // -1 when reconstruction was not requested
        int alphas = -1; // per-slot decode only
    };

    FrameOutput forward_frame(Pass& ps, FrameState& state, const Tensor<T>& frame_chw,
                              bool want_recon, Rng* iter_rng = nullptr) {
        int h = encode(ps, frame_chw);
        if (cfg_.use_memory) {
            if (state.first) state.memory = initial_memory(ps);
            auto [agg, mem] = memory_step(ps, state.memory, h);
            state.memory = mem;
            h = agg;
        }
        Binding b{};
        if (cfg_.inference_mode == InferenceMode::SingleStep) {
            if (state.first) state.slots = initial_slots(ps);
            b = bind_single_step(ps, state.slots, h);
            state.slots = b.slots;
        } else {
            require(iter_rng != nullptr, "forward_frame: iterative mode needs an rng");
            b = bind_iterative(ps, h, cfg_.iterative_steps, *iter_rng);
        }
        state.first = false;
        FrameOutput out;
        out.slots = b.slots;
        out.attention = b.attention;
        if (want_recon) {
            if (cfg_.decode_mode == DecodeMode::OneShot) {
                out.recon = decode_one_shot(ps, b.slots, b.attention);
            } else {
                auto d = decode_per_slot(ps, b.slots);
                out.recon = d.recon;
                out.alphas = d.alphas;
            }
        }
        return out;
    }

    std::vector<FrameOutput> forward_clip(Pass& ps, const std::vector<Tensor<T>>& frames,
                                          bool want_recon, Rng* iter_rng = nullptr) {
        require(!frames.empty(), "forward_clip: need at least one frame");
        FrameState state;
        std::vector<FrameOutput> out;
        out.reserve(frames.size());
        for (const auto& f : frames) out.push_back(forward_frame(ps, state, f, want_recon, iter_rng));
        return out;
    }

private:
    int slot_gru(Pass& ps, int s, int u) {
        Tape<T>& t = *ps.tape;
        int z = sigmoid(t, add(t, linear(t, u, ps.p("itgru.uz"), ps.p("itgru.bz")),
                               matmul(t, s, ps.p("itgru.sz"))));
        int r = sigmoid(t, add(t, linear(t, u, ps.p("itgru.ur"), ps.p("itgru.br")),
                               matmul(t, s, ps.p("itgru.sr"))));
        int cand = tanh(t, add(t, linear(t, u, ps.p("itgru.un"), ps.p("itgru.bn")),
                               mul(t, r, matmul(t, s, ps.p("itgru.sn")))));
        return add(t, s, mul(t, z, sub(t, cand, s)));
    }

    int decoder_stack(Pass& ps, int fmap, int out_channels) {
        Tape<T>& t = *ps.tape;
        if (cfg_.use_pos_encoding) {
            int grid = t.constant(pos_feat_);
            fmap = add(t, fmap, conv2d(t, grid, ps.p("dec.pos.w"), ps.p("dec.pos.b"), 1, 0));
        }
        int h = relu(t, conv_transpose2d(t, fmap, ps.p("dec.up0.w"), ps.p("dec.up0.b"), 2, 1));
        if (cfg_.downsample_ratio == 4)
            h = relu(t, conv_transpose2d(t, h, ps.p("dec.up1.w"), ps.p("dec.up1.b"), 2, 1));
        h = relu(t, conv2d(t, h, ps.p("dec.refine.w"), ps.p("dec.refine.b"), 1, 1));
        const char* w = out_channels == 3 ? "dec.out3.w" : "dec.out4.w";
        const char* b = out_channels == 3 ? "dec.out3.b" : "dec.out4.b";
        return conv2d(t, h, ps.p(w), ps.p(b), 1, 1);
    }

    Tensor<T> conv_init(const std::string& name, int oc, int ic, int k) {
        Rng rng(mix_seed(seed_, hash_name(name)));
        const double std = std::sqrt(2.0 / (static_cast<double>(ic) * k * k));
        return Tensor<T>::randn({oc, ic, k, k}, rng, std);
    }

    Tensor<T> convT_init(const std::string& name, int ic, int oc, int k) {
        Rng rng(mix_seed(seed_, hash_name(name)));
        const double std = std::sqrt(2.0 / (static_cast<double>(ic) * k * k));
        return Tensor<T>::randn({ic, oc, k, k}, rng, std);
    }

    Tensor<T> linear_init(const std::string& name, int in, int out) {
        Rng rng(mix_seed(seed_, hash_name(name)));
        const double std = std::sqrt(1.0 / static_cast<double>(in));
        return Tensor<T>::randn({in, out}, rng, std);
    }

    void register_params() {
        const int C = cfg_.enc_channels, D = cfg_.slot_dim, DC = cfg_.dec_channels;
        store_.add("enc.conv0.w", conv_init("enc.conv0.w", C, 3, 5));
        store_.add("enc.conv0.b", Tensor<T>({C}));
        if (cfg_.downsample_ratio == 4) {
            store_.add("enc.conv1.w", conv_init("enc.conv1.w", C, C, 3));
            store_.add("enc.conv1.b", Tensor<T>({C}));
        }
        for (int i = 0; i < cfg_.enc_refine_blocks; ++i) {
            const std::string base = "enc.refine" + std::to_string(i);
            store_.add(base + ".w", conv_init(base + ".w", C, C, 3));
            store_.add(base + ".b", Tensor<T>({C}));
        }
        if (cfg_.use_pos_encoding) {
            Rng rng_e(mix_seed(seed_, hash_name("enc.pos.w")));
            Rng rng_d(mix_seed(seed_, hash_name("dec.pos.w")));
            store_.add("enc.pos.w", Tensor<T>::randn({C, 4, 1, 1}, rng_e, 0.3));
            store_.add("enc.pos.b", Tensor<T>({C}));
            store_.add("dec.pos.w", Tensor<T>::randn({D, 4, 1, 1}, rng_d, 0.3));
            store_.add("dec.pos.b", Tensor<T>({D}));
        }
        if (cfg_.use_memory) {
            for (const char* g : {"xz", "hz", "xr", "hr", "xh", "hh"}) {
                const std::string name = std::string("gru.") + g + ".w";
                store_.add(name, conv_init(name, C, C, 3));
            }
            store_.add("gru.z.b", Tensor<T>({C}));
            store_.add("gru.r.b", Tensor<T>({C}));
            store_.add("gru.h.b", Tensor<T>({C}));
            if (cfg_.learnable_memory_init)
                store_.add("mem.init",
                           Tensor<T>({C, cfg_.feature_height(), cfg_.feature_width()}));
        }
        store_.add("att.k.w", linear_init("att.k.w", C, D));
        store_.add("att.k.b", Tensor<T>({D}));
        store_.add("att.v.w", linear_init("att.v.w", C, D));
        store_.add("att.v.b", Tensor<T>({D}));
        store_.add("att.q.w", linear_init("att.q.w", D, D));
        store_.add("att.q.b", Tensor<T>({D}));
        if (cfg_.inference_mode == InferenceMode::SingleStep) {
            Rng rng(mix_seed(seed_, hash_name("slot.init")));
            store_.add("slot.init",
                       Tensor<T>::randn({cfg_.slots, D}, rng, 1.0 / std::sqrt(static_cast<double>(D))));
        } else {
            Rng rng(mix_seed(seed_, hash_name("slot.mu")));
            store_.add("slot.mu",
                       Tensor<T>::randn({D}, rng, 1.0 / std::sqrt(static_cast<double>(D))));
            store_.add("slot.logsigma", Tensor<T>({D}));
            for (const char* g : {"uz", "sz", "ur", "sr", "un", "sn"}) {
                const std::string name = std::string("itgru.") + g;
                store_.add(name, linear_init(name, D, D));
            }
            store_.add("itgru.bz", Tensor<T>({D}));
            store_.add("itgru.br", Tensor<T>({D}));
            store_.add("itgru.bn", Tensor<T>({D}));
        }
        if (cfg_.slot_residual_mlp) {
            store_.add("mlp.w1", linear_init("mlp.w1", D, D));
            store_.add("mlp.b1", Tensor<T>({D}));
            store_.add("mlp.w2", linear_init("mlp.w2", D, D));
            store_.add("mlp.b2", Tensor<T>({D}));
        }
        store_.add("dec.up0.w", convT_init("dec.up0.w", D, DC, 4));
        store_.add("dec.up0.b", Tensor<T>({DC}));
        if (cfg_.downsample_ratio == 4) {
            store_.add("dec.up1.w", convT_init("dec.up1.w", DC, DC, 4));
            store_.add("dec.up1.b", Tensor<T>({DC}));
        }
        store_.add("dec.refine.w", conv_init("dec.refine.w", DC, DC, 3));
        store_.add("dec.refine.b", Tensor<T>({DC}));
        if (cfg_.decode_mode == DecodeMode::OneShot) {
            store_.add("dec.out3.w", conv_init("dec.out3.w", 3, DC, 3));
            store_.add("dec.out3.b", Tensor<T>({3}));
        } else {
            store_.add("dec.out4.w", conv_init("dec.out4.w", 4, DC, 3));
            store_.add("dec.out4.b", Tensor<T>({4}));
        }
    }

    ModelConfig cfg_;
    uint64_t seed_;
    ParamStore<T> store_;
    Tensor<T> pos_feat_;
};

} // namespace slotmotion
