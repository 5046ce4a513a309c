#pragma once

#include <algorithm>
#include <functional>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "slotmotion/train/trainer.hpp"

namespace slotmotion {

struct Variant {
    std::string name;
    std::function<void(TrainConfig&)> apply;
};

// The architecture ladder: memory, inference strategy, temporal term,
// decoding strategy, motion supervision, and the reconstruction objective.
inline std::vector<Variant> table1_grid() {
    return {
        {"iter_perslot", [](TrainConfig& c) {
             c.model.use_memory = false;
             c.model.inference_mode = InferenceMode::Iterative;
             c.model.decode_mode = DecodeMode::PerSlot;
             c.use_temporal = false;
             c.use_motion = false;
         }},
        {"gru_iter_perslot", [](TrainConfig& c) {
             c.model.use_memory = true;
             c.model.inference_mode = InferenceMode::Iterative;
             c.model.decode_mode = DecodeMode::PerSlot;
             c.use_temporal = false;
             c.use_motion = false;
         }},
        {"gru_1step_temp_perslot", [](TrainConfig& c) {
             c.model.use_memory = true;
             c.model.inference_mode = InferenceMode::SingleStep;
             c.model.decode_mode = DecodeMode::PerSlot;
             c.use_temporal = true;
             c.use_motion = false;
         }},
        {"gru_1step_temp_1shot", [](TrainConfig& c) {
             c.model.use_memory = true;
             c.model.inference_mode = InferenceMode::SingleStep;
             c.model.decode_mode = DecodeMode::OneShot;
             c.use_temporal = true;
             c.use_motion = false;
         }},
        {"gru_1step_temp_1shot_motion", [](TrainConfig& c) {
             c.model.use_memory = true;
             c.model.inference_mode = InferenceMode::SingleStep;
             c.model.decode_mode = DecodeMode::OneShot;
             c.use_temporal = true;
             c.use_motion = true;
             c.use_recon = true;
         }},
        {"gru_1step_temp_1shot_motion_norecon", [](TrainConfig& c) {
             c.model.use_memory = true;
             c.model.inference_mode = InferenceMode::SingleStep;
             c.model.decode_mode = DecodeMode::OneShot;
             c.use_temporal = true;
             c.use_motion = true;
             c.use_recon = false;
         }},
    };
}

inline std::vector<Variant> resolve_grid(const std::string& name) {
    if (name == "table1") return table1_grid();
    throw ConfigError("unknown ablation grid '" + name + "' (available: table1)");
}

struct VariantResult {
    std::string name;
    std::vector<double> fg_ari_per_seed; // fraction in [-1,1]
    double mean_fg_ari = 0.0;
};

// Trains every grid variant over the given seeds on shared datasets (one
// train/val pair per seed, identical across variants) and reports mean Fg.ARI.
inline std::vector<VariantResult> ablate(const TrainConfig& base, const std::vector<Variant>& grid,
                                         const std::vector<uint64_t>& seeds,
                                         const std::string& out_dir, std::ostream* log = nullptr) {
    require(!grid.empty(), "ablate: empty grid");
    require(!seeds.empty(), "ablate: need at least one seed");
    std::vector<VariantResult> results;
    results.reserve(grid.size());
    for (const auto& v : grid) results.push_back(VariantResult{v.name, {}, 0.0});

    for (size_t si = 0; si < seeds.size(); ++si) {
        TrainConfig data_cfg = base;
        data_cfg.seed = seeds[si];
        const ClipStore train_set = ClipStore::generate(data_cfg, "train", data_cfg.train_clips);
        const ClipStore val_set = ClipStore::generate(data_cfg, "val", data_cfg.val_clips);
        for (size_t vi = 0; vi < grid.size(); ++vi) {
            TrainConfig cfg = data_cfg;
            grid[vi].apply(cfg);
            cfg.validate();
            const std::string run_dir =
                out_dir + "/" + grid[vi].name + "/seed" + std::to_string(seeds[si]);
            if (log) *log << "[ablate] " << grid[vi].name << " seed " << seeds[si] << "\n";
            RunRecord rr = train_model(cfg, train_set, &val_set, run_dir, log);
            const double fg = rr.final_eval.fg_ari.value_or(0.0);
            results[vi].fg_ari_per_seed.push_back(fg);
            if (log) *log << "[ablate] " << grid[vi].name << " seed " << seeds[si] << " Fg.ARI "
                          << fg * 100.0 << "\n";
        }
    }
    for (auto& r : results) {
        double s = 0.0;
        for (double v : r.fg_ari_per_seed) s += v;
        r.mean_fg_ari = s / static_cast<double>(r.fg_ari_per_seed.size());
    }
    return results;
}

// Paper-style table, ranked by mean Fg.ARI (scores reported as points).
inline std::string render_ablation_table(std::vector<VariantResult> results) {
    std::sort(results.begin(), results.end(),
              [](const VariantResult& a, const VariantResult& b) { return a.mean_fg_ari > b.mean_fg_ari; });
    std::ostringstream os;
    os << std::left << std::setw(42) << "variant" << std::right << std::setw(10) << "Fg.ARI"
       << "  per-seed\n";
    for (const auto& r : results) {
        os << std::left << std::setw(42) << r.name << std::right << std::setw(10) << std::fixed
           << std::setprecision(1) << r.mean_fg_ari * 100.0 << "  [";
        for (size_t i = 0; i < r.fg_ari_per_seed.size(); ++i)
            os << (i ? " " : "") << std::setprecision(1) << r.fg_ari_per_seed[i] * 100.0;
        os << "]\n";
    }
    return os.str();
}

inline nlohmann::json ablation_to_json(const std::vector<VariantResult>& results) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : results)
        j.push_back({{"name", r.name},
                     {"fg_ari_mean", r.mean_fg_ari},
                     {"fg_ari_per_seed", r.fg_ari_per_seed}});
    return j;
}

} // namespace slotmotion
