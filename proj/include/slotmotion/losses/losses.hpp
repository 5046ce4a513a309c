#pragma once

#include <cmath>
#include <cstdio>
#include <vector>

#include "slotmotion/core/tape.hpp"
#include "slotmotion/losses/matching.hpp"
#include "slotmotion/motionseg/masks.hpp"

namespace slotmotion {

struct LossWeights {
    double lambda_motion = 0.5;
    double lambda_temporal = 0.01;
};

struct LossBreakdown {
    double recon = 0.0;
    double motion = 0.0;
    double temporal = 0.0;
    double total = 0.0;
    double lambda_motion = 0.5;
    double lambda_temporal = 0.01;

    bool finite() const {
        return std::isfinite(recon) && std::isfinite(motion) && std::isfinite(temporal) &&
               std::isfinite(total);
    }
};

// Sum-reduced binary cross entropy between a binary mask and one attention
// column, on plain values. Matches the tape op bit for bit; used to build
// matching costs without touching the graph.
template <typename T>
double seg_loss_value(const BinaryMask& mask, const Tensor<T>& attention, int64_t column) {
    require(attention.rank() == 2, "seg_loss_value: attention must be [N,K]");
    const int64_t n = attention.dim(0), k = attention.dim(1);
    require(static_cast<int64_t>(mask.data.size()) == n, "seg_loss_value: mask length mismatch");
    require(column >= 0 && column < k, "seg_loss_value: bad column");
    double s = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        const double w =
            std::min(std::max(static_cast<double>(attention[i * k + column]), kBceEps), 1.0 - kBceEps);
        const double m = mask.data[static_cast<size_t>(i)] ? 1.0 : 0.0;
        s += -m * std::log(w) - (1.0 - m) * std::log(1.0 - w);
    }
    return s;
}

template <typename T>
Tensor<double> seg_cost_matrix(const std::vector<MotionMask>& masks, const Tensor<T>& attention) {
    const int64_t c = static_cast<int64_t>(masks.size());
    const int64_t k = attention.dim(1);
    Tensor<double> cost({c, k});
    for (int64_t i = 0; i < c; ++i)
        for (int64_t j = 0; j < k; ++j)
            cost.at(i, j) = seg_loss_value(masks[static_cast<size_t>(i)].mask, attention, j);
    return cost;
}

// Assigns the frame's motion masks to slots by greedy matching under the
// segmentation-loss cost. Rejects frames with more masks than slots.
template <typename T>
Assignment greedy_match(const std::vector<MotionMask>& masks, const Tensor<T>& attention) {
    const int64_t k = attention.dim(1);
    if (static_cast<int64_t>(masks.size()) > k)
        throw ConfigError("greedy_match: " + std::to_string(masks.size()) + " motion masks but only " +
                          std::to_string(k) + " slots; raise the slot count");
    if (masks.empty()) return Assignment{};
    return greedy_match_cost(seg_cost_matrix(masks, attention));
}

// ---- tape-level objectives --------------------------------------------------

template <typename T>
int recon_loss(Tape<T>& t, int recon, const Tensor<T>& target) {
    return mse(t, recon, target);
}

// Sum of matched per-slot segmentation losses under a fixed assignment;
// gradients flow through the attention columns, not the assignment.
template <typename T>
int motion_loss(Tape<T>& t, int attention, const std::vector<MotionMask>& masks,
                const Assignment& assignment) {
    if (masks.empty()) return t.constant(Tensor<T>::scalar(T(0)));
    require(assignment.matched_count() == static_cast<int>(masks.size()),
            "motion_loss: assignment size mismatch");
    const int64_t n = t.val(attention).dim(0);
    int acc = -1;
    for (size_t i = 0; i < masks.size(); ++i) {
        const BinaryMask& m = masks[i].mask;
        require(static_cast<int64_t>(m.data.size()) == n, "motion_loss: mask resolution mismatch");
        Tensor<T> mt({n});
        for (int64_t j = 0; j < n; ++j) mt[j] = m.data[static_cast<size_t>(j)] ? T(1) : T(0);
        int term = bce_sum(t, mt, col(t, attention, assignment.slot_for_mask[i]));
        acc = acc < 0 ? term : add(t, acc, term);
    }
    return acc;
}

// Sum over consecutive frame pairs of || I - softmax(S_t S_{t+1}^T) ||_F.
template <typename T>
int temporal_loss(Tape<T>& t, const std::vector<int>& slot_sequence) {
    if (slot_sequence.size() < 2) {
        static bool warned = false;
        if (!warned) {
            std::fprintf(stderr,
                         "warning: temporal loss needs at least 2 frames, returning 0\n");
            warned = true;
        }
        return t.constant(Tensor<T>::scalar(T(0)));
    }
    const int64_t k = t.val(slot_sequence[0]).dim(0);
    Tensor<T> identity({k, k});
    for (int64_t i = 0; i < k; ++i) identity.at(i, i) = T(1);
    int acc = -1;
    for (size_t i = 0; i + 1 < slot_sequence.size(); ++i) {
        int sim = matmul(t, slot_sequence[i], slot_sequence[i + 1], false, true);
        int p = softmax_rows(t, sim);
        int term = frobenius_norm(t, sub(t, t.constant(identity), p));
        acc = acc < 0 ? term : add(t, acc, term);
    }
    return acc;
}

struct TotalLoss {
    int node = -1; // scalar tape node
    LossBreakdown breakdown;
};

// total = recon + lambda_M * motion + lambda_T * temporal. Any component may
// be absent (-1), in which case it contributes exactly zero.
template <typename T>
TotalLoss total_loss(Tape<T>& t, int recon, int motion, int temporal, const LossWeights& w) {
    TotalLoss out;
    out.breakdown.lambda_motion = w.lambda_motion;
    out.breakdown.lambda_temporal = w.lambda_temporal;
    int acc = -1;
    if (recon >= 0) {
        out.breakdown.recon = static_cast<double>(t.val(recon)[0]);
        acc = recon;
    }
    if (motion >= 0) {
        out.breakdown.motion = static_cast<double>(t.val(motion)[0]);
        int term = scale(t, motion, w.lambda_motion);
        acc = acc < 0 ? term : add(t, acc, term);
    }
    if (temporal >= 0) {
        out.breakdown.temporal = static_cast<double>(t.val(temporal)[0]);
        int term = scale(t, temporal, w.lambda_temporal);
        acc = acc < 0 ? term : add(t, acc, term);
    }
    if (acc < 0) acc = t.constant(Tensor<T>::scalar(T(0)));
    out.node = acc;
    out.breakdown.total = out.breakdown.recon + w.lambda_motion * out.breakdown.motion +
                          w.lambda_temporal * out.breakdown.temporal;
    return out;
}

} // namespace slotmotion
