#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <vector>

#include "slotmotion/core/tensor.hpp"
#include "slotmotion/losses/matching.hpp"

namespace slotmotion {

// Hard segmentation read off an attention map.
struct SegmentationResult {
    int feature_height = 0;
    int feature_width = 0;
    int height = 0;
    int width = 0;
    std::vector<int> labels;    // feature resolution, slot id per location
    std::vector<int> labels_up; // frame resolution, nearest-neighbor upsampled
};

// Per-location argmax over the slot axis; ties go to the lowest slot index.
template <typename T>
SegmentationResult attention_to_masks(const Tensor<T>& attention, int feature_h, int feature_w,
                                      int frame_h, int frame_w) {
    require(attention.rank() == 2, "attention_to_masks: expected [N,K]");
    require(attention.dim(0) == static_cast<int64_t>(feature_h) * feature_w,
            "attention_to_masks: N does not match the feature shape");
    const int64_t n = attention.dim(0), k = attention.dim(1);
    SegmentationResult out;
    out.feature_height = feature_h;
    out.feature_width = feature_w;
    out.height = frame_h;
    out.width = frame_w;
    out.labels.resize(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        int best = 0;
        T bv = attention[i * k];
        for (int64_t j = 1; j < k; ++j)
            if (attention[i * k + j] > bv) {
                bv = attention[i * k + j];
                best = static_cast<int>(j);
            }
        out.labels[static_cast<size_t>(i)] = best;
    }
    out.labels_up.resize(static_cast<size_t>(frame_h) * frame_w);
    for (int y = 0; y < frame_h; ++y)
        for (int x = 0; x < frame_w; ++x) {
            const int fy = y * feature_h / frame_h;
            const int fx = x * feature_w / frame_w;
            out.labels_up[static_cast<size_t>(y) * frame_w + x] =
                out.labels[static_cast<size_t>(fy) * feature_w + fx];
        }
    return out;
}

// Segments as sorted pixel-index lists, extracted from a label map. Labels
// equal to exclude_label (pass a value that never occurs to keep everything)
// produce no segment.
inline std::vector<std::vector<int64_t>> segments_from_labels(const std::vector<int>& labels,
                                                              int exclude_label) {
    std::vector<std::vector<int64_t>> out;
    std::map<int, size_t> index;
    std::vector<int> order;
    for (size_t i = 0; i < labels.size(); ++i) {
        const int l = labels[i];
        if (l == exclude_label) continue;
        auto it = index.find(l);
        if (it == index.end()) {
            index.emplace(l, out.size());
            out.emplace_back();
            it = index.find(l);
        }
        out[it->second].push_back(static_cast<int64_t>(i));
    }
    return out;
}

namespace detail {

inline int64_t intersection_size(const std::vector<int64_t>& a, const std::vector<int64_t>& b) {
    int64_t n = 0;
    size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] < b[j]) ++i;
        else if (b[j] < a[i]) ++j;
        else {
            ++n;
            ++i;
            ++j;
        }
    }
    return n;
}

// Optimal one-to-one matching maximizing total IoU. Returns, per gt segment,
// the matched prediction index or -1.
inline std::vector<int> match_by_iou(const std::vector<std::vector<int64_t>>& pred,
                                     const std::vector<std::vector<int64_t>>& gt) {
    const int g = static_cast<int>(gt.size()), p = static_cast<int>(pred.size());
    std::vector<int> out(static_cast<size_t>(g), -1);
    if (g == 0 || p == 0) return out;
    Tensor<double> iou({g, p});
    for (int i = 0; i < g; ++i)
        for (int j = 0; j < p; ++j) {
            const int64_t inter = intersection_size(gt[static_cast<size_t>(i)], pred[static_cast<size_t>(j)]);
            const int64_t uni = static_cast<int64_t>(gt[static_cast<size_t>(i)].size()) +
                                static_cast<int64_t>(pred[static_cast<size_t>(j)].size()) - inter;
            iou.at(i, j) = uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
        }
    if (g <= p) {
        Tensor<double> cost({g, p});
        for (int i = 0; i < g; ++i)
            for (int j = 0; j < p; ++j) cost.at(i, j) = -iou.at(i, j);
        Assignment a = hungarian_match(cost);
        for (int i = 0; i < g; ++i) out[static_cast<size_t>(i)] = a.slot_for_mask[static_cast<size_t>(i)];
    } else {
        Tensor<double> cost({p, g});
        for (int j = 0; j < p; ++j)
            for (int i = 0; i < g; ++i) cost.at(j, i) = -iou.at(i, j);
        Assignment a = hungarian_match(cost);
        for (int j = 0; j < p; ++j) out[static_cast<size_t>(a.slot_for_mask[static_cast<size_t>(j)])] = j;
    }
    return out;
}

} // namespace detail

// Mean over gt segments of the matched-pair IoU; unmatched gt segments score 0.
inline double miou(const std::vector<std::vector<int64_t>>& pred,
                   const std::vector<std::vector<int64_t>>& gt) {
    if (gt.empty()) return 0.0;
    const auto match = detail::match_by_iou(pred, gt);
    double sum = 0.0;
    for (size_t i = 0; i < gt.size(); ++i) {
        const int j = match[i];
        if (j < 0) continue;
        const int64_t inter = detail::intersection_size(gt[i], pred[static_cast<size_t>(j)]);
        const int64_t uni = static_cast<int64_t>(gt[i].size()) +
                            static_cast<int64_t>(pred[static_cast<size_t>(j)].size()) - inter;
        if (uni > 0) sum += static_cast<double>(inter) / static_cast<double>(uni);
    }
    return sum / static_cast<double>(gt.size());
}

// Mean over gt segments of 2PR/(P+R) of the matched pair; unmatched gt -> 0.
inline double f_measure(const std::vector<std::vector<int64_t>>& pred,
                        const std::vector<std::vector<int64_t>>& gt) {
    if (gt.empty()) return 0.0;
    const auto match = detail::match_by_iou(pred, gt);
    double sum = 0.0;
    for (size_t i = 0; i < gt.size(); ++i) {
        const int j = match[i];
        if (j < 0) continue;
        const int64_t inter = detail::intersection_size(gt[i], pred[static_cast<size_t>(j)]);
        if (inter == 0) continue;
        const double precision = static_cast<double>(inter) / static_cast<double>(pred[static_cast<size_t>(j)].size());
        const double recall = static_cast<double>(inter) / static_cast<double>(gt[i].size());
        sum += 2.0 * precision * recall / (precision + recall);
    }
    return sum / static_cast<double>(gt.size());
}

} // namespace slotmotion
